//! Panel mixed logit (random parameter multinomial logit) toolkit for
//! transit-disruption response choices.
//!
//! The crate estimates choice models by maximum simulated likelihood over
//! Halton draws, generates synthetic disruption choice data calibrated to
//! published sample moments, and derives post-estimation quantities such as
//! random-coefficient sign shares, predicted action shares, and attribute
//! what-if sweeps.

pub mod analytics;
pub mod choice;
#[cfg(feature = "cli")]
pub mod cli;
pub mod draws;
pub mod estimator;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod scenario;

pub use analytics::{
    attribute_sweep, predict_probs, predicted_shares, sign_share, Direction, Scenario, ShareTable,
};
pub use choice::{
    apply_availability, validate_panel, AlternativeId, Availability, ChoicePanel, ChoiceSituation,
    Respondent, ValidationReport,
};
pub use draws::{inv_normal_cdf, normal_cdf, radical_inverse, DrawMeta, DrawSet};
pub use estimator::{
    estimate, fit_stats, null_loglik, EstimationOptions, EstimationResult, NullDefinition,
    StartStrategy, StderrMethod,
};
pub use likelihood::{
    logit_probs, panel_sim_prob, sim_loglik, sim_loglik_grad, systematic_utility,
};
pub use model::{
    design_row, reference_spec, Covariate, ModelSpec, ParamKind, ParameterVector, UtilityTerm,
};
pub use scenario::{
    generate_scenarios, sample_population, simulate_choices, synthesize_panel, typical_scenario,
    GeneratorConfig, PersonProfile, TripContext,
};
