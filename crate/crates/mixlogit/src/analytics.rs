//! Post-estimation quantities: random-coefficient sign shares, simulated
//! choice-probability prediction, aggregate action shares, and attribute
//! what-if sweeps that emit plot-ready tables.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::choice::{AlternativeId, ChoiceSituation, N_ALTERNATIVES};
use crate::draws::{normal_cdf, DrawError, DrawSet};
use crate::likelihood::LikelihoodError;
use crate::model::{design_row, ModelError, ModelSpec, ParameterVector};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Draw(#[from] DrawError),
    #[error("covariate `{0}` does not appear in the model spec")]
    UnknownCovariate(String),
    #[error("scenario set is empty")]
    EmptyScenarioSet,
}

/// Which side of zero the population share refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Negative,
    Positive,
}

/// Share of the population whose N(mean, sd²) coefficient falls on the
/// given side of zero: Phi(-mean/|sd|) for Negative, its exact complement
/// for Positive. A degenerate sd collapses to a step function.
pub fn sign_share(mean: f64, sd: f64, direction: Direction) -> f64 {
    let negative = if sd == 0.0 {
        if mean < 0.0 {
            1.0
        } else if mean > 0.0 {
            0.0
        } else {
            0.5
        }
    } else {
        normal_cdf(-mean / sd.abs())
    };
    match direction {
        Direction::Negative => negative,
        Direction::Positive => 1.0 - negative,
    }
}

/// A choice setting to predict on: one situation plus the person-level
/// covariates of the decision maker. The situation's `chosen` field is
/// ignored by prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub person: BTreeMap<String, f64>,
    pub situation: ChoiceSituation,
}

/// Simulated mixed choice probabilities for one scenario, averaged over
/// the first respondent block of `draws`. Unavailable alternatives get
/// exactly zero and the rest sum to one.
pub fn predict_probs(
    scenario: &Scenario,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<[f64; N_ALTERNATIVES], AnalyticsError> {
    theta.check_dims(spec)?;
    let (means, sds) = theta.split(spec);
    let sit = &scenario.situation;

    // resolve design rows once per alternative
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(N_ALTERNATIVES);
    for alt in AlternativeId::ALL {
        if sit.availability.is_available(alt) {
            rows.push(design_row(sit, &scenario.person, alt, spec, "scenario")?);
        } else {
            rows.push(Vec::new());
        }
    }

    let n_random = spec.n_random();
    let n_draws = if n_random == 0 { 1 } else { draws.n_draws() };
    let mut coefs: Vec<f64> = means.to_vec();
    let mut acc = [0.0f64; N_ALTERNATIVES];
    for d in 0..n_draws {
        if n_random > 0 {
            let z = draws.draw_row(0, d);
            for (k, term_rank) in spec
                .terms()
                .iter()
                .enumerate()
                .filter_map(|(k, _)| spec.random_rank(k).map(|r| (k, r)))
            {
                coefs[k] = means[k] + sds[term_rank].abs() * z[term_rank];
            }
        }
        let mut utils = [f64::NEG_INFINITY; N_ALTERNATIVES];
        let mut max_v = f64::NEG_INFINITY;
        for (j, alt) in AlternativeId::ALL.iter().enumerate() {
            if sit.availability.is_available(*alt) {
                let v: f64 = rows[j].iter().map(|&(k, x)| coefs[k] * x).sum();
                utils[j] = v;
                max_v = max_v.max(v);
            }
        }
        let mut denom = 0.0;
        let mut e = [0.0f64; N_ALTERNATIVES];
        for j in 0..N_ALTERNATIVES {
            if utils[j] > f64::NEG_INFINITY {
                e[j] = (utils[j] - max_v).exp();
                denom += e[j];
            }
        }
        for j in 0..N_ALTERNATIVES {
            acc[j] += e[j] / denom;
        }
    }
    for a in &mut acc {
        *a /= n_draws as f64;
    }
    Ok(acc)
}

/// Convenience wrapper generating a fresh single-block Halton draw set.
pub fn predict_probs_with_draws(
    scenario: &Scenario,
    spec: &ModelSpec,
    theta: &ParameterVector,
    n_draws: usize,
    discard: u64,
) -> Result<[f64; N_ALTERNATIVES], AnalyticsError> {
    let draws = prediction_draws(spec, n_draws, discard)?;
    predict_probs(scenario, spec, theta, &draws)
}

/// One respondent block of Halton normals sized for `spec`.
pub fn prediction_draws(
    spec: &ModelSpec,
    n_draws: usize,
    discard: u64,
) -> Result<DrawSet, AnalyticsError> {
    Ok(DrawSet::halton_normal(
        1,
        n_draws.max(1),
        spec.n_random(),
        discard,
    )?)
}

/// Plot-ready table of predicted shares: one row per scenario label or
/// grid value, columns in canonical alternative order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareTable {
    pub labels: Vec<String>,
    pub rows: Vec<[f64; N_ALTERNATIVES]>,
}

impl ShareTable {
    /// Delimited export: `value` column then the seven canonical
    /// alternative ids, one row per label.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("value");
        for alt in AlternativeId::ALL {
            out.push(',');
            out.push_str(alt.as_str());
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.rows) {
            out.push_str(label);
            for share in row {
                out.push(',');
                out.push_str(&format!("{share:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Average of `predict_probs` across scenarios with a shared draw set.
pub fn predicted_shares(
    scenarios: &[Scenario],
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<[f64; N_ALTERNATIVES], AnalyticsError> {
    if scenarios.is_empty() {
        return Err(AnalyticsError::EmptyScenarioSet);
    }
    let mut acc = [0.0f64; N_ALTERNATIVES];
    for scenario in scenarios {
        let p = predict_probs(scenario, spec, theta, draws)?;
        for (a, pi) in acc.iter_mut().zip(&p) {
            *a += pi;
        }
    }
    for a in &mut acc {
        *a /= scenarios.len() as f64;
    }
    Ok(acc)
}

/// Predicted shares along a grid of values for one covariate, all other
/// attributes held fixed. The same draw set is reused across grid points
/// so the share curves are smooth in the simulation noise.
pub fn attribute_sweep(
    base: &Scenario,
    spec: &ModelSpec,
    theta: &ParameterVector,
    covariate: &str,
    grid: &[f64],
    draws: &DrawSet,
) -> Result<ShareTable, AnalyticsError> {
    if !spec.references_covariate(covariate) {
        return Err(AnalyticsError::UnknownCovariate(covariate.to_string()));
    }
    if grid.is_empty() {
        return Err(AnalyticsError::EmptyScenarioSet);
    }
    let targets = spec.alternatives_using(covariate);
    let mut labels = Vec::with_capacity(grid.len());
    let mut rows = Vec::with_capacity(grid.len());
    for value in grid {
        let mut scenario = base.clone();
        for alt in &targets {
            scenario
                .situation
                .covariates
                .insert((*alt, covariate.to_string()), *value);
        }
        labels.push(format!("{value}"));
        rows.push(predict_probs(&scenario, spec, theta, draws)?);
    }
    Ok(ShareTable { labels, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::Availability;
    use crate::model::{reference_spec, Covariate, UtilityTerm};
    use approx::assert_relative_eq;

    #[test]
    #[allow(clippy::excessive_precision)]
    fn sign_share_reproduces_published_shares() {
        // published random parameters vs the population shares reported
        // alongside them
        assert_relative_eq!(
            sign_share(-0.050, 0.082, Direction::Negative),
            0.7289883061396114,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            sign_share(-0.033, 0.0313, Direction::Negative),
            0.8541302032466030,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            sign_share(-1.596, 3.101, Direction::Negative),
            0.6966091184334988,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sign_share_complement_is_exact() {
        for (m, s) in [(-0.05, 0.082), (0.3, 1.7), (0.0, 0.0), (1.0, 0.0)] {
            let neg = sign_share(m, s, Direction::Negative);
            let pos = sign_share(m, s, Direction::Positive);
            assert_eq!(neg + pos, 1.0);
        }
    }

    #[test]
    fn sign_share_degenerate_sd() {
        assert_eq!(sign_share(-0.5, 0.0, Direction::Negative), 1.0);
        assert_eq!(sign_share(0.5, 0.0, Direction::Negative), 0.0);
        assert_eq!(sign_share(0.0, 0.0, Direction::Negative), 0.5);
    }

    #[test]
    fn sign_share_scale_invariance() {
        let a = sign_share(-0.033, 0.0313, Direction::Negative);
        let b = sign_share(-3.3, 3.13, Direction::Negative);
        assert_relative_eq!(a, b, epsilon = 1e-12);
        // negative sd is read through the absolute value
        let c = sign_share(-0.033, -0.0313, Direction::Negative);
        assert_relative_eq!(a, c, epsilon = 1e-15);
    }

    fn toy_scenario() -> (ModelSpec, Scenario) {
        let spec = ModelSpec::new(
            AlternativeId::AskRide,
            vec![
                UtilityTerm::random(AlternativeId::ShuttleBus, Covariate::Constant, "asc_s"),
                UtilityTerm::fixed(
                    AlternativeId::ShuttleBus,
                    Covariate::named("SHUTTLE_WAIT"),
                    "b_wait",
                ),
                UtilityTerm::fixed(AlternativeId::Tnc, Covariate::named("TNC_COST"), "b_cost"),
            ],
        )
        .unwrap();
        let mut covariates = BTreeMap::new();
        covariates.insert(
            (AlternativeId::ShuttleBus, "SHUTTLE_WAIT".to_string()),
            30.0,
        );
        covariates.insert((AlternativeId::Tnc, "TNC_COST".to_string()), 20.0);
        let scenario = Scenario {
            person: BTreeMap::new(),
            situation: ChoiceSituation {
                situation_index: 0,
                availability: Availability::all_available(),
                covariates,
                chosen: AlternativeId::ShuttleBus,
            },
        };
        (spec, scenario)
    }

    #[test]
    fn predict_uniform_when_theta_zero() {
        let (spec, scenario) = toy_scenario();
        let theta = ParameterVector::zeros(&spec);
        let p = predict_probs_with_draws(&scenario, &spec, &theta, 32, 10).unwrap();
        for pi in p {
            assert_relative_eq!(pi, 1.0 / 7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn predict_matches_draw_free_mnl_when_degenerate() {
        let (spec, scenario) = toy_scenario();
        let theta = ParameterVector::new(vec![1.4, -0.03, -0.05, 0.0]);
        let p = predict_probs_with_draws(&scenario, &spec, &theta, 64, 10).unwrap();
        // independent oracle: direct softmax over the three systematic terms
        let v_shuttle: f64 = 1.4 - 0.03 * 30.0;
        let v_tnc: f64 = -0.05 * 20.0;
        let denom = 5.0 + v_shuttle.exp() + v_tnc.exp();
        assert_relative_eq!(
            p[AlternativeId::ShuttleBus.index()],
            v_shuttle.exp() / denom,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            p[AlternativeId::Tnc.index()],
            v_tnc.exp() / denom,
            epsilon = 1e-12
        );
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn predict_respects_availability_and_extremes() {
        let (spec, mut scenario) = toy_scenario();
        scenario
            .situation
            .availability
            .set(AlternativeId::Auto, false);
        scenario
            .situation
            .covariates
            .insert((AlternativeId::ShuttleBus, "SHUTTLE_WAIT".to_string()), 1e6);
        let (_, theta_ref) = {
            let theta = ParameterVector::new(vec![3.2, -0.015, -0.016, 2.3]);
            (0, theta)
        };
        let p = predict_probs_with_draws(&scenario, &spec, &theta_ref, 128, 10).unwrap();
        assert_eq!(p[AlternativeId::Auto.index()], 0.0);
        assert!(p[AlternativeId::ShuttleBus.index()] < 1e-6);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn predicted_shares_trivial_cases() {
        let (spec, scenario) = toy_scenario();
        let theta = ParameterVector::new(vec![0.8, -0.02, -0.03, 0.9]);
        let draws = prediction_draws(&spec, 64, 10).unwrap();
        let single =
            predicted_shares(std::slice::from_ref(&scenario), &spec, &theta, &draws).unwrap();
        let direct = predict_probs(&scenario, &spec, &theta, &draws).unwrap();
        assert_eq!(single, direct);

        let doubled =
            predicted_shares(&[scenario.clone(), scenario.clone()], &spec, &theta, &draws).unwrap();
        for (a, b) in doubled.iter().zip(&direct) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }

        assert!(matches!(
            predicted_shares(&[], &spec, &theta, &draws),
            Err(AnalyticsError::EmptyScenarioSet)
        ));
    }

    #[test]
    fn sweep_monotone_in_wait_and_flat_for_zero_slope() {
        let (spec, scenario) = toy_scenario();
        let theta = ParameterVector::new(vec![1.2, -0.03, -0.04, 0.7]);
        let draws = prediction_draws(&spec, 128, 10).unwrap();
        let table = attribute_sweep(
            &scenario,
            &spec,
            &theta,
            "SHUTTLE_WAIT",
            &[0.0, 30.0, 60.0, 120.0],
            &draws,
        )
        .unwrap();
        let shuttle = AlternativeId::ShuttleBus.index();
        for w in table.rows.windows(2) {
            assert!(w[1][shuttle] < w[0][shuttle]);
        }
        for row in &table.rows {
            let sum: f64 = row.iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
        }

        // zero slope: identical rows
        let theta_flat = ParameterVector::new(vec![1.2, -0.03, 0.0, 0.7]);
        let flat = attribute_sweep(
            &scenario,
            &spec,
            &theta_flat,
            "TNC_COST",
            &[5.0, 50.0, 100.0],
            &draws,
        )
        .unwrap();
        assert_eq!(flat.rows[0], flat.rows[1]);
        assert_eq!(flat.rows[1], flat.rows[2]);

        // degenerate grid equals predict_probs
        let one =
            attribute_sweep(&scenario, &spec, &theta, "SHUTTLE_WAIT", &[30.0], &draws).unwrap();
        let direct = predict_probs(&scenario, &spec, &theta, &draws).unwrap();
        assert_eq!(one.rows[0], direct);

        assert!(matches!(
            attribute_sweep(&scenario, &spec, &theta, "NOPE", &[1.0], &draws),
            Err(AnalyticsError::UnknownCovariate(_))
        ));
    }

    #[test]
    fn share_table_export_shape() {
        let (spec, scenario) = toy_scenario();
        let (ref_spec, theta_ref) = reference_spec();
        let _ = (ref_spec, theta_ref); // reference model exercised in integration tests
        let theta = ParameterVector::new(vec![0.5, -0.01, -0.02, 0.3]);
        let draws = prediction_draws(&spec, 16, 10).unwrap();
        let table = attribute_sweep(
            &scenario,
            &spec,
            &theta,
            "SHUTTLE_WAIT",
            &[0.0, 10.0],
            &draws,
        )
        .unwrap();
        let text = table.to_delimited();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "value,ask_ride,auto,shuttle_bus,taxi,tnc,change_destination,cancel_trip"
        );
        assert_eq!(text.lines().count(), 3);
    }
}
