//! Declarative utility specification: which covariate enters which
//! alternative's utility, fixed vs. normally distributed random parameters,
//! and the reference transit-disruption model with its published estimates.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::choice::{AlternativeId, ChoiceSituation};

/// What multiplies a parameter inside one utility term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Covariate {
    /// Alternative-specific constant; contributes x = 1.
    Constant,
    /// Named data column (the published variable names are canonical for
    /// the reference model).
    Named(String),
}

impl Covariate {
    pub fn named(name: &str) -> Self {
        Covariate::Named(name.to_string())
    }

    pub fn as_str(&self) -> &str {
        match self {
            Covariate::Constant => "CONSTANT",
            Covariate::Named(n) => n,
        }
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Fixed,
    /// Coefficient varies across respondents as N(mean, sd²); contributes a
    /// mean slot and a standard-deviation slot to the parameter vector.
    RandomNormal,
}

/// One additive term of one alternative's systematic utility.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTerm {
    pub alternative: AlternativeId,
    pub covariate: Covariate,
    pub parameter: String,
    pub kind: ParamKind,
}

impl UtilityTerm {
    pub fn fixed(alt: AlternativeId, covariate: Covariate, parameter: &str) -> Self {
        Self {
            alternative: alt,
            covariate,
            parameter: parameter.to_string(),
            kind: ParamKind::Fixed,
        }
    }

    pub fn random(alt: AlternativeId, covariate: Covariate, parameter: &str) -> Self {
        Self {
            alternative: alt,
            covariate,
            parameter: parameter.to_string(),
            kind: ParamKind::RandomNormal,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("base alternative `{0}` must not carry a CONSTANT term")]
    ConstantOnBase(AlternativeId),
    #[error("covariate `{name}` missing for respondent `{respondent}` situation {situation}")]
    MissingCovariate {
        name: String,
        respondent: String,
        situation: u32,
    },
    #[error("parameter vector has {got} values but the spec defines {expected} slots")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown parameter `{0}` for this spec")]
    UnknownParameter(String),
}

/// The utility specification. Terms are ordered; the induced parameter
/// ordering is all means in term order followed by all standard deviations
/// in term order, so a spec determines its vector layout exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    base_alternative: AlternativeId,
    terms: Vec<UtilityTerm>,
    /// term index -> rank among RandomNormal terms, for sd slot lookup
    random_rank: Vec<Option<usize>>,
    n_random: usize,
}

impl ModelSpec {
    pub fn new(
        base_alternative: AlternativeId,
        terms: Vec<UtilityTerm>,
    ) -> Result<Self, ModelError> {
        let mut seen = BTreeMap::new();
        for term in &terms {
            if seen.insert(term.parameter.clone(), ()).is_some() {
                return Err(ModelError::DuplicateParameter(term.parameter.clone()));
            }
            if term.alternative == base_alternative && term.covariate == Covariate::Constant {
                return Err(ModelError::ConstantOnBase(base_alternative));
            }
        }
        let mut random_rank = Vec::with_capacity(terms.len());
        let mut n_random = 0;
        for term in &terms {
            match term.kind {
                ParamKind::RandomNormal => {
                    random_rank.push(Some(n_random));
                    n_random += 1;
                }
                ParamKind::Fixed => random_rank.push(None),
            }
        }
        Ok(Self {
            base_alternative,
            terms,
            random_rank,
            n_random,
        })
    }

    pub fn base_alternative(&self) -> AlternativeId {
        self.base_alternative
    }

    pub fn terms(&self) -> &[UtilityTerm] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Number of RandomNormal terms = number of draw dimensions.
    pub fn n_random(&self) -> usize {
        self.n_random
    }

    /// Total scalar slots: one mean per term plus one sd per random term.
    pub fn n_slots(&self) -> usize {
        self.terms.len() + self.n_random
    }

    /// Rank of a term among the RandomNormal terms, when it is one.
    pub fn random_rank(&self, term_idx: usize) -> Option<usize> {
        self.random_rank[term_idx]
    }

    /// Slot index of a random term's standard deviation.
    pub fn sd_slot(&self, term_idx: usize) -> Option<usize> {
        self.random_rank[term_idx].map(|r| self.terms.len() + r)
    }

    /// Ordered slot names: parameter names for means, `sd_<name>` for
    /// standard deviations.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.terms.iter().map(|t| t.parameter.clone()).collect();
        names.extend(
            self.terms
                .iter()
                .filter(|t| t.kind == ParamKind::RandomNormal)
                .map(|t| format!("sd_{}", t.parameter)),
        );
        names
    }

    /// All-fixed copy of this spec (same terms and names, sds dropped).
    /// Used for the restricted MNL fit and warm starts.
    pub fn to_fixed(&self) -> ModelSpec {
        let terms = self
            .terms
            .iter()
            .map(|t| UtilityTerm {
                kind: ParamKind::Fixed,
                ..t.clone()
            })
            .collect();
        ModelSpec::new(self.base_alternative, terms).expect("fixed copy of a valid spec is valid")
    }

    /// True when `name` appears as some term's covariate.
    pub fn references_covariate(&self, name: &str) -> bool {
        self.terms
            .iter()
            .any(|t| matches!(&t.covariate, Covariate::Named(n) if n == name))
    }

    /// Alternatives whose utility uses covariate `name`.
    pub fn alternatives_using(&self, name: &str) -> Vec<AlternativeId> {
        let mut alts: Vec<AlternativeId> = self
            .terms
            .iter()
            .filter(|t| matches!(&t.covariate, Covariate::Named(n) if n == name))
            .map(|t| t.alternative)
            .collect();
        alts.dedup();
        alts
    }
}

/// Flat ordered vector of parameter values matching a spec's slot layout.
/// Standard-deviation slots are unconstrained; they are interpreted through
/// the absolute value wherever a dispersion is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            values: vec![0.0; spec.n_slots()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn check_dims(&self, spec: &ModelSpec) -> Result<(), ModelError> {
        if self.values.len() != spec.n_slots() {
            return Err(ModelError::DimensionMismatch {
                expected: spec.n_slots(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// (means, sds) split according to the spec layout.
    pub fn split<'a>(&'a self, spec: &ModelSpec) -> (&'a [f64], &'a [f64]) {
        self.values.split_at(spec.n_terms())
    }

    pub fn get(&self, spec: &ModelSpec, slot_name: &str) -> Result<f64, ModelError> {
        let names = spec.slot_names();
        names
            .iter()
            .position(|n| n == slot_name)
            .map(|i| self.values[i])
            .ok_or_else(|| ModelError::UnknownParameter(slot_name.to_string()))
    }
}

/// Sparse design row for one alternative in one situation: entries
/// `(term index, covariate value)` over the mean slots. Terms of other
/// alternatives contribute nothing; CONSTANT contributes 1.
pub fn design_row(
    situation: &ChoiceSituation,
    person_covariates: &BTreeMap<String, f64>,
    alt: AlternativeId,
    spec: &ModelSpec,
    respondent_id: &str,
) -> Result<Vec<(usize, f64)>, ModelError> {
    let mut row = Vec::new();
    for (k, term) in spec.terms().iter().enumerate() {
        if term.alternative != alt {
            continue;
        }
        let x = match &term.covariate {
            Covariate::Constant => 1.0,
            Covariate::Named(name) => situation
                .covariate(alt, name, person_covariates)
                .ok_or_else(|| ModelError::MissingCovariate {
                    name: name.clone(),
                    respondent: respondent_id.to_string(),
                    situation: situation.situation_index,
                })?,
        };
        row.push((k, x));
    }
    Ok(row)
}

/// Derives the canonical parameter name for a covariate entering an
/// alternative's utility: `b_<tag>_<covariate>`, dropping a leading repeat
/// of the alternative tag (TNC_COST on tnc becomes `b_tnc_cost`).
pub fn parameter_name(alt: AlternativeId, covariate: &str) -> String {
    let tag = alt.short_tag();
    let lower = covariate.to_lowercase();
    let trimmed = lower
        .strip_prefix(&format!("{tag}_"))
        .unwrap_or(lower.as_str());
    format!("b_{tag}_{trimmed}")
}

fn asc_name(alt: AlternativeId) -> String {
    format!("asc_{}", alt.as_str())
}

// -0.318 trips clippy's 1/pi detector; it is the published estimate
#[allow(clippy::approx_constant)]
/// The published transit-disruption model: six random alternative-specific
/// constants (ask-for-ride base), the service-specific shuttle wait slopes
/// and the change-destination RIDESHARE slope as random parameters, and the
/// remaining covariate slopes fixed. Returns the spec together with the
/// published point estimates.
pub fn reference_spec() -> (ModelSpec, ParameterVector) {
    use AlternativeId::*;
    use Covariate::Constant as C;

    // (alt, covariate, kind, mean, sd)
    let rows: Vec<(AlternativeId, Covariate, f64, Option<f64>)> = vec![
        (Auto, C, -0.318, Some(3.035)),
        (ShuttleBus, C, 3.210, Some(2.344)),
        (Tnc, C, 0.258, Some(1.924)),
        (Taxi, C, 0.787, Some(1.810)),
        (ChangeDestination, C, -3.008, Some(3.849)),
        (CancelTrip, C, -1.003, Some(3.958)),
        (Auto, Covariate::named("LONGDIST_MNDT"), 1.594, None),
        (ShuttleBus, Covariate::named("SHUTTLE_WAIT"), -0.015, None),
        (ShuttleBus, Covariate::named("ALONE"), 0.220, None),
        (
            ShuttleBus,
            Covariate::named("SHUTTLE_WAIT_METRA"),
            -0.033,
            Some(0.0313),
        ),
        (
            ShuttleBus,
            Covariate::named("SHUTTLE_WAIT_CTA_RAIL"),
            -0.050,
            Some(0.082),
        ),
        (ShuttleBus, Covariate::named("TRUST"), 0.607, None),
        (ShuttleBus, Covariate::named("RET_SHOP"), -0.324, None),
        (ShuttleBus, Covariate::named("NDNSTY_PED_L10"), 0.907, None),
        (ShuttleBus, Covariate::named("PACE"), 0.587, None),
        (Tnc, Covariate::named("MILLENNIAL"), 1.170, None),
        (Tnc, Covariate::named("SENIOR"), -2.161, None),
        (Tnc, Covariate::named("BACHELOR"), 0.608, None),
        (Tnc, Covariate::named("GRADUATE"), 0.920, None),
        (Tnc, Covariate::named("TNC_WAIT"), -0.113, None),
        (Tnc, Covariate::named("TNC_COST"), -0.016, None),
        (Tnc, Covariate::named("DRIVE_TIME"), -0.017, None),
        (Tnc, Covariate::named("TECH_ACCESS"), 1.106, None),
        (Tnc, Covariate::named("RIDESHARE"), 1.019, None),
        (Taxi, Covariate::named("SENIOR"), -0.887, None),
        (Taxi, Covariate::named("FULL_TIME"), 0.464, None),
        (Taxi, Covariate::named("LOW_INCOME"), -0.708, None),
        (Taxi, Covariate::named("DRIVE_TIME"), -0.023, None),
        (Taxi, Covariate::named("TAXI_WAIT"), -0.032, None),
        (Taxi, Covariate::named("RIDESHARE"), 0.711, None),
        (
            ChangeDestination,
            Covariate::named("RIDESHARE"),
            -1.596,
            Some(3.101),
        ),
        (CancelTrip, Covariate::named("SENIOR"), 0.981, None),
        (CancelTrip, Covariate::named("MANDATORY"), -0.751, None),
    ];

    let mut terms = Vec::with_capacity(rows.len());
    let mut means = Vec::with_capacity(rows.len());
    let mut sds = Vec::new();
    for (alt, cov, mean, sd) in rows {
        let name = match &cov {
            Covariate::Constant => asc_name(alt),
            Covariate::Named(n) => parameter_name(alt, n),
        };
        let kind = if sd.is_some() {
            ParamKind::RandomNormal
        } else {
            ParamKind::Fixed
        };
        terms.push(UtilityTerm {
            alternative: alt,
            covariate: cov,
            parameter: name,
            kind,
        });
        means.push(mean);
        if let Some(s) = sd {
            sds.push(s);
        }
    }

    let spec = ModelSpec::new(AlternativeId::BASE, terms).expect("reference spec is valid");
    means.extend(sds);
    let theta = ParameterVector::new(means);
    debug_assert_eq!(theta.len(), spec.n_slots());
    (spec, theta)
}
