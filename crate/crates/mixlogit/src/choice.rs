//! Domain types for the seven-alternative transit-disruption choice problem
//! and structural validation of panel choice data.

use std::collections::BTreeMap;
use std::fmt;

/// The seven actions a disrupted transit rider can take.
///
/// `AskRide` is the base alternative: its utility carries no constant and,
/// in the reference model, no covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AlternativeId {
    AskRide,
    Auto,
    ShuttleBus,
    Taxi,
    Tnc,
    ChangeDestination,
    CancelTrip,
}

pub const N_ALTERNATIVES: usize = 7;

impl AlternativeId {
    pub const ALL: [AlternativeId; N_ALTERNATIVES] = [
        AlternativeId::AskRide,
        AlternativeId::Auto,
        AlternativeId::ShuttleBus,
        AlternativeId::Taxi,
        AlternativeId::Tnc,
        AlternativeId::ChangeDestination,
        AlternativeId::CancelTrip,
    ];

    /// The designated base alternative (zero constant).
    pub const BASE: AlternativeId = AlternativeId::AskRide;

    /// Canonical lowercase id used in data files and documents.
    pub fn as_str(self) -> &'static str {
        match self {
            AlternativeId::AskRide => "ask_ride",
            AlternativeId::Auto => "auto",
            AlternativeId::ShuttleBus => "shuttle_bus",
            AlternativeId::Taxi => "taxi",
            AlternativeId::Tnc => "tnc",
            AlternativeId::ChangeDestination => "change_destination",
            AlternativeId::CancelTrip => "cancel_trip",
        }
    }

    /// Short tag used when deriving parameter names (`b_<tag>_<covariate>`).
    pub fn short_tag(self) -> &'static str {
        match self {
            AlternativeId::AskRide => "ask",
            AlternativeId::Auto => "auto",
            AlternativeId::ShuttleBus => "shuttle",
            AlternativeId::Taxi => "taxi",
            AlternativeId::Tnc => "tnc",
            AlternativeId::ChangeDestination => "change",
            AlternativeId::CancelTrip => "cancel",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|a| a.as_str() == s)
    }

    /// Position in the canonical ordering (`ALL`).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

impl fmt::Display for AlternativeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-situation availability mask over the seven alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Availability {
    flags: [bool; N_ALTERNATIVES],
}

impl Availability {
    pub fn all_available() -> Self {
        Self {
            flags: [true; N_ALTERNATIVES],
        }
    }

    pub fn is_available(&self, alt: AlternativeId) -> bool {
        self.flags[alt.index()]
    }

    pub fn set(&mut self, alt: AlternativeId, available: bool) {
        self.flags[alt.index()] = available;
    }

    pub fn with(mut self, alt: AlternativeId, available: bool) -> Self {
        self.set(alt, available);
        self
    }

    pub fn count_available(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn as_flags(&self) -> &[bool; N_ALTERNATIVES] {
        &self.flags
    }
}

impl Default for Availability {
    fn default() -> Self {
        Self::all_available()
    }
}

/// Covariate values keyed by (alternative, covariate name).
///
/// Trip-level covariates (MANDATORY, DISTANCE, ...) are stored under every
/// alternative so that the in-memory panel mirrors the long data layout;
/// person-level covariates live on the respondent, not here.
pub type SituationCovariates = BTreeMap<(AlternativeId, String), f64>;

/// One stated-preference disruption scenario answered by a respondent.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSituation {
    pub situation_index: u32,
    pub availability: Availability,
    pub covariates: SituationCovariates,
    pub chosen: AlternativeId,
}

impl ChoiceSituation {
    /// Covariate lookup for one alternative, falling back to the
    /// person-level map. Returns `None` when the name is unknown to both.
    pub fn covariate(
        &self,
        alt: AlternativeId,
        name: &str,
        person: &BTreeMap<String, f64>,
    ) -> Option<f64> {
        self.covariates
            .get(&(alt, name.to_string()))
            .copied()
            .or_else(|| person.get(name).copied())
    }
}

/// A respondent: person-level covariates plus an ordered sequence of
/// choice situations. Person-level values are stored once and broadcast
/// into design rows, which enforces within-respondent consistency.
#[derive(Debug, Clone, PartialEq)]
pub struct Respondent {
    pub id: String,
    pub covariates: BTreeMap<String, f64>,
    pub situations: Vec<ChoiceSituation>,
}

/// The estimation sample: respondents in stable input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChoicePanel {
    pub respondents: Vec<Respondent>,
}

impl ChoicePanel {
    pub fn n_respondents(&self) -> usize {
        self.respondents.len()
    }

    /// Total number of choice situations (observations).
    pub fn n_observations(&self) -> usize {
        self.respondents.iter().map(|r| r.situations.len()).sum()
    }
}

/// Person-level covariates of the reference model. Values for these names
/// must be constant within a respondent; `read_panel` lifts them out of the
/// situation rows.
pub const PERSON_LEVEL_COVARIATES: [&str; 9] = [
    "BACHELOR",
    "FULL_TIME",
    "GRADUATE",
    "LOW_INCOME",
    "MILLENNIAL",
    "RIDESHARE",
    "SENIOR",
    "TECH_ACCESS",
    "TRUST",
];

pub fn is_person_level(name: &str) -> bool {
    PERSON_LEVEL_COVARIATES.contains(&name)
}

/// Covariates measured as waits, times, or costs must be non-negative.
/// FULL_TIME matches the TIME fragment, but its {0,1} range satisfies the
/// rule anyway.
pub fn requires_nonnegative(name: &str) -> bool {
    ["WAIT", "COST", "TIME"]
        .iter()
        .any(|frag| name.contains(frag))
}

/// Alternatives the survey always offered; only `auto` has an
/// availability rule and `ask_ride` / `change_destination` are left to the
/// data (the reference survey always offered them, but the panel format
/// does not force it).
pub const ALWAYS_AVAILABLE: [AlternativeId; 4] = [
    AlternativeId::ShuttleBus,
    AlternativeId::Tnc,
    AlternativeId::Taxi,
    AlternativeId::CancelTrip,
];

/// One violated invariant inside a panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub respondent: String,
    pub situation: Option<u32>,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.situation {
            Some(t) => write!(
                f,
                "{} [respondent {}, situation {}]: {}",
                self.rule, self.respondent, t, self.detail
            ),
            None => write!(
                f,
                "{} [respondent {}]: {}",
                self.rule, self.respondent, self.detail
            ),
        }
    }
}

/// Deterministic, ordered list of invariant violations. Violations are
/// data, not failures: an invalid panel yields a non-empty report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return writeln!(f, "panel ok: no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of [`ChoicePanel`].
///
/// The report is ordered by (respondent position, situation, rule) and the
/// function is pure: identical panels produce identical reports.
pub fn validate_panel(panel: &ChoicePanel) -> ValidationReport {
    let mut violations: Vec<(usize, Option<u32>, Violation)> = Vec::new();

    let mut seen_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (ri, resp) in panel.respondents.iter().enumerate() {
        if let Some(first) = seen_ids.get(resp.id.as_str()) {
            violations.push((
                ri,
                None,
                Violation {
                    respondent: resp.id.clone(),
                    situation: None,
                    rule: "duplicate-respondent",
                    detail: format!("respondent id also appears at position {first}"),
                },
            ));
        } else {
            seen_ids.insert(resp.id.as_str(), ri);
        }

        if resp.situations.is_empty() {
            violations.push((
                ri,
                None,
                Violation {
                    respondent: resp.id.clone(),
                    situation: None,
                    rule: "no-situations",
                    detail: "respondent has no choice situations".to_string(),
                },
            ));
        }

        for (ti, sit) in resp.situations.iter().enumerate() {
            let mut push = |rule: &'static str, detail: String| {
                violations.push((
                    ri,
                    Some(sit.situation_index),
                    Violation {
                        respondent: resp.id.clone(),
                        situation: Some(sit.situation_index),
                        rule,
                        detail,
                    },
                ));
            };

            if sit.situation_index as usize != ti {
                push(
                    "noncontiguous-situation-index",
                    format!("index {} at position {}", sit.situation_index, ti),
                );
            }
            if !sit.availability.is_available(sit.chosen) {
                push(
                    "chosen-unavailable",
                    format!("chosen alternative {} is not available", sit.chosen),
                );
            }
            if sit.availability.count_available() < 2 {
                push(
                    "too-few-available",
                    format!(
                        "{} alternative(s) available",
                        sit.availability.count_available()
                    ),
                );
            }
            for alt in ALWAYS_AVAILABLE {
                if !sit.availability.is_available(alt) {
                    push(
                        "always-available",
                        format!("{alt} must be available in every situation"),
                    );
                }
            }
            for ((alt, name), value) in &sit.covariates {
                if requires_nonnegative(name) && *value < 0.0 {
                    push("negative-covariate", format!("{name} = {value} on {alt}"));
                }
                if is_person_level(name) {
                    match resp.covariates.get(name) {
                        Some(pv) if *pv != *value => push(
                            "person-covariate-mismatch",
                            format!("{name} = {value} on {alt} but respondent carries {pv}"),
                        ),
                        _ => {}
                    }
                }
            }
        }
    }

    violations.sort_by(|a, b| (a.0, a.1, a.2.rule).cmp(&(b.0, b.1, b.2.rule)));
    ValidationReport {
        violations: violations.into_iter().map(|(_, _, v)| v).collect(),
    }
}

/// Applies the vehicle-access rule to a base availability mask: `auto` is
/// forced unavailable for respondents without vehicle access and is never
/// forced available.
pub fn apply_availability(has_vehicle_access: bool, base: &Availability) -> Availability {
    let mut out = *base;
    if !has_vehicle_access {
        out.set(AlternativeId::Auto, false);
    }
    out
}
