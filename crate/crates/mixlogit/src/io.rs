//! Bit-exact data and results formats: the long (row-per-alternative)
//! delimited panel layout, structured-text model specs and parameter
//! vectors, and the replayable estimation results document.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{
    is_person_level, AlternativeId, Availability, ChoicePanel, ChoiceSituation, Respondent,
};
use crate::draws::{DrawMeta, DrawSet};
use crate::estimator::{EstimationOptions, EstimationResult, StartStrategy, StderrMethod};
use crate::likelihood::{sim_loglik, LikelihoodError};
use crate::model::{Covariate, ModelError, ModelSpec, ParamKind, ParameterVector, UtilityTerm};

pub const REQUIRED_COLUMNS: [&str; 5] = ["respondent_id", "situation_id", "alt", "avail", "chosen"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}, column `{column}`: {reason}")]
    Parse {
        line: u64,
        column: String,
        reason: String,
    },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("respondent `{respondent}`: person-level covariate `{covariate}` varies across rows")]
    InconsistentPersonCovariate {
        respondent: String,
        covariate: String,
    },
    #[error(
        "respondent `{respondent}` situation `{situation}`: chosen alternative is unavailable"
    )]
    ChosenUnavailable {
        respondent: String,
        situation: String,
    },
    #[error("respondent `{respondent}` situation `{situation}`: {reason}")]
    BadSituation {
        respondent: String,
        situation: String,
        reason: String,
    },
    #[error("document error: {0}")]
    Document(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error("toml parse error: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("toml serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

// ---------------------------------------------------------------------------
// panel data (CSV, long layout)
// ---------------------------------------------------------------------------

struct SituationAccumulator {
    situation_id: String,
    avail: Availability,
    seen: [bool; 7],
    chosen: Option<AlternativeId>,
    chosen_unavailable: bool,
    covariates: BTreeMap<(AlternativeId, String), f64>,
}

/// Reads a long-format panel: one row per (respondent, situation,
/// alternative), stable input order, person-level covariates lifted out of
/// the rows with a consistency check.
pub fn read_panel<R: Read>(reader: R) -> Result<ChoicePanel, IoError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Vec<String> = csv_reader
        .headers()
        .map_err(|e| IoError::Document(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    for required in REQUIRED_COLUMNS {
        if !headers.iter().any(|h| h == required) {
            return Err(IoError::MissingColumn(required.to_string()));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (c_resp, c_sit, c_alt, c_avail, c_chosen) = (
        col("respondent_id"),
        col("situation_id"),
        col("alt"),
        col("avail"),
        col("chosen"),
    );
    let covariate_columns: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !REQUIRED_COLUMNS.contains(&h.as_str()))
        .map(|(i, h)| (i, h.clone()))
        .collect();

    let mut respondent_order: Vec<String> = Vec::new();
    let mut respondents: BTreeMap<String, (BTreeMap<String, f64>, Vec<SituationAccumulator>)> =
        BTreeMap::new();

    for (row_idx, record) in csv_reader.records().enumerate() {
        let line = row_idx as u64 + 2; // header is line 1
        let record = record.map_err(|e| IoError::Parse {
            line,
            column: String::new(),
            reason: e.to_string(),
        })?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_err = |column: &str, reason: String| IoError::Parse {
            line,
            column: column.to_string(),
            reason,
        };

        let respondent_id = field(c_resp).to_string();
        if respondent_id.is_empty() {
            return Err(parse_err("respondent_id", "empty".to_string()));
        }
        let situation_id = field(c_sit).to_string();
        let alt = AlternativeId::parse(field(c_alt))
            .ok_or_else(|| parse_err("alt", format!("unknown alternative `{}`", field(c_alt))))?;
        let parse_flag = |column: &str, raw: &str| -> Result<bool, IoError> {
            match raw {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_err(column, format!("expected 0 or 1, got `{other}`"))),
            }
        };
        let avail = parse_flag("avail", field(c_avail))?;
        let chosen = parse_flag("chosen", field(c_chosen))?;

        if !respondents.contains_key(&respondent_id) {
            respondent_order.push(respondent_id.clone());
            respondents.insert(respondent_id.clone(), (BTreeMap::new(), Vec::new()));
        }
        let (person, situations) = respondents.get_mut(&respondent_id).unwrap();

        if !situations.iter().any(|s| s.situation_id == situation_id) {
            situations.push(SituationAccumulator {
                situation_id: situation_id.clone(),
                avail: Availability::all_available(),
                seen: [false; 7],
                chosen: None,
                chosen_unavailable: false,
                covariates: BTreeMap::new(),
            });
        }
        let sit = situations
            .iter_mut()
            .find(|s| s.situation_id == situation_id)
            .unwrap();

        if sit.seen[alt.index()] {
            return Err(parse_err(
                "alt",
                format!("duplicate row for alternative `{alt}` in situation `{situation_id}`"),
            ));
        }
        sit.seen[alt.index()] = true;
        sit.avail.set(alt, avail);
        if chosen {
            if sit.chosen.is_some() {
                return Err(IoError::BadSituation {
                    respondent: respondent_id.clone(),
                    situation: situation_id.clone(),
                    reason: "more than one chosen alternative".to_string(),
                });
            }
            sit.chosen = Some(alt);
            if !avail {
                sit.chosen_unavailable = true;
            }
        }

        for (i, name) in &covariate_columns {
            let raw = field(*i);
            let value: f64 = raw
                .parse()
                .map_err(|_| parse_err(name, format!("expected a number, got `{raw}`")))?;
            if is_person_level(name) {
                match person.get(name.as_str()) {
                    Some(existing) if *existing != value => {
                        return Err(IoError::InconsistentPersonCovariate {
                            respondent: respondent_id.clone(),
                            covariate: name.clone(),
                        });
                    }
                    _ => {
                        person.insert(name.clone(), value);
                    }
                }
            } else {
                sit.covariates.insert((alt, name.clone()), value);
            }
        }
    }

    let mut panel = ChoicePanel::default();
    for id in respondent_order {
        let (covariates, situations) = respondents.remove(&id).unwrap();
        let mut out_sits = Vec::with_capacity(situations.len());
        for (t, acc) in situations.into_iter().enumerate() {
            if !acc.seen.iter().all(|s| *s) {
                return Err(IoError::BadSituation {
                    respondent: id.clone(),
                    situation: acc.situation_id,
                    reason: "expected one row per alternative (7 rows)".to_string(),
                });
            }
            if acc.chosen_unavailable {
                return Err(IoError::ChosenUnavailable {
                    respondent: id.clone(),
                    situation: acc.situation_id,
                });
            }
            let Some(chosen) = acc.chosen else {
                return Err(IoError::BadSituation {
                    respondent: id.clone(),
                    situation: acc.situation_id,
                    reason: "no chosen alternative".to_string(),
                });
            };
            out_sits.push(ChoiceSituation {
                situation_index: t as u32,
                availability: acc.avail,
                covariates: acc.covariates,
                chosen,
            });
        }
        panel.respondents.push(Respondent {
            id,
            covariates,
            situations: out_sits,
        });
    }
    Ok(panel)
}

pub fn read_panel_path(path: &Path) -> Result<ChoicePanel, IoError> {
    read_panel(fs::File::open(path)?)
}

/// Writes a panel in the long layout: the five required columns then every
/// covariate column in sorted order. Every cell must be resolvable from
/// the situation's per-alternative map or the respondent's person-level
/// map; holes are an error rather than silent zeros.
pub fn write_panel<W: Write>(panel: &ChoicePanel, writer: W) -> Result<(), IoError> {
    let mut names: Vec<String> = Vec::new();
    for resp in &panel.respondents {
        for name in resp.covariates.keys() {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
        for sit in &resp.situations {
            for (_, name) in sit.covariates.keys() {
                if !names.contains(name) {
                    names.push(name.clone());
                }
            }
        }
    }
    names.sort();

    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    for n in &names {
        header.push(n);
    }
    w.write_record(&header)
        .map_err(|e| IoError::Document(e.to_string()))?;

    for resp in &panel.respondents {
        for sit in &resp.situations {
            for alt in AlternativeId::ALL {
                let mut record: Vec<String> = vec![
                    resp.id.clone(),
                    sit.situation_index.to_string(),
                    alt.as_str().to_string(),
                    if sit.availability.is_available(alt) {
                        "1"
                    } else {
                        "0"
                    }
                    .to_string(),
                    if sit.chosen == alt { "1" } else { "0" }.to_string(),
                ];
                for name in &names {
                    let value = sit
                        .covariates
                        .get(&(alt, name.clone()))
                        .or_else(|| resp.covariates.get(name))
                        .ok_or_else(|| IoError::Document(format!(
                            "covariate `{name}` has no value for respondent `{}` situation {} alternative {alt}",
                            resp.id, sit.situation_index
                        )))?;
                    record.push(format!("{value}"));
                }
                w.write_record(&record)
                    .map_err(|e| IoError::Document(e.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Atomic file write: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_panel_path(panel: &ChoicePanel, path: &Path) -> Result<(), IoError> {
    let mut buf = Vec::new();
    write_panel(panel, &mut buf)?;
    write_atomic(path, &buf)
}

// ---------------------------------------------------------------------------
// model spec and parameter documents (TOML)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDoc {
    pub base_alternative: String,
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermDoc {
    pub alternative: String,
    pub covariate: String,
    pub parameter: String,
    pub kind: String,
}

impl SpecDoc {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        Self {
            base_alternative: spec.base_alternative().as_str().to_string(),
            terms: spec
                .terms()
                .iter()
                .map(|t| TermDoc {
                    alternative: t.alternative.as_str().to_string(),
                    covariate: t.covariate.as_str().to_string(),
                    parameter: t.parameter.clone(),
                    kind: match t.kind {
                        ParamKind::Fixed => "fixed".to_string(),
                        ParamKind::RandomNormal => "random_normal".to_string(),
                    },
                })
                .collect(),
        }
    }

    pub fn to_spec(&self) -> Result<ModelSpec, IoError> {
        let base = AlternativeId::parse(&self.base_alternative).ok_or_else(|| {
            IoError::Document(format!(
                "unknown base alternative `{}`",
                self.base_alternative
            ))
        })?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let alternative = AlternativeId::parse(&t.alternative).ok_or_else(|| {
                IoError::Document(format!("unknown alternative `{}`", t.alternative))
            })?;
            let covariate = if t.covariate == "CONSTANT" {
                Covariate::Constant
            } else {
                Covariate::Named(t.covariate.clone())
            };
            let kind = match t.kind.as_str() {
                "fixed" => ParamKind::Fixed,
                "random_normal" => ParamKind::RandomNormal,
                other => {
                    return Err(IoError::Document(format!(
                        "unknown parameter kind `{other}` (expected fixed|random_normal)"
                    )))
                }
            };
            terms.push(UtilityTerm {
                alternative,
                covariate,
                parameter: t.parameter.clone(),
                kind,
            });
        }
        Ok(ModelSpec::new(base, terms)?)
    }
}

pub fn write_spec(spec: &ModelSpec) -> Result<String, IoError> {
    Ok(toml::to_string(&SpecDoc::from_spec(spec))?)
}

pub fn read_spec(text: &str) -> Result<ModelSpec, IoError> {
    let doc: SpecDoc = toml::from_str(text)?;
    doc.to_spec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ThetaDoc {
    theta: BTreeMap<String, f64>,
}

/// Parameter vector document: a `[theta]` table keyed by slot name, so the
/// file is readable and order-independent; the spec fixes the layout.
pub fn write_theta(spec: &ModelSpec, theta: &ParameterVector) -> Result<String, IoError> {
    theta.check_dims(spec)?;
    let map = spec
        .slot_names()
        .into_iter()
        .zip(theta.values().iter().copied())
        .collect();
    Ok(toml::to_string(&ThetaDoc { theta: map })?)
}

pub fn read_theta(text: &str, spec: &ModelSpec) -> Result<ParameterVector, IoError> {
    let doc: ThetaDoc = toml::from_str(text)?;
    let names = spec.slot_names();
    let mut values = Vec::with_capacity(names.len());
    for name in &names {
        let v = doc.theta.get(name).ok_or_else(|| {
            IoError::Document(format!("parameter `{name}` missing from theta document"))
        })?;
        values.push(*v);
    }
    for key in doc.theta.keys() {
        if !names.contains(key) {
            return Err(IoError::Document(format!(
                "theta document names `{key}`, which is not a slot of this spec"
            )));
        }
    }
    Ok(ParameterVector::new(values))
}

// ---------------------------------------------------------------------------
// results document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptionsDoc {
    pub draws: usize,
    pub discard: u64,
    pub seed: u64,
    pub scramble: bool,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub stderr_method: String,
    pub start: String,
}

impl OptionsDoc {
    pub fn from_options(options: &EstimationOptions) -> Self {
        Self {
            draws: options.n_draws,
            discard: options.discard,
            seed: options.seed,
            scramble: options.scramble,
            max_iterations: options.max_iterations,
            gradient_tolerance: options.gradient_tolerance,
            step_tolerance: options.step_tolerance,
            stderr_method: match options.stderr_method {
                StderrMethod::Bhhh => "bhhh".to_string(),
                StderrMethod::NumericalHessian => "numerical_hessian".to_string(),
            },
            start: match options.start {
                StartStrategy::ZeroStart => "zero".to_string(),
                StartStrategy::MnlWarmStart => "mnl_warm_start".to_string(),
            },
        }
    }

    pub fn to_options(&self) -> Result<EstimationOptions, IoError> {
        Ok(EstimationOptions {
            n_draws: self.draws,
            discard: self.discard,
            seed: self.seed,
            scramble: self.scramble,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            step_tolerance: self.step_tolerance,
            stderr_method: match self.stderr_method.as_str() {
                "bhhh" => StderrMethod::Bhhh,
                "numerical_hessian" => StderrMethod::NumericalHessian,
                other => {
                    return Err(IoError::Document(format!(
                        "unknown stderr method `{other}`"
                    )))
                }
            },
            start: match self.start.as_str() {
                "zero" => StartStrategy::ZeroStart,
                "mnl_warm_start" => StartStrategy::MnlWarmStart,
                other => {
                    return Err(IoError::Document(format!(
                        "unknown start strategy `{other}`"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterRow {
    pub name: String,
    pub kind: String,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDoc {
    pub ll_final: f64,
    pub ll_null_equal_shares: f64,
    pub ll_null_constants: f64,
    pub ll_mnl: f64,
    pub rho2_equal_shares: f64,
    pub rho2_constants: f64,
    pub rho2_mnl: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_respondents: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceDoc {
    pub converged: bool,
    pub iterations: usize,
    pub grad_max_norm: f64,
}

/// Everything needed to audit and replay an estimation run. Floats are
/// serialized in shortest round-trip form, so re-loading a document and
/// re-evaluating the likelihood at its estimates reproduces `ll_final`
/// bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub format: String,
    pub spec_hash: String,
    pub options: OptionsDoc,
    pub spec: SpecDoc,
    pub parameters: Vec<ParameterRow>,
    pub fit: FitDoc,
    pub convergence: ConvergenceDoc,
    pub draw_meta: DrawMeta,
}

pub const RESULTS_FORMAT: &str = "mixlogit-results-v1";

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Stable hash of the canonical spec serialization, embedded in results
/// documents so replays can detect spec drift.
pub fn spec_hash(spec: &ModelSpec) -> Result<String, IoError> {
    Ok(format!(
        "fnv1a64:{:016x}",
        fnv1a64(write_spec(spec)?.as_bytes())
    ))
}

pub fn results_document(
    result: &EstimationResult,
    spec: &ModelSpec,
    options: &EstimationOptions,
) -> Result<ResultsDocument, IoError> {
    let names = spec.slot_names();
    let n_terms = spec.n_terms();
    let parameters = names
        .iter()
        .enumerate()
        .map(|(i, name)| ParameterRow {
            name: name.clone(),
            kind: if i >= n_terms {
                "random_sd".to_string()
            } else {
                match spec.terms()[i].kind {
                    ParamKind::Fixed => "fixed".to_string(),
                    ParamKind::RandomNormal => "random_mean".to_string(),
                }
            },
            estimate: result.theta_hat.values()[i],
            std_error: result.std_errors[i],
            p_value: result.p_values[i],
        })
        .collect();

    Ok(ResultsDocument {
        format: RESULTS_FORMAT.to_string(),
        spec_hash: spec_hash(spec)?,
        options: OptionsDoc::from_options(options),
        spec: SpecDoc::from_spec(spec),
        parameters,
        fit: FitDoc {
            ll_final: result.ll_final,
            ll_null_equal_shares: result.ll_null_equal_shares,
            ll_null_constants: result.ll_null_constants,
            ll_mnl: result.ll_mnl,
            rho2_equal_shares: result.rho2_equal_shares,
            rho2_constants: result.rho2_constants,
            rho2_mnl: result.rho2_mnl,
            aic: result.aic,
            bic: result.bic,
            n_obs: result.n_obs,
            n_respondents: result.n_respondents,
        },
        convergence: ConvergenceDoc {
            converged: result.converged,
            iterations: result.iterations,
            grad_max_norm: result.grad_max_norm,
        },
        draw_meta: result.draw_meta.clone(),
    })
}

pub fn write_results(doc: &ResultsDocument) -> Result<String, IoError> {
    Ok(toml::to_string(doc)?)
}

pub fn read_results(text: &str) -> Result<ResultsDocument, IoError> {
    let doc: ResultsDocument = toml::from_str(text)?;
    if doc.format != RESULTS_FORMAT {
        return Err(IoError::Document(format!(
            "unsupported results format `{}`",
            doc.format
        )));
    }
    Ok(doc)
}

impl ResultsDocument {
    pub fn theta(&self) -> ParameterVector {
        ParameterVector::new(self.parameters.iter().map(|p| p.estimate).collect())
    }

    /// Re-evaluates the simulated log-likelihood at the document's
    /// estimates with its echoed draw settings on `panel`. A faithful
    /// document reproduces `fit.ll_final` to well under 1e-9.
    pub fn replay_loglik(&self, panel: &ChoicePanel) -> Result<f64, IoError> {
        let spec = self.spec.to_spec()?;
        if spec_hash(&spec)? != self.spec_hash {
            return Err(IoError::Document(
                "spec hash mismatch: document was edited".to_string(),
            ));
        }
        let theta = self.theta();
        let n_draws = if spec.n_random() == 0 {
            1
        } else {
            self.options.draws
        };
        let draws = match self.draw_meta.scramble_seed {
            Some(seed) => DrawSet::halton_normal_scrambled(
                panel.n_respondents(),
                n_draws,
                spec.n_random(),
                self.draw_meta.discard,
                seed,
            ),
            None => DrawSet::halton_normal(
                panel.n_respondents(),
                n_draws,
                spec.n_random(),
                self.draw_meta.discard,
            ),
        }
        .map_err(|e| IoError::Document(e.to_string()))?;
        Ok(sim_loglik(panel, &spec, &theta, &draws)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_spec;
    use crate::scenario::{synthesize_panel, GeneratorConfig};

    fn small_panel() -> ChoicePanel {
        let (spec, _) = simple_spec_theta();
        let theta = ParameterVector::new(vec![0.6, -0.02]);
        synthesize_panel(8, 2, &spec, &theta, 42, &GeneratorConfig::default()).unwrap()
    }

    fn simple_spec_theta() -> (ModelSpec, ParameterVector) {
        let spec = ModelSpec::new(
            AlternativeId::AskRide,
            vec![
                UtilityTerm::fixed(
                    AlternativeId::ShuttleBus,
                    Covariate::Constant,
                    "asc_shuttle",
                ),
                UtilityTerm::fixed(
                    AlternativeId::ShuttleBus,
                    Covariate::named("SHUTTLE_WAIT"),
                    "b_shuttle_wait",
                ),
            ],
        )
        .unwrap();
        let theta = ParameterVector::new(vec![0.6, -0.02]);
        (spec, theta)
    }

    #[test]
    fn panel_round_trip_is_identity() {
        let panel = small_panel();
        let mut buf = Vec::new();
        write_panel(&panel, &mut buf).unwrap();
        let back = read_panel(buf.as_slice()).unwrap();
        assert_eq!(panel, back);
    }

    #[test]
    fn minimal_single_situation_file() {
        let csv = "\
respondent_id,situation_id,alt,avail,chosen,SHUTTLE_WAIT
a,0,ask_ride,1,0,30
a,0,auto,0,0,30
a,0,shuttle_bus,1,1,30
a,0,taxi,1,0,30
a,0,tnc,1,0,30
a,0,change_destination,1,0,30
a,0,cancel_trip,1,0,30
";
        let panel = read_panel(csv.as_bytes()).unwrap();
        assert_eq!(panel.n_respondents(), 1);
        assert_eq!(panel.n_observations(), 1);
        let sit = &panel.respondents[0].situations[0];
        assert_eq!(sit.chosen, AlternativeId::ShuttleBus);
        assert!(!sit.availability.is_available(AlternativeId::Auto));
        assert_eq!(
            sit.covariates[&(AlternativeId::Taxi, "SHUTTLE_WAIT".to_string())],
            30.0
        );
    }

    #[test]
    fn unknown_alternative_is_a_parse_error_with_line() {
        let csv = "\
respondent_id,situation_id,alt,avail,chosen
a,0,bicycle,1,1
";
        match read_panel(csv.as_bytes()) {
            Err(IoError::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, "alt");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn chosen_unavailable_is_reported() {
        let csv = "\
respondent_id,situation_id,alt,avail,chosen
a,0,ask_ride,1,0
a,0,auto,0,1
a,0,shuttle_bus,1,0
a,0,taxi,1,0
a,0,tnc,1,0
a,0,change_destination,1,0
a,0,cancel_trip,1,0
";
        assert!(matches!(
            read_panel(csv.as_bytes()),
            Err(IoError::ChosenUnavailable { .. })
        ));
    }

    #[test]
    fn inconsistent_person_covariate_is_reported() {
        let mut rows = String::from("respondent_id,situation_id,alt,avail,chosen,MILLENNIAL\n");
        for (alt, flag) in AlternativeId::ALL.iter().zip([1, 0, 0, 0, 0, 0, 0]) {
            rows.push_str(&format!("a,0,{},1,{},1\n", alt.as_str(), flag));
        }
        for (alt, flag) in AlternativeId::ALL.iter().zip([1, 0, 0, 0, 0, 0, 0]) {
            rows.push_str(&format!("a,1,{},1,{},0\n", alt.as_str(), flag));
        }
        assert!(matches!(
            read_panel(rows.as_bytes()),
            Err(IoError::InconsistentPersonCovariate { .. })
        ));
    }

    #[test]
    fn missing_covariate_cell_is_an_error() {
        let csv = "\
respondent_id,situation_id,alt,avail,chosen,SHUTTLE_WAIT
a,0,ask_ride,1,0,
a,0,auto,1,0,30
a,0,shuttle_bus,1,1,30
a,0,taxi,1,0,30
a,0,tnc,1,0,30
a,0,change_destination,1,0,30
a,0,cancel_trip,1,0,30
";
        assert!(matches!(
            read_panel(csv.as_bytes()),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn spec_document_round_trip() {
        let (spec, theta) = reference_spec();
        let text = write_spec(&spec).unwrap();
        let back = read_spec(&text).unwrap();
        assert_eq!(spec, back);

        let theta_text = write_theta(&spec, &theta).unwrap();
        let theta_back = read_theta(&theta_text, &spec).unwrap();
        assert_eq!(theta, theta_back);
    }

    #[test]
    fn theta_document_must_cover_every_slot() {
        let (spec, _) = simple_spec_theta();
        let err = read_theta("[theta]\nasc_shuttle = 1.0\n", &spec).unwrap_err();
        assert!(matches!(err, IoError::Document(_)));
        let err = read_theta(
            "[theta]\nasc_shuttle = 1.0\nb_shuttle_wait = 0.0\nextra = 2.0\n",
            &spec,
        )
        .unwrap_err();
        assert!(matches!(err, IoError::Document(_)));
    }

    #[test]
    fn results_document_round_trip_and_replay() {
        use crate::estimator::estimate;
        let (spec, _) = simple_spec_theta();
        let panel = small_panel();
        let options = EstimationOptions {
            max_iterations: 200,
            ..Default::default()
        };
        let result = estimate(&panel, &spec, &options).unwrap();
        let doc = results_document(&result, &spec, &options).unwrap();
        let text = write_results(&doc).unwrap();
        let back = read_results(&text).unwrap();
        let replayed = back.replay_loglik(&panel).unwrap();
        assert!(
            (replayed - result.ll_final).abs() < 1e-9,
            "replay {replayed} vs {}",
            result.ll_final
        );
        // serialization is deterministic
        assert_eq!(text, write_results(&back).unwrap());
    }
}
