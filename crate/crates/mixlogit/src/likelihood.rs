//! Simulated likelihood for the panel mixed logit: per-draw logit kernels,
//! per-respondent products over choice situations, averages over draws, and
//! the analytic gradient used by the quasi-Newton search.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::choice::{AlternativeId, ChoicePanel, ChoiceSituation, Respondent, N_ALTERNATIVES};
use crate::draws::DrawSet;
use crate::model::{design_row, ModelError, ModelSpec, ParamKind, ParameterVector};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Probabilities this small are floored before taking logs so the
/// objective stays finite during early optimizer steps.
pub const PROB_FLOOR: f64 = 1e-300;

/// Products over more situations than this are accumulated in log space;
/// the survey design has four situations per respondent, so the direct
/// product is the common path.
const LOG_SPACE_THRESHOLD: usize = 20;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no available alternative in situation")]
    NoAvailableAlternative,
    #[error("draw set has {got} dimensions but the spec has {expected} random parameters")]
    DrawDimensionMismatch { expected: usize, got: usize },
    #[error("draw set covers {got} respondents but the panel has {expected}")]
    DrawRespondentMismatch { expected: usize, got: usize },
}

/// Sign convention for |sd| at zero: the derivative from the right, so a
/// standard-deviation slot can move off an all-zero start.
#[inline]
fn sd_sign(sd: f64) -> f64 {
    if sd < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Logit probabilities over an arbitrary alternative set, computed with a
/// max shift so utilities up to +-700 cannot overflow. Unavailable
/// alternatives receive exactly zero and are excluded from normalization.
pub fn logit_probs(utilities: &[f64], availability: &[bool]) -> Result<Vec<f64>, LikelihoodError> {
    assert_eq!(utilities.len(), availability.len());
    let mut max_v = f64::NEG_INFINITY;
    for (v, avail) in utilities.iter().zip(availability) {
        if *avail && *v > max_v {
            max_v = *v;
        }
    }
    if max_v == f64::NEG_INFINITY {
        return Err(LikelihoodError::NoAvailableAlternative);
    }
    let mut probs = vec![0.0; utilities.len()];
    let mut denom = 0.0;
    for (i, (v, avail)) in utilities.iter().zip(availability).enumerate() {
        if *avail {
            let e = (v - max_v).exp();
            probs[i] = e;
            denom += e;
        }
    }
    for p in &mut probs {
        *p /= denom;
    }
    Ok(probs)
}

/// Systematic utility of one alternative under one draw row:
/// sum over the alternative's terms of (mean + |sd| z) x for random terms
/// and mean x for fixed terms.
pub fn systematic_utility(
    situation: &ChoiceSituation,
    person_covariates: &BTreeMap<String, f64>,
    alt: AlternativeId,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draw_row: &[f64],
) -> Result<f64, LikelihoodError> {
    theta.check_dims(spec)?;
    let (means, sds) = theta.split(spec);
    let row = design_row(situation, person_covariates, alt, spec, "")?;
    let mut v = 0.0;
    for (k, x) in row {
        let coef = match spec.random_rank(k) {
            Some(rank) => means[k] + sds[rank].abs() * draw_row[rank],
            None => means[k],
        };
        v += coef * x;
    }
    Ok(v)
}

/// Design data resolved against a spec once, so repeated likelihood
/// evaluations skip covariate lookups. Rows exist for available
/// alternatives only.
pub struct PreparedSituation {
    avail: [bool; N_ALTERNATIVES],
    chosen: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

pub struct PreparedRespondent {
    situations: Vec<PreparedSituation>,
}

pub struct PreparedPanel {
    respondents: Vec<PreparedRespondent>,
    n_random: usize,
    n_observations: usize,
}

impl PreparedPanel {
    pub fn n_respondents(&self) -> usize {
        self.respondents.len()
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }
}

/// Resolves every (situation, available alternative) design row of the
/// panel against `spec`.
pub fn prepare(panel: &ChoicePanel, spec: &ModelSpec) -> Result<PreparedPanel, LikelihoodError> {
    let mut respondents = Vec::with_capacity(panel.respondents.len());
    let mut n_observations = 0;
    for resp in &panel.respondents {
        let mut situations = Vec::with_capacity(resp.situations.len());
        for sit in &resp.situations {
            let mut rows = Vec::with_capacity(N_ALTERNATIVES);
            for alt in AlternativeId::ALL {
                if sit.availability.is_available(alt) {
                    let row = design_row(sit, &resp.covariates, alt, spec, &resp.id)?;
                    rows.push(row.into_iter().map(|(k, x)| (k as u32, x)).collect());
                } else {
                    rows.push(Vec::new());
                }
            }
            if sit.availability.count_available() == 0 {
                return Err(LikelihoodError::NoAvailableAlternative);
            }
            situations.push(PreparedSituation {
                avail: *sit.availability.as_flags(),
                chosen: sit.chosen.index(),
                rows,
            });
            n_observations += 1;
        }
        respondents.push(PreparedRespondent { situations });
    }
    Ok(PreparedPanel {
        respondents,
        n_random: spec.n_random(),
        n_observations,
    })
}

fn check_draws(prep: &PreparedPanel, draws: &DrawSet) -> Result<(), LikelihoodError> {
    if draws.dims() != prep.n_random {
        return Err(LikelihoodError::DrawDimensionMismatch {
            expected: prep.n_random,
            got: draws.dims(),
        });
    }
    if draws.n_respondents() < prep.respondents.len() {
        return Err(LikelihoodError::DrawRespondentMismatch {
            expected: prep.respondents.len(),
            got: draws.n_respondents(),
        });
    }
    Ok(())
}

/// Per-draw coefficient vector: fixed entries are the means, random entries
/// are mean + |sd| z.
#[inline]
fn fill_coefs(
    coefs: &mut [f64],
    means: &[f64],
    sds: &[f64],
    random_terms: &[(usize, usize)],
    z: &[f64],
) {
    coefs.copy_from_slice(means);
    for &(term, rank) in random_terms {
        coefs[term] = means[term] + sds[rank].abs() * z[rank];
    }
}

#[inline]
fn situation_probs(
    sit: &PreparedSituation,
    coefs: &[f64],
    probs: &mut [f64; N_ALTERNATIVES],
) -> f64 {
    let mut utils = [f64::NEG_INFINITY; N_ALTERNATIVES];
    let mut max_v = f64::NEG_INFINITY;
    for (j, util) in utils.iter_mut().enumerate() {
        if sit.avail[j] {
            let mut v = 0.0;
            for &(k, x) in &sit.rows[j] {
                v += coefs[k as usize] * x;
            }
            *util = v;
            if v > max_v {
                max_v = v;
            }
        }
    }
    let mut denom = 0.0;
    for j in 0..N_ALTERNATIVES {
        probs[j] = if sit.avail[j] {
            let e = (utils[j] - max_v).exp();
            denom += e;
            e
        } else {
            0.0
        };
    }
    for p in probs.iter_mut() {
        *p /= denom;
    }
    probs[sit.chosen]
}

struct RespondentEval {
    log_prob: f64,
    /// d log L_n / d theta, present only when a gradient was requested
    grad: Option<Vec<f64>>,
}

/// Simulated probability and (optionally) its log-gradient for one
/// respondent: average over draws of the product over situations of the
/// chosen alternative's logit probability.
#[allow(clippy::too_many_arguments)]
fn eval_respondent(
    resp: &PreparedRespondent,
    means: &[f64],
    sds: &[f64],
    random_terms: &[(usize, usize)],
    block: &[f64],
    n_draws: usize,
    n_random: usize,
    n_slots: usize,
    want_grad: bool,
) -> RespondentEval {
    let n_terms = means.len();
    let t_count = resp.situations.len();
    let log_space = t_count > LOG_SPACE_THRESHOLD;

    let mut coefs = vec![0.0; n_terms];
    let mut probs = [0.0f64; N_ALTERNATIVES];
    let mut draw_probs = vec![0.0; n_draws];
    // per-draw score over coefficient slots, kept for the chain rule pass
    let mut scores = if want_grad {
        vec![0.0; n_draws * n_terms]
    } else {
        Vec::new()
    };

    for d in 0..n_draws {
        let z = &block[d * n_random..(d + 1) * n_random];
        fill_coefs(&mut coefs, means, sds, random_terms, z);
        let mut prod = 1.0;
        let mut log_prod = 0.0;
        let score = if want_grad {
            &mut scores[d * n_terms..(d + 1) * n_terms]
        } else {
            &mut []
        };
        for sit in &resp.situations {
            let p_chosen = situation_probs(sit, &coefs, &mut probs);
            if log_space {
                log_prod += p_chosen.max(PROB_FLOOR).ln();
            } else {
                prod *= p_chosen;
            }
            if want_grad {
                for &(k, x) in &sit.rows[sit.chosen] {
                    score[k as usize] += x;
                }
                for (j, p) in probs.iter().enumerate() {
                    if sit.avail[j] && *p > 0.0 {
                        for &(k, x) in &sit.rows[j] {
                            score[k as usize] -= p * x;
                        }
                    }
                }
            }
        }
        draw_probs[d] = if log_space { log_prod.exp() } else { prod };
    }

    let sim_prob = draw_probs.iter().sum::<f64>() / n_draws as f64;
    let floored = sim_prob.max(PROB_FLOOR);
    let log_prob = floored.ln();

    let grad = want_grad.then(|| {
        let mut g = vec![0.0; n_slots];
        let inv = 1.0 / (n_draws as f64 * floored);
        for d in 0..n_draws {
            let w = draw_probs[d] * inv;
            if w == 0.0 {
                continue;
            }
            let z = &block[d * n_random..(d + 1) * n_random];
            let score = &scores[d * n_terms..(d + 1) * n_terms];
            for k in 0..n_terms {
                g[k] += w * score[k];
            }
            for &(term, rank) in random_terms {
                g[n_terms + rank] += w * score[term] * z[rank] * sd_sign(sds[rank]);
            }
        }
        g
    });

    RespondentEval { log_prob, grad }
}

fn random_term_pairs(spec: &ModelSpec) -> Vec<(usize, usize)> {
    spec.terms()
        .iter()
        .enumerate()
        .filter_map(|(k, t)| match t.kind {
            ParamKind::RandomNormal => Some((k, spec.random_rank(k).expect("random term"))),
            ParamKind::Fixed => None,
        })
        .collect()
}

fn eval_prepared(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>), LikelihoodError> {
    theta.check_dims(spec)?;
    check_draws(prep, draws)?;
    let (means, sds) = theta.split(spec);
    let random_terms = random_term_pairs(spec);
    let n_slots = spec.n_slots();
    let n_draws = draws.n_draws();
    let n_random = prep.n_random;

    let eval_one = |(r, resp): (usize, &PreparedRespondent)| {
        eval_respondent(
            resp,
            means,
            sds,
            &random_terms,
            draws.respondent_block(r),
            n_draws,
            n_random,
            n_slots,
            want_grad,
        )
    };

    #[cfg(feature = "parallel")]
    let evals: Vec<RespondentEval> = prep
        .respondents
        .par_iter()
        .enumerate()
        .map(eval_one)
        .collect();
    #[cfg(not(feature = "parallel"))]
    let evals: Vec<RespondentEval> = prep.respondents.iter().enumerate().map(eval_one).collect();

    // reduction in respondent index order keeps results bit-reproducible
    let mut ll = 0.0;
    let mut grad = want_grad.then(|| vec![0.0; n_slots]);
    for eval in evals {
        ll += eval.log_prob;
        if let (Some(total), Some(g)) = (grad.as_mut(), eval.grad.as_ref()) {
            for (t, gi) in total.iter_mut().zip(g) {
                *t += gi;
            }
        }
    }
    Ok((ll, grad))
}

/// Simulated log-likelihood on a prepared panel.
pub fn prepared_loglik(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<f64, LikelihoodError> {
    eval_prepared(prep, spec, theta, draws, false).map(|(ll, _)| ll)
}

/// Simulated log-likelihood and its analytic gradient on a prepared panel.
pub fn prepared_loglik_with_grad(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<(f64, Vec<f64>), LikelihoodError> {
    eval_prepared(prep, spec, theta, draws, true)
        .map(|(ll, g)| (ll, g.expect("gradient requested")))
}

/// Per-respondent score vectors at `theta` (gradients of each respondent's
/// log simulated probability), the ingredients of the BHHH information
/// matrix.
pub fn respondent_scores(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<Vec<Vec<f64>>, LikelihoodError> {
    theta.check_dims(spec)?;
    check_draws(prep, draws)?;
    let (means, sds) = theta.split(spec);
    let random_terms = random_term_pairs(spec);
    let n_slots = spec.n_slots();
    let n_draws = draws.n_draws();
    let n_random = prep.n_random;

    let eval_one = |(r, resp): (usize, &PreparedRespondent)| {
        eval_respondent(
            resp,
            means,
            sds,
            &random_terms,
            draws.respondent_block(r),
            n_draws,
            n_random,
            n_slots,
            true,
        )
        .grad
        .expect("gradient requested")
    };

    #[cfg(feature = "parallel")]
    let scores: Vec<Vec<f64>> = prep
        .respondents
        .par_iter()
        .enumerate()
        .map(eval_one)
        .collect();
    #[cfg(not(feature = "parallel"))]
    let scores: Vec<Vec<f64>> = prep.respondents.iter().enumerate().map(eval_one).collect();

    Ok(scores)
}

/// Simulated probability of one respondent's observed choice sequence:
/// (1/R) sum over draws of the product over situations of the chosen
/// alternative's logit probability (the panel form, products inside the
/// draw average).
pub fn panel_sim_prob(
    respondent: &Respondent,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draw_block: &[f64],
) -> Result<f64, LikelihoodError> {
    theta.check_dims(spec)?;
    let panel = ChoicePanel {
        respondents: vec![respondent.clone()],
    };
    let prep = prepare(&panel, spec)?;
    let (means, sds) = theta.split(spec);
    let random_terms = random_term_pairs(spec);
    let n_random = spec.n_random();
    let n_draws = match draw_block.len().checked_div(n_random) {
        None => 1, // no random terms: the mixing integral is degenerate
        Some(0) => {
            return Err(LikelihoodError::DrawDimensionMismatch {
                expected: n_random,
                got: draw_block.len(),
            })
        }
        Some(n) => n,
    };
    let block = if n_random == 0 { &[] } else { draw_block };
    let eval = eval_respondent(
        &prep.respondents[0],
        means,
        sds,
        &random_terms,
        block,
        n_draws,
        n_random,
        spec.n_slots(),
        false,
    );
    Ok(eval.log_prob.exp())
}

/// Simulated log-likelihood of the panel: sum over respondents of the log
/// simulated probability, floored at [`PROB_FLOOR`] so it is finite for
/// any finite parameter vector.
pub fn sim_loglik(
    panel: &ChoicePanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<f64, LikelihoodError> {
    let prep = prepare(panel, spec)?;
    prepared_loglik(&prep, spec, theta, draws)
}

/// Analytic gradient of [`sim_loglik`] over all parameter slots. Mean
/// slots accumulate the draw-weighted logit score; standard-deviation
/// slots carry the extra chain factor z * sign(sd).
pub fn sim_loglik_grad(
    panel: &ChoicePanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<Vec<f64>, LikelihoodError> {
    let prep = prepare(panel, spec)?;
    prepared_loglik_with_grad(&prep, spec, theta, draws).map(|(_, g)| g)
}
