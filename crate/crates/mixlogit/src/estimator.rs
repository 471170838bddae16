//! Maximum simulated likelihood estimation: quasi-Newton search over the
//! simulated log-likelihood with a fixed draw set, standard errors from the
//! BHHH outer product (or a numerical Hessian), and fit statistics.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::choice::{validate_panel, AlternativeId, ChoicePanel, ValidationReport};
use crate::draws::{normal_cdf, DrawError, DrawMeta, DrawSet};
use crate::likelihood::{
    prepare, prepared_loglik, prepared_loglik_with_grad, respondent_scores, LikelihoodError,
    PreparedPanel,
};
use crate::model::{Covariate, ModelSpec, ParameterVector, UtilityTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StderrMethod {
    /// Outer product of per-respondent score vectors.
    Bhhh,
    /// Central finite differences of the analytic gradient.
    NumericalHessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartStrategy {
    /// All slots start at zero.
    ZeroStart,
    /// Fit the all-fixed restricted model first, then start the means there
    /// and every standard deviation at 0.1.
    MnlWarmStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationOptions {
    pub n_draws: usize,
    pub discard: u64,
    pub seed: u64,
    /// Random-shift scrambling of the Halton draws, keyed by `seed`.
    /// Off by default; plain Halton is the reference method.
    pub scramble: bool,
    pub max_iterations: usize,
    /// Converged when the gradient max-norm falls below this.
    pub gradient_tolerance: f64,
    /// Converged when an accepted (non-decreasing) step's max-norm falls
    /// below this.
    pub step_tolerance: f64,
    pub stderr_method: StderrMethod,
    pub start: StartStrategy,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            n_draws: 200,
            discard: 10,
            seed: 0,
            scramble: false,
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            step_tolerance: 1e-8,
            stderr_method: StderrMethod::Bhhh,
            start: StartStrategy::MnlWarmStart,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: ParameterVector,
    /// Per-slot standard errors; `None` marks slots dropped from a singular
    /// information matrix (no information in the sample).
    pub std_errors: Vec<Option<f64>>,
    /// Two-sided normal p-values, absent where the standard error is.
    pub p_values: Vec<Option<f64>>,
    pub ll_final: f64,
    pub ll_null_equal_shares: f64,
    pub ll_null_constants: f64,
    /// Restricted all-fixed (plain MNL) fit on the same data.
    pub ll_mnl: f64,
    pub rho2_equal_shares: f64,
    pub rho2_constants: f64,
    pub rho2_mnl: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub n_respondents: usize,
    pub converged: bool,
    pub iterations: usize,
    pub grad_max_norm: f64,
    pub draw_meta: DrawMeta,
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("panel fails validation with {} violation(s); first: {}",
        .0.violations.len(),
        .0.violations.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidPanel(ValidationReport),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Draw(#[from] DrawError),
    #[error("log-likelihood {0} is positive")]
    InvalidLL(f64),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
}

/// McFadden pseudo R², AIC, and BIC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitStats {
    pub rho2: f64,
    pub aic: f64,
    pub bic: f64,
}

pub fn fit_stats(
    ll_final: f64,
    ll_null: f64,
    n_obs: usize,
    n_params: usize,
) -> Result<FitStats, EstimateError> {
    if ll_final > 0.0 {
        return Err(EstimateError::InvalidLL(ll_final));
    }
    let k = n_params as f64;
    Ok(FitStats {
        rho2: 1.0 - ll_final / ll_null,
        aic: 2.0 * k - 2.0 * ll_final,
        bic: k * (n_obs as f64).ln() - 2.0 * ll_final,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullDefinition {
    /// Each observation contributes -ln(number of available alternatives).
    EqualShares,
    /// Maximized constants-only MNL on the same availability structure.
    ConstantsOnly,
}

/// Null log-likelihood under either convention. The reference paper's own
/// LL(0) definition is not recoverable from its printed fit statistics, so
/// both conventions are reported side by side downstream.
pub fn null_loglik(panel: &ChoicePanel, definition: NullDefinition) -> Result<f64, EstimateError> {
    match definition {
        NullDefinition::EqualShares => Ok(panel
            .respondents
            .iter()
            .flat_map(|r| &r.situations)
            .map(|s| -(s.availability.count_available() as f64).ln())
            .sum()),
        NullDefinition::ConstantsOnly => {
            let spec = constants_only_spec();
            let prep = prepare(panel, &spec)?;
            let draws = DrawSet::halton_normal(panel.n_respondents(), 1, 0, 0)?;
            let outcome = maximize(
                &prep,
                &spec,
                &draws,
                vec![0.0; spec.n_slots()],
                500,
                1e-8,
                1e-12,
            )?;
            Ok(outcome.value)
        }
    }
}

fn constants_only_spec() -> ModelSpec {
    let terms = AlternativeId::ALL
        .iter()
        .filter(|alt| **alt != AlternativeId::BASE)
        .map(|alt| UtilityTerm::fixed(*alt, Covariate::Constant, &format!("asc_{}", alt.as_str())))
        .collect();
    ModelSpec::new(AlternativeId::BASE, terms).expect("constants-only spec is valid")
}

struct BfgsOutcome {
    theta: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// BFGS ascent on the simulated log-likelihood with a backtracking
/// sufficient-increase line search. Internally this is the textbook
/// minimization update applied to the negated objective: with
/// y = g_old - g_new the curvature condition is s'y > 0 and H stays an
/// approximation of the inverse negative Hessian (positive definite near a
/// maximum). Every evaluation reuses the same prepared panel and draw set,
/// so the objective is free of simulation chatter.
fn maximize(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    draws: &DrawSet,
    start: Vec<f64>,
    max_iterations: usize,
    gradient_tolerance: f64,
    step_tolerance: f64,
) -> Result<BfgsOutcome, EstimateError> {
    const C1: f64 = 1e-4;
    let n = start.len();

    let eval_f = |x: &[f64]| -> Result<f64, EstimateError> {
        let theta = ParameterVector::new(x.to_vec());
        Ok(prepared_loglik(prep, spec, &theta, draws)?)
    };
    let eval_fg = |x: &[f64]| -> Result<(f64, Vec<f64>), EstimateError> {
        let theta = ParameterVector::new(x.to_vec());
        Ok(prepared_loglik_with_grad(prep, spec, &theta, draws)?)
    };

    let max_norm = |v: &DVector<f64>| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    let mut x = DVector::from_vec(start);
    let (f0, g0) = eval_fg(x.as_slice())?;
    let mut f = f0;
    let mut g = DVector::from_vec(g0);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;

    let mut best_x = x.clone();
    let mut best_f = f;
    let mut best_g = g.clone();

    let mut iterations = 0;
    let mut converged = max_norm(&g) < gradient_tolerance || n == 0;

    while !converged && iterations < max_iterations {
        iterations += 1;

        // ascent direction; reset to steepest ascent if H lost definiteness
        let mut dir = &h * &g;
        let mut slope = g.dot(&dir);
        if !slope.is_finite() || slope <= 0.0 {
            h = DMatrix::identity(n, n);
            first_update = true;
            dir = g.clone();
            slope = g.dot(&dir);
            if slope <= 0.0 {
                converged = true;
                break;
            }
        }

        // unit steps are natural for BFGS, but cap the very first step to
        // the unit cube so an identity H cannot fling the iterate away
        let mut alpha = if first_update {
            (1.0 / max_norm(&dir)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &x + &dir * alpha;
            let f_new = eval_f(candidate.as_slice())?;
            if f_new.is_finite() && f_new >= f + C1 * alpha * slope {
                accepted = Some((candidate, f_new));
                break;
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new)) = accepted else {
            // no acceptable step along this direction; the gradient test
            // below decides whether this counts as convergence
            converged = max_norm(&g) < gradient_tolerance;
            break;
        };
        let (_, g_new_vec) = eval_fg(x_new.as_slice())?;
        let g_new = DVector::from_vec(g_new_vec);

        let step = &x_new - &x;
        // minimization-space difference for the negated objective
        let y = &g - &g_new;
        let sy = step.dot(&y);
        if sy > 1e-10 * step.norm() * y.norm() {
            if first_update {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first_update = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            let hys = &hy * step.transpose();
            h += (&step * step.transpose()) * ((1.0 + yhy * rho) * rho);
            h -= (&hys + hys.transpose()) * rho;
        }

        x = x_new;
        f = f_new;
        g = g_new;
        if f > best_f {
            best_f = f;
            best_x = x.clone();
            best_g = g.clone();
        }

        if max_norm(&g) < gradient_tolerance || max_norm(&step) < step_tolerance {
            converged = true;
        }
    }

    if f >= best_f {
        best_f = f;
        best_x = x;
        best_g = g;
    }
    Ok(BfgsOutcome {
        theta: best_x.as_slice().to_vec(),
        value: best_f,
        grad: best_g.as_slice().to_vec(),
        iterations,
        converged,
    })
}

/// Inverts the information matrix, dropping unidentified slots (zero or
/// near-zero information) instead of failing. Returns per-slot variances.
fn invert_information(info: &DMatrix<f64>) -> Vec<Option<f64>> {
    let n = info.nrows();
    let max_diag = (0..n).map(|i| info[(i, i)].abs()).fold(0.0f64, f64::max);
    let mut kept: Vec<usize> = (0..n)
        .filter(|&i| info[(i, i)] > 1e-12 * (1.0 + max_diag))
        .collect();

    for attempt in 0..2 {
        if kept.is_empty() {
            break;
        }
        let m = kept.len();
        let sub = DMatrix::from_fn(m, m, |a, b| info[(kept[a], kept[b])]);
        if let Some(chol) = sub.cholesky() {
            let inv = chol.inverse();
            let mut out = vec![None; n];
            for (a, &slot) in kept.iter().enumerate() {
                let v = inv[(a, a)];
                if v.is_finite() && v > 0.0 {
                    out[slot] = Some(v);
                }
            }
            return out;
        }
        if attempt == 0 {
            // retry once without the most weakly identified slots
            kept.retain(|&i| info[(i, i)] > 1e-6 * (1.0 + max_diag));
        }
    }
    vec![None; n]
}

fn bhhh_variances(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<Vec<Option<f64>>, EstimateError> {
    let scores = respondent_scores(prep, spec, theta, draws)?;
    let n = spec.n_slots();
    let mut info = DMatrix::<f64>::zeros(n, n);
    for s in &scores {
        for i in 0..n {
            for j in i..n {
                info[(i, j)] += s[i] * s[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            info[(i, j)] = info[(j, i)];
        }
    }
    Ok(invert_information(&info))
}

fn numerical_hessian_variances(
    prep: &PreparedPanel,
    spec: &ModelSpec,
    theta: &ParameterVector,
    draws: &DrawSet,
) -> Result<Vec<Option<f64>>, EstimateError> {
    let n = spec.n_slots();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let hj = 1e-5 * (1.0 + theta.values()[j].abs());
        let mut up = theta.clone();
        up.values_mut()[j] += hj;
        let mut dn = theta.clone();
        dn.values_mut()[j] -= hj;
        let (_, gu) = prepared_loglik_with_grad(prep, spec, &up, draws)?;
        let (_, gd) = prepared_loglik_with_grad(prep, spec, &dn, draws)?;
        for i in 0..n {
            hess[(i, j)] = (gu[i] - gd[i]) / (2.0 * hj);
        }
    }
    let info = DMatrix::from_fn(n, n, |i, j| -(hess[(i, j)] + hess[(j, i)]) / 2.0);
    Ok(invert_information(&info))
}

/// Maximum simulated likelihood estimation of `spec` on `panel`.
///
/// The draw set is generated once and reused for every objective and
/// gradient evaluation. Non-convergence is not an error: the best iterate
/// comes back flagged `converged = false`.
pub fn estimate(
    panel: &ChoicePanel,
    spec: &ModelSpec,
    options: &EstimationOptions,
) -> Result<EstimationResult, EstimateError> {
    if options.n_draws == 0 {
        return Err(EstimateError::InvalidOptions("n_draws must be >= 1".into()));
    }
    if options.gradient_tolerance <= 0.0 || options.step_tolerance <= 0.0 {
        return Err(EstimateError::InvalidOptions(
            "tolerances must be positive".into(),
        ));
    }
    let report = validate_panel(panel);
    if !report.is_clean() {
        return Err(EstimateError::InvalidPanel(report));
    }

    let n_respondents = panel.n_respondents();
    let n_obs = panel.n_observations();
    let prep = prepare(panel, spec)?;

    // without random terms the mixing integral is degenerate and a single
    // draw evaluates the plain MNL likelihood exactly
    let n_draws = if spec.n_random() == 0 {
        1
    } else {
        options.n_draws
    };
    let draws = if options.scramble {
        DrawSet::halton_normal_scrambled(
            n_respondents,
            n_draws,
            spec.n_random(),
            options.discard,
            options.seed,
        )?
    } else {
        DrawSet::halton_normal(n_respondents, n_draws, spec.n_random(), options.discard)?
    };
    let draw_meta = draws.meta().clone();

    // restricted all-fixed fit: warm-start point and the rho2_mnl numerator
    let spec_mnl = spec.to_fixed();
    let prep_mnl = prepare(panel, &spec_mnl)?;
    let draws_mnl = DrawSet::halton_normal(n_respondents, 1, 0, 0)?;
    let mnl = maximize(
        &prep_mnl,
        &spec_mnl,
        &draws_mnl,
        vec![0.0; spec_mnl.n_slots()],
        options.max_iterations,
        options.gradient_tolerance,
        options.step_tolerance,
    )?;
    let ll_mnl = mnl.value;

    let start = match options.start {
        StartStrategy::ZeroStart => vec![0.0; spec.n_slots()],
        StartStrategy::MnlWarmStart => {
            let mut theta = mnl.theta.clone();
            theta.resize(spec.n_slots(), 0.1);
            theta
        }
    };

    let outcome = maximize(
        &prep,
        spec,
        &draws,
        start,
        options.max_iterations,
        options.gradient_tolerance,
        options.step_tolerance,
    )?;
    debug_assert_eq!(draws.meta(), &draw_meta, "draw set must not change mid-run");

    let theta_hat = ParameterVector::new(outcome.theta.clone());
    let ll_final = outcome.value;
    let grad_max_norm = outcome.grad.iter().fold(0.0f64, |m, gi| m.max(gi.abs()));

    let variances = match options.stderr_method {
        StderrMethod::Bhhh => bhhh_variances(&prep, spec, &theta_hat, &draws)?,
        StderrMethod::NumericalHessian => {
            numerical_hessian_variances(&prep, spec, &theta_hat, &draws)?
        }
    };
    let std_errors: Vec<Option<f64>> = variances.iter().map(|v| v.map(f64::sqrt)).collect();
    let p_values: Vec<Option<f64>> = theta_hat
        .values()
        .iter()
        .zip(&std_errors)
        .map(|(est, se)| se.map(|se| 2.0 * normal_cdf(-(est / se).abs())))
        .collect();

    let ll_null_equal_shares = null_loglik(panel, NullDefinition::EqualShares)?;
    let ll_null_constants = null_loglik(panel, NullDefinition::ConstantsOnly)?;
    let stats = fit_stats(
        ll_final.min(0.0),
        ll_null_equal_shares,
        n_obs,
        spec.n_slots(),
    )?;

    Ok(EstimationResult {
        rho2_equal_shares: 1.0 - ll_final / ll_null_equal_shares,
        rho2_constants: 1.0 - ll_final / ll_null_constants,
        rho2_mnl: 1.0 - ll_mnl / ll_null_equal_shares,
        aic: stats.aic,
        bic: stats.bic,
        theta_hat,
        std_errors,
        p_values,
        ll_final,
        ll_null_equal_shares,
        ll_null_constants,
        ll_mnl,
        n_obs,
        n_respondents,
        converged: outcome.converged,
        iterations: outcome.iterations,
        grad_max_norm,
        draw_meta,
    })
}
