//! Command-line surface tying the toolkit together: estimation, synthetic
//! data simulation, prediction, sign shares, attribute sweeps, gradient
//! checking, and panel validation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/parse error,
//! 3 non-convergence (estimation) or a failed gradient check.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{
    attribute_sweep, predict_probs, prediction_draws, sign_share, Direction, Scenario,
};
use crate::choice::{validate_panel, AlternativeId};
use crate::draws::DrawSet;
use crate::estimator::{estimate, EstimationOptions, StartStrategy, StderrMethod};
use crate::io::{
    read_panel_path, read_spec, read_theta, results_document, write_atomic, write_panel_path,
    write_results,
};
use crate::likelihood::{prepare, prepared_loglik, prepared_loglik_with_grad};
use crate::model::{ModelSpec, ParameterVector};
use crate::scenario::{synthesize_panel, GeneratorConfig};

#[derive(Parser)]
#[command(
    name = "mixlogit",
    version,
    about = "Panel mixed logit estimation by maximum simulated likelihood over Halton draws"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a model on panel data and write a results document
    Estimate(EstimateArgs),
    /// Generate a synthetic panel at a known parameter vector
    Simulate(SimulateArgs),
    /// Predict per-situation choice probabilities for a data file
    Predict(PredictArgs),
    /// Population share of a normal coefficient below (or above) zero
    SignShare(SignShareArgs),
    /// Predicted-share curve along a covariate grid
    Sweep(SweepArgs),
    /// Compare the analytic gradient against central finite differences
    Gradcheck(GradcheckArgs),
    /// Check a data file against the panel invariants
    Validate(ValidateArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Panel data file (long CSV layout)
    #[arg(long)]
    data: PathBuf,
    /// Model spec document (TOML)
    #[arg(long)]
    spec: PathBuf,
    /// Simulated draws per respondent
    #[arg(long, default_value_t = 200)]
    draws: usize,
    /// Leading Halton points to discard
    #[arg(long, default_value_t = 10)]
    discard: u64,
    /// Seed for optional draw scrambling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random-shift scramble the Halton draws
    #[arg(long, default_value_t = false)]
    scramble: bool,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    gradient_tolerance: f64,
    #[arg(long, default_value_t = 1e-8)]
    step_tolerance: f64,
    /// Standard error method: bhhh | hessian
    #[arg(long, default_value = "bhhh")]
    stderr: String,
    /// Start strategy: warm | zero
    #[arg(long, default_value = "warm")]
    start: String,
    /// Output results document
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Parameter vector document (TOML [theta] table)
    #[arg(long)]
    theta: PathBuf,
    #[arg(long)]
    respondents: usize,
    #[arg(long, default_value_t = 4)]
    situations: usize,
    #[arg(long)]
    seed: u64,
    /// Optional generator configuration document (TOML)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output panel data file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    theta: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 10)]
    discard: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SignShareArgs {
    #[arg(long, allow_hyphen_values = true)]
    mean: f64,
    #[arg(long, allow_hyphen_values = true)]
    sd: f64,
    /// negative | positive
    #[arg(long, default_value = "negative")]
    direction: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    theta: PathBuf,
    /// Single-situation data file holding the baseline scenario
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    covariate: String,
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long)]
    step: f64,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 10)]
    discard: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    draws: usize,
    #[arg(long, default_value_t = 10)]
    discard: u64,
    /// Number of random parameter points to test
    #[arg(long, default_value_t = 5)]
    points: usize,
    /// Maximum tolerated relative error
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
}

enum CliError {
    /// Data, parse, or model errors: exit 2.
    Data(String),
    /// Non-convergence or a failed diagnostic: exit 3.
    Diagnostic(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Data(_) => 2,
            CliError::Diagnostic(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Data(m) | CliError::Diagnostic(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Parses argv and runs the selected subcommand, returning the process
/// exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Estimate(args) => run_estimate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Predict(args) => run_predict(args),
        Command::SignShare(args) => run_sign_share(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Gradcheck(args) => run_gradcheck(args),
        Command::Validate(args) => run_validate(args),
    }
}

fn load_spec(path: &PathBuf) -> Result<ModelSpec, CliError> {
    let text = fs::read_to_string(path).map_err(data_err)?;
    read_spec(&text).map_err(data_err)
}

fn load_theta(path: &PathBuf, spec: &ModelSpec) -> Result<ParameterVector, CliError> {
    let text = fs::read_to_string(path).map_err(data_err)?;
    read_theta(&text, spec).map_err(data_err)
}

fn run_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let panel = read_panel_path(&args.data).map_err(data_err)?;
    let spec = load_spec(&args.spec)?;
    let options = EstimationOptions {
        n_draws: args.draws,
        discard: args.discard,
        seed: args.seed,
        scramble: args.scramble,
        max_iterations: args.max_iter,
        gradient_tolerance: args.gradient_tolerance,
        step_tolerance: args.step_tolerance,
        stderr_method: match args.stderr.as_str() {
            "bhhh" => StderrMethod::Bhhh,
            "hessian" => StderrMethod::NumericalHessian,
            other => return Err(CliError::Data(format!("unknown stderr method `{other}`"))),
        },
        start: match args.start.as_str() {
            "warm" => StartStrategy::MnlWarmStart,
            "zero" => StartStrategy::ZeroStart,
            other => return Err(CliError::Data(format!("unknown start strategy `{other}`"))),
        },
    };
    let result = estimate(&panel, &spec, &options).map_err(data_err)?;

    let doc = results_document(&result, &spec, &options).map_err(data_err)?;
    let text = write_results(&doc).map_err(data_err)?;
    write_atomic(&args.out, text.as_bytes()).map_err(data_err)?;

    println!(
        "{:<28} {:>12} {:>12} {:>10}",
        "parameter", "estimate", "std.err", "p-value"
    );
    for row in &doc.parameters {
        println!(
            "{:<28} {:>12.5} {:>12} {:>10}",
            row.name,
            row.estimate,
            row.std_error
                .map_or("--".to_string(), |s| format!("{s:.5}")),
            row.p_value.map_or("--".to_string(), |p| format!("{p:.4}")),
        );
    }
    println!();
    println!("log-likelihood          {:.4}", result.ll_final);
    println!("LL restricted MNL       {:.4}", result.ll_mnl);
    println!(
        "LL(0) equal shares      {:.4}   rho2 {:.4}",
        result.ll_null_equal_shares, result.rho2_equal_shares
    );
    println!(
        "LL(0) constants only    {:.4}   rho2 {:.4}",
        result.ll_null_constants, result.rho2_constants
    );
    println!("rho2 restricted MNL     {:.4}", result.rho2_mnl);
    println!("AIC {:.3}  BIC {:.3}", result.aic, result.bic);
    println!(
        "observations {}  respondents {}  iterations {}  |grad| {:.3e}",
        result.n_obs, result.n_respondents, result.iterations, result.grad_max_norm
    );
    println!("results written to {}", args.out.display());

    if !result.converged {
        return Err(CliError::Diagnostic(format!(
            "estimation did not converge after {} iterations (gradient max-norm {:.3e}); best iterate written to {}",
            result.iterations, result.grad_max_norm, args.out.display()
        )));
    }
    println!("converged after {} iterations", result.iterations);
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let theta = load_theta(&args.theta, &spec)?;
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(data_err)?;
            toml::from_str::<GeneratorConfig>(&text).map_err(data_err)?
        }
        None => GeneratorConfig::default(),
    };
    if args.respondents == 0 || args.situations == 0 {
        return Err(CliError::Data(
            "respondents and situations must be positive".to_string(),
        ));
    }
    let panel = synthesize_panel(
        args.respondents,
        args.situations,
        &spec,
        &theta,
        args.seed,
        &config,
    )
    .map_err(data_err)?;
    write_panel_path(&panel, &args.out).map_err(data_err)?;
    println!(
        "wrote {} respondents x {} situations to {}",
        panel.n_respondents(),
        args.situations,
        args.out.display()
    );
    for alt in AlternativeId::ALL {
        let count = panel
            .respondents
            .iter()
            .flat_map(|r| &r.situations)
            .filter(|s| s.chosen == alt)
            .count();
        println!(
            "  {:<20} {:>7} ({:.1}%)",
            alt.as_str(),
            count,
            count as f64 / panel.n_observations() as f64 * 100.0
        );
    }
    Ok(())
}

fn run_predict(args: PredictArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let theta = load_theta(&args.theta, &spec)?;
    let panel = read_panel_path(&args.data).map_err(data_err)?;
    let draws = prediction_draws(&spec, args.draws, args.discard).map_err(data_err)?;

    let mut out = String::from("respondent_id,situation_id");
    for alt in AlternativeId::ALL {
        out.push(',');
        out.push_str(alt.as_str());
    }
    out.push('\n');
    for resp in &panel.respondents {
        for sit in &resp.situations {
            let scenario = Scenario {
                person: resp.covariates.clone(),
                situation: sit.clone(),
            };
            let p = predict_probs(&scenario, &spec, &theta, &draws).map_err(data_err)?;
            out.push_str(&resp.id);
            out.push(',');
            out.push_str(&sit.situation_index.to_string());
            for share in p {
                out.push_str(&format!(",{share:.6}"));
            }
            out.push('\n');
        }
    }
    write_atomic(&args.out, out.as_bytes()).map_err(data_err)?;
    println!(
        "wrote predictions for {} observations to {}",
        panel.n_observations(),
        args.out.display()
    );
    Ok(())
}

fn run_sign_share(args: SignShareArgs) -> Result<(), CliError> {
    let direction = match args.direction.as_str() {
        "negative" => Direction::Negative,
        "positive" => Direction::Positive,
        other => {
            return Err(CliError::Data(format!(
                "unknown direction `{other}` (expected negative|positive)"
            )))
        }
    };
    println!("{:.3}", sign_share(args.mean, args.sd, direction));
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let theta = load_theta(&args.theta, &spec)?;
    let panel = read_panel_path(&args.scenario).map_err(data_err)?;
    if panel.n_respondents() != 1 || panel.n_observations() != 1 {
        return Err(CliError::Data(format!(
            "scenario file must hold exactly one situation, found {} respondents / {} situations",
            panel.n_respondents(),
            panel.n_observations()
        )));
    }
    let scenario = Scenario {
        person: panel.respondents[0].covariates.clone(),
        situation: panel.respondents[0].situations[0].clone(),
    };
    if args.step <= 0.0 || args.to < args.from {
        return Err(CliError::Data(
            "grid requires from <= to and a positive step".to_string(),
        ));
    }
    let mut grid = Vec::new();
    let mut v = args.from;
    while v <= args.to + args.step * 1e-9 {
        grid.push(v);
        v += args.step;
    }
    let draws = prediction_draws(&spec, args.draws, args.discard).map_err(data_err)?;
    let table = attribute_sweep(&scenario, &spec, &theta, &args.covariate, &grid, &draws)
        .map_err(data_err)?;
    write_atomic(&args.out, table.to_delimited().as_bytes()).map_err(data_err)?;
    println!(
        "wrote {}-point sweep of {} to {}",
        grid.len(),
        args.covariate,
        args.out.display()
    );
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let panel = read_panel_path(&args.data).map_err(data_err)?;
    let spec = load_spec(&args.spec)?;
    let prep = prepare(&panel, &spec).map_err(data_err)?;
    let draws = DrawSet::halton_normal(
        panel.n_respondents(),
        args.draws,
        spec.n_random(),
        args.discard,
    )
    .map_err(data_err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst: f64 = 0.0;
    for point in 0..args.points {
        let theta = ParameterVector::new(
            (0..spec.n_slots())
                .map(|_| rng.random_range(-0.5..0.5))
                .collect(),
        );
        let (_, grad) =
            prepared_loglik_with_grad(&prep, &spec, &theta, &draws).map_err(data_err)?;
        #[allow(clippy::needless_range_loop)]
        for k in 0..spec.n_slots() {
            let h = 1e-5 * (1.0 + theta.values()[k].abs());
            let mut up = theta.clone();
            up.values_mut()[k] += h;
            let mut dn = theta.clone();
            dn.values_mut()[k] -= h;
            let f_up = prepared_loglik(&prep, &spec, &up, &draws).map_err(data_err)?;
            let f_dn = prepared_loglik(&prep, &spec, &dn, &draws).map_err(data_err)?;
            let fd = (f_up - f_dn) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
        }
        println!("point {point}: max relative error so far {worst:.3e}");
    }
    println!(
        "gradcheck: worst relative error {worst:.3e} over {} points x {} slots",
        args.points,
        spec.n_slots()
    );
    if worst > args.tolerance {
        return Err(CliError::Diagnostic(format!(
            "analytic gradient disagrees with finite differences: {worst:.3e} > {:.1e}",
            args.tolerance
        )));
    }
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<(), CliError> {
    let panel = read_panel_path(&args.data).map_err(data_err)?;
    let report = validate_panel(&panel);
    if report.is_clean() {
        println!(
            "panel ok: {} respondents, {} observations",
            panel.n_respondents(),
            panel.n_observations()
        );
        Ok(())
    } else {
        let mut listing = String::new();
        for v in &report.violations {
            listing.push_str(&format!("{v}\n"));
        }
        Err(CliError::Data(format!(
            "panel has {} violation(s):\n{}",
            report.violations.len(),
            listing.trim_end()
        )))
    }
}
