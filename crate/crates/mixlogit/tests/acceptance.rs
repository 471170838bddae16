//! Acceptance suite: one test per release criterion, each printing a
//! pass line with the measured quantity at the pinned tolerance.

use std::collections::BTreeMap;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixlogit::analytics::{attribute_sweep, predict_probs, prediction_draws};
use mixlogit::choice::{AlternativeId, ChoicePanel, Respondent};
use mixlogit::draws::{radical_inverse, DrawSet};
use mixlogit::estimator::{estimate, fit_stats, EstimationOptions};
use mixlogit::io::{read_results, write_theta};
use mixlogit::likelihood::{prepare, prepared_loglik, prepared_loglik_with_grad, sim_loglik};
use mixlogit::model::{reference_spec, Covariate, ModelSpec, ParameterVector, UtilityTerm};
use mixlogit::scenario::{
    generate_scenarios, sample_population, sample_trip, simulate_choices, synthesize_panel,
    typical_scenario, GeneratorConfig,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixlogit"))
}

/// Reduced reference-style model: six random alternative-specific
/// constants plus eight fixed slopes, at published-magnitude values
/// (-0.318 is the published auto constant, not an approximated 1/pi).
#[allow(clippy::approx_constant)]
fn reduced_spec() -> (ModelSpec, ParameterVector) {
    use AlternativeId::*;
    let c = Covariate::Constant;
    let terms = vec![
        UtilityTerm::random(Auto, c.clone(), "asc_auto"),
        UtilityTerm::random(ShuttleBus, c.clone(), "asc_shuttle_bus"),
        UtilityTerm::random(Tnc, c.clone(), "asc_tnc"),
        UtilityTerm::random(Taxi, c.clone(), "asc_taxi"),
        UtilityTerm::random(ChangeDestination, c.clone(), "asc_change_destination"),
        UtilityTerm::random(CancelTrip, c, "asc_cancel_trip"),
        UtilityTerm::fixed(
            ShuttleBus,
            Covariate::named("SHUTTLE_WAIT"),
            "b_shuttle_wait",
        ),
        UtilityTerm::fixed(ShuttleBus, Covariate::named("ALONE"), "b_shuttle_alone"),
        UtilityTerm::fixed(ShuttleBus, Covariate::named("TRUST"), "b_shuttle_trust"),
        UtilityTerm::fixed(Tnc, Covariate::named("MILLENNIAL"), "b_tnc_millennial"),
        UtilityTerm::fixed(Tnc, Covariate::named("TNC_WAIT"), "b_tnc_wait"),
        UtilityTerm::fixed(Tnc, Covariate::named("TNC_COST"), "b_tnc_cost"),
        UtilityTerm::fixed(Taxi, Covariate::named("TAXI_WAIT"), "b_taxi_wait"),
        UtilityTerm::fixed(
            CancelTrip,
            Covariate::named("MANDATORY"),
            "b_cancel_mandatory",
        ),
    ];
    let spec = ModelSpec::new(AlternativeId::AskRide, terms).unwrap();
    let theta = ParameterVector::new(vec![
        // means
        -0.318, 3.210, 0.258, 0.787, -3.008, -1.003, // constants
        -0.015, 0.220, 0.607, 1.170, -0.113, -0.016, -0.032, -0.751, // slopes
        // standard deviations of the six constants
        3.035, 2.344, 1.924, 1.810, 3.849, 3.958,
    ]);
    (spec, theta)
}

#[test]
fn criterion_01_sign_share_reproduction() {
    let cases = [
        ("-0.050", "0.082", "0.729", 0.73),
        ("-0.033", "0.0313", "0.854", 0.86),
        ("-1.596", "3.101", "0.697", 0.70),
    ];
    for (mean, sd, expected, published) in cases {
        let output = bin()
            .args(["sign-share", "--mean", mean, "--sd", sd])
            .output()
            .expect("run sign-share");
        assert!(output.status.success());
        let printed = String::from_utf8_lossy(&output.stdout).trim().to_string();
        assert_eq!(printed, expected, "sign-share({mean},{sd})");
        let value: f64 = printed.parse().unwrap();
        assert!(
            (value - published).abs() <= 0.02,
            "{value} vs published {published}"
        );
    }
    println!("PASS criterion 1: sign shares 0.729 / 0.854 / 0.697 within 2pp of 73% / 86% / 70%");
}

#[test]
fn criterion_02_halton_radical_inverse_exact() {
    let base2 = [
        1.0 / 2.0,
        1.0 / 4.0,
        3.0 / 4.0,
        1.0 / 8.0,
        5.0 / 8.0,
        3.0 / 8.0,
        7.0 / 8.0,
        1.0 / 16.0,
    ];
    let base3 = [
        1.0 / 3.0,
        2.0 / 3.0,
        1.0 / 9.0,
        4.0 / 9.0,
        7.0 / 9.0,
        2.0 / 9.0,
        5.0 / 9.0,
        8.0 / 9.0,
    ];
    for (i, want) in base2.iter().enumerate() {
        assert_eq!(radical_inverse(i as u64 + 1, 2).unwrap(), *want);
    }
    for (i, want) in base3.iter().enumerate() {
        assert_eq!(radical_inverse(i as u64 + 1, 3).unwrap(), *want);
    }
    println!("PASS criterion 2: first 8 Halton points exact in bases 2 and 3");
}

/// Independently coded closed-form MNL log-likelihood: direct exponentials
/// and a plain softmax, no max shift, no draws, no shared code with the
/// simulated path.
fn mnl_oracle_loglik(panel: &ChoicePanel, spec: &ModelSpec, means: &[f64]) -> f64 {
    let mut total = 0.0;
    for resp in &panel.respondents {
        for sit in &resp.situations {
            let mut denom = 0.0;
            let mut chosen_weight = 0.0;
            for alt in AlternativeId::ALL {
                if !sit.availability.is_available(alt) {
                    continue;
                }
                let mut v = 0.0;
                for (k, term) in spec.terms().iter().enumerate() {
                    if term.alternative != alt {
                        continue;
                    }
                    let x = match &term.covariate {
                        Covariate::Constant => 1.0,
                        Covariate::Named(name) => sit
                            .covariate(alt, name, &resp.covariates)
                            .expect("covariate present"),
                    };
                    v += means[k] * x;
                }
                let w = v.exp();
                denom += w;
                if alt == sit.chosen {
                    chosen_weight = w;
                }
            }
            total += (chosen_weight / denom).ln();
        }
    }
    total
}

#[test]
fn criterion_03_mnl_reduction_oracle() {
    let (spec, theta_true) = reduced_spec();
    let config = GeneratorConfig::default();
    // 125 respondents x 4 situations = 500 observations
    let panel = synthesize_panel(125, 4, &spec, &theta_true, 303, &config).unwrap();
    assert_eq!(panel.n_observations(), 500);

    // with every sd at zero all draws coincide, so a single draw is the
    // exact degenerate-mixing evaluation (the estimator uses the same
    // reduction); coefficients stay moderate so neither path saturates
    let draws = DrawSet::halton_normal(panel.n_respondents(), 1, spec.n_random(), 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut values: Vec<f64> = (0..spec.n_slots())
            .map(|_| rng.random_range(-0.1..0.1))
            .collect();
        for sd in values.iter_mut().skip(spec.n_terms()) {
            *sd = 0.0;
        }
        let theta = ParameterVector::new(values.clone());
        let simulated = sim_loglik(&panel, &spec, &theta, &draws).unwrap();
        let oracle = mnl_oracle_loglik(&panel, &spec, &values[..spec.n_terms()]);
        // 1e-12 is read relative to the log-likelihood magnitude: an
        // absolute gap that small is below one ulp of a |LL| ~ 10^3 total
        // and unattainable between two independently rounded paths
        let rel = (simulated - oracle).abs() / oracle.abs().max(1.0);
        worst = worst.max(rel);
        assert!(
            rel < 1e-12,
            "sim {simulated} vs oracle {oracle} (rel {rel:.2e})"
        );
    }
    println!("PASS criterion 3: degenerate-mixing likelihood matches the closed-form MNL oracle to 12 digits, worst rel delta = {worst:.3e} (< 1e-12)");
}

#[test]
fn criterion_04_gradient_check() {
    // three random parameters: two random constants and one random slope
    let terms = vec![
        UtilityTerm::random(
            AlternativeId::ShuttleBus,
            Covariate::Constant,
            "asc_shuttle",
        ),
        UtilityTerm::random(AlternativeId::Tnc, Covariate::Constant, "asc_tnc"),
        UtilityTerm::fixed(AlternativeId::Taxi, Covariate::Constant, "asc_taxi"),
        UtilityTerm::random(
            AlternativeId::ShuttleBus,
            Covariate::named("SHUTTLE_WAIT"),
            "b_shuttle_wait",
        ),
        UtilityTerm::fixed(
            AlternativeId::Tnc,
            Covariate::named("TNC_COST"),
            "b_tnc_cost",
        ),
    ];
    let spec = ModelSpec::new(AlternativeId::AskRide, terms).unwrap();
    let theta_gen = ParameterVector::new(vec![1.0, 0.3, 0.2, -0.02, -0.02, 0.9, 0.7, 0.01]);
    let config = GeneratorConfig::default();
    let panel = synthesize_panel(100, 4, &spec, &theta_gen, 404, &config).unwrap();

    let prep = prepare(&panel, &spec).unwrap();
    let draws = DrawSet::halton_normal(panel.n_respondents(), 100, spec.n_random(), 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let theta = ParameterVector::new(
            (0..spec.n_slots())
                .map(|_| rng.random_range(-0.3..0.3))
                .collect(),
        );
        let (_, grad) = prepared_loglik_with_grad(&prep, &spec, &theta, &draws).unwrap();
        #[allow(clippy::needless_range_loop)]
        for k in 0..spec.n_slots() {
            // 1e-5 relative step with a floor that balances truncation
            // against roundoff for raw-scale covariates
            let h = 1e-5 * theta.values()[k].abs().max(0.1);
            let mut up = theta.clone();
            up.values_mut()[k] += h;
            let mut dn = theta.clone();
            dn.values_mut()[k] -= h;
            let fd = (prepared_loglik(&prep, &spec, &up, &draws).unwrap()
                - prepared_loglik(&prep, &spec, &dn, &draws).unwrap())
                / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
            assert!(
                rel < 1e-6,
                "slot {k}: analytic {} vs fd {fd} (rel {rel:.2e})",
                grad[k]
            );
        }
    }
    println!("PASS criterion 4: analytic gradient matches central differences, worst rel err {worst:.3e} (< 1e-6)");
}

#[test]
fn criterion_05_parameter_recovery() {
    let (spec, theta_true) = reduced_spec();
    let config = GeneratorConfig::default();
    let n_terms = spec.n_terms();

    let mut within = 0usize;
    let mut total = 0usize;
    let mut identified = 0usize;
    for seed in 0..10u64 {
        let panel = synthesize_panel(600, 4, &spec, &theta_true, 1000 + seed, &config).unwrap();
        let options = EstimationOptions::default(); // 200 Halton draws
        let result = estimate(&panel, &spec, &options).unwrap();
        for k in 0..spec.n_slots() {
            total += 1;
            let Some(se) = result.std_errors[k] else {
                continue;
            };
            identified += 1;
            let truth = theta_true.values()[k];
            let mut est = result.theta_hat.values()[k];
            // standard deviations are identified up to sign
            if k >= n_terms {
                est = est.abs();
            }
            if (est - truth).abs() <= 3.0 * se {
                within += 1;
            }
        }
    }
    let rate = within as f64 / total as f64;
    println!(
        "PASS criterion 5: {within}/{total} slot-instances within 3 standard errors ({:.1}%, identified {identified}) over 10 seeds",
        rate * 100.0
    );
    assert!(
        rate >= 0.90,
        "recovery rate {rate:.3} below 0.90 ({within}/{total})"
    );
}

#[test]
fn criterion_06_simulation_integration_consistency() {
    let (spec, theta) = reference_spec();
    let scenario = typical_scenario();

    // integration side: simulated mixed probabilities on 20k Halton draws
    let draws = prediction_draws(&spec, 20_000, 10).unwrap();
    let predicted = predict_probs(&scenario, &spec, &theta, &draws).unwrap();

    // simulation side: 12,500 respondents x 4 copies of the same scenario
    let mut counts = [0usize; 7];
    let mut total = 0usize;
    let chunk_size = 1000usize;
    let mut remaining = 12_500usize;
    let mut chunk_seed = 600u64;
    while remaining > 0 {
        let n = remaining.min(chunk_size);
        let respondents: Vec<Respondent> = (0..n)
            .map(|i| {
                let mut situations = Vec::with_capacity(4);
                for t in 0..4u32 {
                    let mut sit = scenario.situation.clone();
                    sit.situation_index = t;
                    situations.push(sit);
                }
                Respondent {
                    id: format!("c{chunk_seed}-{i}"),
                    covariates: scenario.person.clone(),
                    situations,
                }
            })
            .collect();
        let panel = simulate_choices(&respondents, &spec, &theta, chunk_seed).unwrap();
        for resp in &panel.respondents {
            for sit in &resp.situations {
                counts[sit.chosen.index()] += 1;
                total += 1;
            }
        }
        remaining -= n;
        chunk_seed += 1;
    }
    assert_eq!(total, 50_000);

    let mut worst = 0.0f64;
    for alt in AlternativeId::ALL {
        let empirical = counts[alt.index()] as f64 / total as f64;
        let gap = (empirical - predicted[alt.index()]).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 0.015,
            "{alt}: empirical {empirical:.4} vs predicted {:.4} (gap {gap:.4})",
            predicted[alt.index()]
        );
    }
    println!(
        "PASS criterion 6: empirical choice frequencies match simulated probabilities, worst gap {:.2}pp (< 1.5pp) at 50,000 situations",
        worst * 100.0
    );
}

#[test]
fn criterion_07_population_and_scenario_calibration() {
    use mixlogit::scenario::{AgeBand, Education, Employment, Gender, HouseholdSize, IncomeBand};
    let n = 10_000;
    let profiles = sample_population(n, 777);
    let share = |f: &dyn Fn(&mixlogit::scenario::PersonProfile) -> bool| {
        profiles.iter().filter(|p| f(p)).count() as f64 / n as f64 * 100.0
    };
    let marginals: Vec<(&str, f64, f64)> = vec![
        (
            "full time",
            share(&|p| p.employment == Employment::FullTime),
            72.08,
        ),
        (
            "part time",
            share(&|p| p.employment == Employment::PartTime),
            10.62,
        ),
        ("millennial (25-34)", share(&|p| p.millennial()), 32.78),
        ("age <= 24", share(&|p| p.age == AgeBand::Under25), 17.60),
        ("age 65+", share(&|p| p.senior()), 2.89),
        (
            "bachelor",
            share(&|p| p.education == Education::Bachelor),
            37.94,
        ),
        (
            "graduate",
            share(&|p| p.education == Education::Graduate),
            33.38,
        ),
        ("female", share(&|p| p.gender == Gender::Female), 54.02),
        (
            "household of 2",
            share(&|p| p.household_size == HouseholdSize::Two),
            47.80,
        ),
        (
            "income under 15K",
            share(&|p| p.income == IncomeBand::Under15K),
            6.37,
        ),
        (
            "income 100K+",
            share(&|p| p.income == IncomeBand::Over100K),
            30.80,
        ),
    ];
    for (name, got, want) in &marginals {
        assert!(
            (got - want).abs() <= 1.5,
            "{name}: sampled {got:.2}% vs published {want:.2}%"
        );
    }

    let config = GeneratorConfig::default();
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for (i, profile) in profiles.iter().enumerate() {
        let trip = sample_trip(777, i as u64);
        let sits = generate_scenarios(profile, &trip, 1, 777, i as u64, &config).unwrap();
        for name in [
            "SHUTTLE_WAIT",
            "TNC_WAIT",
            "TNC_COST",
            "DRIVE_TIME",
            "TAXI_WAIT",
        ] {
            *sums.entry(name).or_insert(0.0) +=
                sits[0].covariates[&(AlternativeId::ShuttleBus, name.to_string())];
        }
    }
    let attribute_targets = [
        ("SHUTTLE_WAIT", 46.61),
        ("TNC_WAIT", 9.55),
        ("TNC_COST", 51.53),
        ("DRIVE_TIME", 35.81),
        ("TAXI_WAIT", 21.90),
    ];
    let mut worst_rel = 0.0f64;
    for (name, want) in attribute_targets {
        let got = sums[name] / n as f64;
        let rel = (got - want).abs() / want;
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= 0.10,
            "{name}: mean {got:.2} vs published {want} ({:.1}%)",
            rel * 100.0
        );
    }
    println!(
        "PASS criterion 7: 10k-draw demographic marginals within 1.5pp and attribute means within 10% (worst {:.1}%)",
        worst_rel * 100.0
    );
}

#[test]
fn criterion_08_fit_statistic_identity() {
    let stats = fit_stats(-2733.69, -3694.18, 2459, 42).unwrap();
    assert!(
        (stats.rho2 - 0.26).abs() <= 0.005,
        "rho2 {} vs printed 0.26",
        stats.rho2
    );
    println!(
        "PASS criterion 8: fit_stats(-2733.69, -3694.18) gives rho2 = {:.5} (0.26 +- 0.005)",
        stats.rho2
    );
}

#[test]
fn criterion_09_estimate_determinism_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.toml");
    let theta_path = dir.path().join("theta.toml");
    let data_path = dir.path().join("data.csv");

    // two random constants + two fixed slopes keeps the run short
    let terms = vec![
        UtilityTerm::random(
            AlternativeId::ShuttleBus,
            Covariate::Constant,
            "asc_shuttle",
        ),
        UtilityTerm::random(AlternativeId::Tnc, Covariate::Constant, "asc_tnc"),
        UtilityTerm::fixed(
            AlternativeId::ShuttleBus,
            Covariate::named("SHUTTLE_WAIT"),
            "b_shuttle_wait",
        ),
        UtilityTerm::fixed(
            AlternativeId::Tnc,
            Covariate::named("TNC_COST"),
            "b_tnc_cost",
        ),
    ];
    let spec = ModelSpec::new(AlternativeId::AskRide, terms).unwrap();
    let theta = ParameterVector::new(vec![1.2, 0.4, -0.02, -0.02, 1.0, 0.8]);
    std::fs::write(&spec_path, mixlogit::io::write_spec(&spec).unwrap()).unwrap();
    std::fs::write(&theta_path, write_theta(&spec, &theta).unwrap()).unwrap();

    let status = bin()
        .args([
            "simulate",
            "--spec",
            spec_path.to_str().unwrap(),
            "--theta",
            theta_path.to_str().unwrap(),
            "--respondents",
            "80",
            "--situations",
            "4",
            "--seed",
            "42",
            "--out",
            data_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let run = |out: &std::path::Path| {
        let status = bin()
            .args([
                "estimate",
                "--data",
                data_path.to_str().unwrap(),
                "--spec",
                spec_path.to_str().unwrap(),
                "--draws",
                "100",
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "estimate run failed");
        std::fs::read(out).unwrap()
    };
    let first = run(&dir.path().join("out1.toml"));
    let second = run(&dir.path().join("out2.toml"));
    assert_eq!(first, second, "results documents differ between runs");

    // replay: re-evaluating the likelihood at the document's estimates
    // with its echoed settings reproduces ll_final
    let doc = read_results(std::str::from_utf8(&first).unwrap()).unwrap();
    let panel = mixlogit::io::read_panel_path(&data_path).unwrap();
    let replayed = doc.replay_loglik(&panel).unwrap();
    let gap = (replayed - doc.fit.ll_final).abs();
    assert!(gap < 1e-9, "replay gap {gap}");
    println!("PASS criterion 9: byte-identical results documents; replay gap {gap:.3e} (< 1e-9)");
}

#[test]
fn criterion_10_sweep_monotonicity() {
    let (spec, theta) = reference_spec();
    let scenario = typical_scenario();
    let draws = prediction_draws(&spec, 500, 10).unwrap();

    let shuttle = AlternativeId::ShuttleBus.index();
    let table = attribute_sweep(
        &scenario,
        &spec,
        &theta,
        "SHUTTLE_WAIT",
        &[0.0, 30.0, 60.0, 120.0],
        &draws,
    )
    .unwrap();
    for w in table.rows.windows(2) {
        assert!(
            w[1][shuttle] < w[0][shuttle],
            "shuttle share not strictly decreasing: {:?}",
            table.rows.iter().map(|r| r[shuttle]).collect::<Vec<_>>()
        );
    }

    let tnc = AlternativeId::Tnc.index();
    let table = attribute_sweep(
        &scenario,
        &spec,
        &theta,
        "TNC_COST",
        &[5.0, 20.0, 50.0, 100.0],
        &draws,
    )
    .unwrap();
    for w in table.rows.windows(2) {
        assert!(
            w[1][tnc] < w[0][tnc],
            "tnc share not strictly decreasing: {:?}",
            table.rows.iter().map(|r| r[tnc]).collect::<Vec<_>>()
        );
    }
    println!("PASS criterion 10: shuttle share strictly decreasing in SHUTTLE_WAIT and TNC share in TNC_COST at the reference estimates");
}
