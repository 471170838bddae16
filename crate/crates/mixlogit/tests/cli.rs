//! End-to-end tests of the command-line surface and its exit-code
//! contract: 0 ok, 1 usage, 2 data/parse, 3 non-convergence/diagnostic.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mixlogit::choice::AlternativeId;
use mixlogit::io::{read_panel_path, write_spec, write_theta};
use mixlogit::model::{Covariate, ModelSpec, ParameterVector, UtilityTerm};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixlogit"))
}

struct Fixture {
    _dir: tempfile::TempDir,
    spec: PathBuf,
    theta: PathBuf,
    data: PathBuf,
    root: PathBuf,
}

/// Writes a small mixed-logit spec, its generating parameters, and a
/// simulated 60-respondent panel.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let spec = ModelSpec::new(
        AlternativeId::AskRide,
        vec![
            UtilityTerm::random(
                AlternativeId::ShuttleBus,
                Covariate::Constant,
                "asc_shuttle",
            ),
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
        ],
    )
    .unwrap();
    let theta = ParameterVector::new(vec![1.5, -0.02, -0.02, 1.0]);
    let spec_path = root.join("spec.toml");
    let theta_path = root.join("theta.toml");
    let data_path = root.join("data.csv");
    fs::write(&spec_path, write_spec(&spec).unwrap()).unwrap();
    fs::write(&theta_path, write_theta(&spec, &theta).unwrap()).unwrap();

    let status = bin()
        .args([
            "simulate",
            "--spec",
            spec_path.to_str().unwrap(),
            "--theta",
            theta_path.to_str().unwrap(),
            "--respondents",
            "60",
            "--situations",
            "4",
            "--seed",
            "11",
            "--out",
            data_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    Fixture {
        _dir: dir,
        spec: spec_path,
        theta: theta_path,
        data: data_path,
        root,
    }
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_accepts_generated_data() {
    let fx = fixture();
    let output = bin()
        .args(["validate", "--data", arg(&fx.data)])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("panel ok"));
}

#[test]
fn validate_rejects_chosen_unavailable_with_listing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    let mut rows = String::from("respondent_id,situation_id,alt,avail,chosen\n");
    for (alt, (avail, chosen)) in
        AlternativeId::ALL
            .iter()
            .zip([(1, 0), (0, 1), (1, 0), (1, 0), (1, 0), (1, 0), (1, 0)])
    {
        rows.push_str(&format!("a,0,{},{},{}\n", alt.as_str(), avail, chosen));
    }
    fs::write(&bad, rows).unwrap();
    let output = bin()
        .args(["validate", "--data", arg(&bad)])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("chosen") && stderr.contains("unavailable"),
        "stderr: {stderr}"
    );
}

#[test]
fn gradcheck_passes_on_generated_data() {
    let fx = fixture();
    let output = bin()
        .args([
            "gradcheck",
            "--data",
            arg(&fx.data),
            "--spec",
            arg(&fx.spec),
            "--seed",
            "3",
            "--draws",
            "40",
            "--points",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{:?}", output);
    assert!(String::from_utf8_lossy(&output.stdout).contains("worst relative error"));
}

#[test]
fn estimate_flags_nonconvergence_with_exit_3() {
    let fx = fixture();
    let out = fx.root.join("results.toml");
    let output = bin()
        .args([
            "estimate",
            "--data",
            arg(&fx.data),
            "--spec",
            arg(&fx.spec),
            "--draws",
            "40",
            "--max-iter",
            "1",
            "--start",
            "zero",
            "--out",
            arg(&out),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    // the best iterate is still written
    assert!(out.exists());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("converged = false"));
}

#[test]
fn sweep_writes_plot_ready_table() {
    let fx = fixture();
    // single-situation scenario file: reuse the first situation of the data
    let panel = read_panel_path(&fx.data).unwrap();
    let mut one = panel.clone();
    one.respondents.truncate(1);
    one.respondents[0].situations.truncate(1);
    let scenario_path = fx.root.join("scenario.csv");
    let mut buf = Vec::new();
    mixlogit::io::write_panel(&one, &mut buf).unwrap();
    fs::write(&scenario_path, buf).unwrap();

    let out = fx.root.join("sweep.csv");
    let output = bin()
        .args([
            "sweep",
            "--spec",
            arg(&fx.spec),
            "--theta",
            arg(&fx.theta),
            "--scenario",
            arg(&scenario_path),
            "--covariate",
            "SHUTTLE_WAIT",
            "--from",
            "0",
            "--to",
            "120",
            "--step",
            "30",
            "--draws",
            "100",
            "--out",
            arg(&out),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{:?}", output);
    let table = fs::read_to_string(&out).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "value,ask_ride,auto,shuttle_bus,taxi,tnc,change_destination,cancel_trip"
    );
    let shares: Vec<f64> = lines
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(shares.len(), 5);
    for w in shares.windows(2) {
        assert!(w[1] < w[0], "shuttle share not decreasing: {shares:?}");
    }
}

#[test]
fn predict_covers_every_observation() {
    let fx = fixture();
    let out = fx.root.join("pred.csv");
    let output = bin()
        .args([
            "predict",
            "--spec",
            arg(&fx.spec),
            "--theta",
            arg(&fx.theta),
            "--data",
            arg(&fx.data),
            "--draws",
            "50",
            "--out",
            arg(&out),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 60 * 4);
    for line in &lines[1..] {
        let probs: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|v| v.parse().unwrap())
            .collect();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-4, "row sums to {sum}");
    }
}

#[test]
fn simulate_honors_generator_config() {
    let fx = fixture();
    let config_path = fx.root.join("gen.toml");
    fs::write(&config_path, "vehicle_access_rate = 0.0\n").unwrap();
    let data = fx.root.join("no_auto.csv");
    let status = bin()
        .args([
            "simulate",
            "--spec",
            arg(&fx.spec),
            "--theta",
            arg(&fx.theta),
            "--respondents",
            "20",
            "--seed",
            "5",
            "--config",
            arg(&config_path),
            "--out",
            arg(&data),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let panel = read_panel_path(&data).unwrap();
    for resp in &panel.respondents {
        for sit in &resp.situations {
            assert!(!sit.availability.is_available(AlternativeId::Auto));
        }
    }
}

#[test]
fn sign_share_prints_three_decimals() {
    let output = bin()
        .args(["sign-share", "--mean", "-0.050", "--sd", "0.082"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "0.729");

    let output = bin()
        .args([
            "sign-share",
            "--mean",
            "-0.050",
            "--sd",
            "0.082",
            "--direction",
            "positive",
        ])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&output.stdout).trim(), "0.271");
}
