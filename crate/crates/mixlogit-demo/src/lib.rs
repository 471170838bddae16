//! Browser bindings for the mixed logit toolkit. Three interactive
//! operations on the published transit-disruption model: sign-share
//! exploration of a normal coefficient, predicted-share curves along an
//! attribute grid, and scenario prediction with adjustable attributes.
//!
//! Every function returns a JSON string; failures come back as
//! `{"error": "..."}` so the page can surface them without unwinding
//! across the boundary.

use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use mixlogit::analytics::{
    attribute_sweep, predict_probs, prediction_draws, sign_share, Direction, Scenario,
};
use mixlogit::choice::AlternativeId;
use mixlogit::model::reference_spec;
use mixlogit::scenario::typical_scenario;

fn err_json(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

fn alternative_ids() -> Vec<&'static str> {
    AlternativeId::ALL.iter().map(|a| a.as_str()).collect()
}

/// Population split of a N(mean, sd^2) coefficient around zero, plus the
/// density curve for drawing: `{negative, positive, curve: [[x, pdf], ..]}`.
#[wasm_bindgen]
pub fn sign_share_report(mean: f64, sd: f64) -> String {
    let negative = sign_share(mean, sd, Direction::Negative);
    let positive = sign_share(mean, sd, Direction::Positive);
    let spread = sd.abs().max(1e-6);
    let lo = mean - 4.0 * spread;
    let hi = mean + 4.0 * spread;
    let n = 161;
    let curve: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let z = (x - mean) / spread;
            let pdf = (-0.5 * z * z).exp() / (spread * (2.0 * std::f64::consts::PI).sqrt());
            [x, pdf]
        })
        .collect();
    json!({
        "mean": mean,
        "sd": sd.abs(),
        "negative": negative,
        "positive": positive,
        "curve": curve,
    })
    .to_string()
}

/// Predicted-share curves for one covariate grid at the published
/// estimates, on the representative scenario:
/// `{grid: [..], alternatives: [..], shares: [[7 shares per point], ..]}`.
#[wasm_bindgen]
pub fn reference_sweep(covariate: &str, from: f64, to: f64, points: usize, draws: usize) -> String {
    if points < 2 || to <= from {
        return err_json("grid needs at least 2 points and to > from");
    }
    let (spec, theta) = reference_spec();
    let scenario = typical_scenario();
    let grid: Vec<f64> = (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect();
    let draw_set = match prediction_draws(&spec, draws.clamp(16, 5000), 10) {
        Ok(d) => d,
        Err(e) => return err_json(e),
    };
    match attribute_sweep(&scenario, &spec, &theta, covariate, &grid, &draw_set) {
        Ok(table) => json!({
            "grid": grid,
            "alternatives": alternative_ids(),
            "shares": table.rows,
        })
        .to_string(),
        Err(e) => err_json(e),
    }
}

/// Mixed choice probabilities for the representative scenario with
/// attribute and person overrides, at the published estimates. The
/// overrides document is a flat JSON object: numeric covariate names
/// (SHUTTLE_WAIT, TNC_COST, ...) plus the boolean `has_vehicle_access`.
/// Shuttle-wait overrides propagate into the service-specific interaction
/// column so the curve reflects a CTA-rail scenario end to end.
#[wasm_bindgen]
pub fn reference_prediction(overrides_json: &str) -> String {
    let overrides: Value = match serde_json::from_str(overrides_json) {
        Ok(v) => v,
        Err(e) => return err_json(format!("bad overrides document: {e}")),
    };
    let Some(map) = overrides.as_object() else {
        return err_json("overrides must be a JSON object");
    };

    let (spec, theta) = reference_spec();
    let mut scenario: Scenario = typical_scenario();

    for (key, value) in map {
        if key == "has_vehicle_access" {
            let access = value.as_bool().unwrap_or(true);
            scenario
                .situation
                .availability
                .set(AlternativeId::Auto, access);
            continue;
        }
        let Some(number) = value.as_f64() else {
            return err_json(format!("override `{key}` must be a number"));
        };
        if scenario.person.contains_key(key) {
            scenario.person.insert(key.clone(), number);
            continue;
        }
        let mut known = false;
        for alt in AlternativeId::ALL {
            if let Some(cell) = scenario.situation.covariates.get_mut(&(alt, key.clone())) {
                *cell = number;
                known = true;
            }
        }
        if !known {
            return err_json(format!("unknown covariate `{key}`"));
        }
        // the representative trip is CTA rail, so its service-specific
        // shuttle wait column tracks the headline wait
        if key == "SHUTTLE_WAIT" {
            for alt in AlternativeId::ALL {
                scenario
                    .situation
                    .covariates
                    .insert((alt, "SHUTTLE_WAIT_CTA_RAIL".to_string()), number);
            }
        }
    }

    let draws = match prediction_draws(&spec, 500, 10) {
        Ok(d) => d,
        Err(e) => return err_json(e),
    };
    match predict_probs(&scenario, &spec, &theta, &draws) {
        Ok(shares) => json!({
            "alternatives": alternative_ids(),
            "shares": shares,
        })
        .to_string(),
        Err(e) => err_json(e),
    }
}
