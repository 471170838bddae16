//! Diagnostic consistency of the published reference model against the
//! synthetic scenario generator: the predicted action mix should show the
//! same headline pattern as the survey sample (backup shuttle first).
//! This is a calibration-dependent soft check, looser than the acceptance
//! criteria.

use mixlogit::analytics::{predicted_shares, prediction_draws, Scenario};
use mixlogit::choice::AlternativeId;
use mixlogit::model::reference_spec;
use mixlogit::scenario::{generate_scenarios, sample_population, sample_trip, GeneratorConfig};

#[test]
fn bundled_reference_documents_stay_in_sync() {
    let (spec, theta) = reference_spec();
    let spec_text = include_str!("../data/reference_spec.toml");
    let theta_text = include_str!("../data/reference_theta.toml");
    assert_eq!(mixlogit::io::read_spec(spec_text).unwrap(), spec);
    assert_eq!(mixlogit::io::read_theta(theta_text, &spec).unwrap(), theta);
}

#[test]
fn shuttle_is_the_modal_predicted_action_on_a_generator_batch() {
    let (spec, theta) = reference_spec();
    let config = GeneratorConfig::default();
    let draws = prediction_draws(&spec, 300, 10).unwrap();

    // 10,000 generated scenarios, averaged in equal-size chunks so the
    // covariate rectangles never all live in memory at once
    let n_chunks = 10;
    let chunk = 1_000;
    let mut total = [0.0f64; 7];
    for c in 0..n_chunks {
        let seed = 9_000 + c as u64;
        let profiles = sample_population(chunk, seed);
        let mut scenarios = Vec::with_capacity(chunk);
        for (i, profile) in profiles.iter().enumerate() {
            let trip = sample_trip(seed, i as u64);
            let sits = generate_scenarios(profile, &trip, 1, seed, i as u64, &config).unwrap();
            scenarios.push(Scenario {
                person: profile.to_covariates(),
                situation: sits.into_iter().next().unwrap(),
            });
        }
        let row = predicted_shares(&scenarios, &spec, &theta, &draws).unwrap();
        for (t, r) in total.iter_mut().zip(&row) {
            *t += r / n_chunks as f64;
        }
    }

    let sum: f64 = total.iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
    let shuttle = total[AlternativeId::ShuttleBus.index()];
    let modal = total.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("predicted shares on 10k generated scenarios:");
    for alt in AlternativeId::ALL {
        println!("  {:<20} {:>6.3}", alt.as_str(), total[alt.index()]);
    }
    assert_eq!(
        shuttle, modal,
        "shuttle should be the modal predicted action, shares {total:?}"
    );
}
