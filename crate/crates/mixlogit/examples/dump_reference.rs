//! Writes the bundled reference model (spec and point estimates) as TOML
//! documents, ready for the `simulate`, `estimate`, `predict`, and `sweep`
//! subcommands.
//!
//! Usage: cargo run -p mixlogit --example dump_reference -- [out_dir]

use std::fs;
use std::path::PathBuf;

use mixlogit::io::{write_spec, write_theta};
use mixlogit::model::reference_spec;

fn main() {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).expect("create output directory");

    let (spec, theta) = reference_spec();
    let spec_path = out_dir.join("reference_spec.toml");
    let theta_path = out_dir.join("reference_theta.toml");
    fs::write(&spec_path, write_spec(&spec).unwrap()).expect("write spec");
    fs::write(&theta_path, write_theta(&spec, &theta).unwrap()).expect("write theta");
    println!("wrote {}", spec_path.display());
    println!("wrote {}", theta_path.display());
}
