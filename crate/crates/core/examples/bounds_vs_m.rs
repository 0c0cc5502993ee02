//! Drive the bounds-vs-m experiment from a TOML config and write CSV.
//!
//! ```bash
//! cargo run --release --example bounds_vs_m -- /tmp/bounds.csv
//! ```

use std::path::PathBuf;

use vqfe::bench::{emit, run, ExperimentConfig, Format};

const CONFIG: &str = r#"
experiment = "bounds_vs_m"
seed = 3
mode = "exact"

[bounds_vs_m]
n_qubits = 3
trials = 2
rho = { kind = "tensor", factor_ranks = [2, 2, 1] }
sigma = { kind = "rank", rank = 8 }
"#;

fn main() -> vqfe::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let record = run(&cfg)?;
    for row in record.rows.iter().filter(|r| r.trial == 0) {
        println!(
            "m = {}  F in [{:.5}, {:.5}]  SSFB [{:.5}, {:.5}]",
            row.m, row.certified_low, row.certified_up, row.ssfb_low, row.ssfb_up
        );
    }
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bounds_vs_m.csv"));
    for path in emit(&record, Format::Csv, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
