//! How many eigenvectors are needed before the truncated bounds beat SSFB.
//!
//! ```bash
//! cargo run --release --example mstar_scaling
//! ```

use vqfe::bench::config::Ensemble;
use vqfe::bench::{run, Experiment, ExperimentConfig};

fn main() -> vqfe::Result<()> {
    for ensemble in [Ensemble::LowRank, Ensemble::HighPurity] {
        let mut cfg = ExperimentConfig::new(Experiment::MstarScaling);
        cfg.seed = 5;
        cfg.mstar_scaling.ensemble = ensemble;
        cfg.mstar_scaling.n_max = 4;
        cfg.mstar_scaling.trials = 40;
        let record = run(&cfg)?;
        println!("{ensemble:?}");
        for s in &record.mstar_summary {
            let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
            println!(
                "  n = {}  m*_TFB = {} (undefined {})  m*_certified = {}",
                s.n,
                show(s.tfb.mean),
                s.tfb.undefined,
                show(s.certified.mean)
            );
        }
    }
    Ok(())
}
