//! Randomized checks of the inequalities the bounds rest on. Pass `--fault`
//! to disable the PSD repair and watch the suite catch it.
//!
//! ```bash
//! cargo run --release --example property_suite -- --fault
//! ```

use vqfe::bench::{run, Experiment, ExperimentConfig};

fn main() -> vqfe::Result<()> {
    let mut cfg = ExperimentConfig::new(Experiment::PropertySuite);
    cfg.seed = 1;
    cfg.property_suite.instances = 200;
    cfg.property_suite.fault_injection = std::env::args().any(|a| a == "--fault");
    let record = run(&cfg)?;
    for c in &record.checks {
        let flag = if c.violations == 0 { "ok  " } else { "FAIL" };
        println!("{flag} {:<32} {:>4}/{:<4} worst slack {:+.2e}", c.name, c.violations, c.instances, c.worst_slack);
    }
    println!("{} violations", record.violations());
    Ok(())
}
