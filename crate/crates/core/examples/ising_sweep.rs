//! Fidelity between neighbouring thermal states of the transverse-field Ising
//! chain. The dip in the lower bound marks the critical field.
//!
//! ```bash
//! cargo run --release --example ising_sweep
//! ```

use vqfe::bench::{run, Experiment, ExperimentConfig};

fn main() -> vqfe::Result<()> {
    let mut cfg = ExperimentConfig::new(Experiment::IsingSweep);
    cfg.ising_sweep.n_spins = 6;
    cfg.ising_sweep.h_step = 0.05;
    let record = run(&cfg)?;
    println!(" m   argmin low   argmin up   window   min low");
    for w in &record.ising_windows {
        println!(
            "{:>2}   {:>10.2}   {:>9.2}   {:>6.2}   {:.5}",
            w.m, w.argmin_low, w.argmin_up, w.window, w.min_low
        );
    }
    Ok(())
}
