//! Estimate the matrix elements with simulated swap tests and watch the error
//! fall as one over the square root of the shot count.
//!
//! ```bash
//! cargo run --release --example shot_noise
//! ```

use vqfe::bounds::{fidelity_spectrum, SpectrumOptions};
use vqfe::fidelity::fidelity;
use vqfe::measure::{elements_exact, elements_sampled, Sampling};
use vqfe::states::random_density_rank;
use vqfe::vqsd;

fn main() -> vqfe::Result<()> {
    let rho = random_density_rank(8, 2, 21)?;
    let sigma = random_density_rank(8, 8, 22)?;
    let v = &rho.spectrum().eigenvectors;
    let exact = elements_exact(&sigma, v, 4)?;
    println!("  shots   rms error   rms*sqrt(shots)   circuits");
    for shots in [100u64, 1_000, 10_000, 100_000] {
        let table = elements_sampled(&sigma, v, 4, Sampling::Shots(shots), 23)?;
        let rms = (&table.entries - &exact.entries).norm() / 4.0;
        println!("{shots:>7}   {rms:.3e}   {:>15.3}   {:>8}", rms * (shots as f64).sqrt(), table.circuits);
    }

    let diag = vqsd::exact_diagonalization(&rho)?;
    let f = fidelity(&rho, &sigma)?;
    let spec = fidelity_spectrum(&rho, &sigma, &diag, 2, &SpectrumOptions::sampled(10_000, 24))?;
    let r = &spec.reports[1];
    println!(
        "m = 2 with 1e4 shots: tfb_low = {:.5}, gamma = {:.5}, |F - tfb_low| = {:.5}",
        r.tfb_low,
        r.gamma,
        (f - r.tfb_low).abs()
    );
    Ok(())
}
