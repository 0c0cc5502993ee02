//! Bounds from an imperfect diagonalization. The unitary is a small random
//! rotation away from the exact eigenbasis, so the truncated bounds alone are
//! no longer guaranteed; the certified interval is.
//!
//! ```bash
//! cargo run --release --example certified_bounds
//! ```

use vqfe::bounds::{fidelity_spectrum, SpectrumOptions};
use vqfe::fidelity::{fidelity, ssfb};
use vqfe::states::{random_density_purity, random_density_rank};
use vqfe::vqsd;

fn main() -> vqfe::Result<()> {
    let rho = random_density_rank(8, 3, 11)?;
    let sigma = random_density_purity(8, 0.4, 12)?;
    let f = fidelity(&rho, &sigma)?;
    let (e, g) = ssfb(&rho, &sigma)?;
    println!("F = {f:.6}   SSFB = [{e:.6}, {g:.6}]");

    let diag = vqsd::perturbed_diagonalization(&rho, 0.05, 13)?;
    println!("cost C = {:.3e}", diag.cost);
    let spec = fidelity_spectrum(&rho, &sigma, &diag, 8, &SpectrumOptions::exact())?;
    println!(" m   tfb_low   tfb_up    ccfb_low  ccfb_up   cert_low  cert_up");
    for r in &spec.reports {
        println!(
            "{:>2}   {:.5}   {:.5}   {:.5}   {:.5}   {:.5}   {:.5}",
            r.m, r.tfb_low, r.tfb_up, r.ccfb_low, r.ccfb_up, r.certified_low, r.certified_up
        );
    }
    let best = spec
        .reports
        .iter()
        .min_by(|a, b| a.certified_interval().width().total_cmp(&b.certified_interval().width()))
        .expect("at least one level");
    for k in &best.ctib {
        println!("  m = {} {:?}: [{:.5}, {:.5}]", best.m, k.kind, k.low, k.up);
    }
    Ok(())
}
