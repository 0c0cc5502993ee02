//! Variationally diagonalize a three-qubit product state and compare the
//! inferred spectrum with the exact one.
//!
//! ```bash
//! cargo run --release --example diagonalize
//! ```

use vqfe::bench::config::StateSpec;
use vqfe::bench::experiments::draw_state;
use vqfe::vqsd::{self, AnsatzSpec, OptimizeOptions};

fn main() -> vqfe::Result<()> {
    let spec = StateSpec::Tensor {
        factor_ranks: vec![2, 2, 1],
    };
    let rho = draw_state(&spec, 3, 7)?;
    let opts = OptimizeOptions {
        seed: 7,
        ..OptimizeOptions::default()
    };
    for (name, ansatz) in [
        ("product", AnsatzSpec::product(3)),
        ("layered(2)", AnsatzSpec::layered(3, 2)),
    ] {
        let diag = vqsd::optimize(&rho, &ansatz, &opts)?;
        println!(
            "{name:>10}: {} params, C = {:.2e} after {} evaluations (converged: {})",
            ansatz.param_count(),
            diag.cost,
            diag.evaluations,
            diag.converged
        );
        for (k, (inferred, exact)) in diag.spectrum.iter().zip(rho.eigenvalues()).enumerate().take(4) {
            println!("    r'_{} = {inferred:.6}   lambda_{} = {exact:.6}", k + 1, k + 1);
        }
    }
    Ok(())
}
