use proptest::prelude::*;
use vqfe::bounds::{fidelity_spectrum, SpectrumOptions};
use vqfe::fidelity::{fidelity, ssfb};
use vqfe::states::{random_density_purity, random_density_rank};
use vqfe::vqsd::{self, AnsatzSpec, OptimizeOptions};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certified_interval_holds_fidelity(
        n in 1usize..=3,
        rank in 1usize..=8,
        purity in 0.0f64..1.0,
        strength in 0.0f64..0.1,
        seed in any::<u64>(),
    ) {
        let d = 1 << n;
        let rho = random_density_rank(d, rank.min(d), seed).unwrap();
        let sigma = random_density_purity(d, 1.0 / d as f64 + purity * (1.0 - 1.0 / d as f64) * 0.99, seed ^ 1).unwrap();
        let diag = vqsd::perturbed_diagonalization(&rho, strength, seed ^ 2).unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        let spec = fidelity_spectrum(&rho, &sigma, &diag, d, &SpectrumOptions::exact()).unwrap();
        for r in &spec.reports {
            prop_assert!(r.certified_interval().contains(f, 1e-8), "m={} {:?} F={}", r.m, r.certified_interval(), f);
            prop_assert!(r.certified);
        }
    }

    #[test]
    fn exact_truncation_reaches_fidelity(n in 1usize..=3, seed in any::<u64>()) {
        let d = 1 << n;
        let rho = random_density_rank(d, d, seed).unwrap();
        let sigma = random_density_rank(d, d, seed ^ 5).unwrap();
        let diag = vqsd::exact_diagonalization(&rho).unwrap();
        let spec = fidelity_spectrum(&rho, &sigma, &diag, d, &SpectrumOptions::exact()).unwrap();
        let last = spec.reports.last().unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        prop_assert!((last.tfb_low - f).abs() < 1e-7);
        prop_assert!((last.tfb_up - f).abs() < 1e-7);
    }
}

#[test]
fn variational_pipeline_end_to_end() {
    let rho = random_density_rank(4, 2, 31).unwrap();
    let sigma = random_density_rank(4, 4, 32).unwrap();
    let opts = OptimizeOptions {
        seed: 33,
        ..OptimizeOptions::default()
    };
    let diag = vqsd::optimize(&rho, &AnsatzSpec::layered(2, 3), &opts).unwrap();
    assert!(diag.cost < 1e-6, "cost {}", diag.cost);
    let f = fidelity(&rho, &sigma).unwrap();
    let (e, g) = ssfb(&rho, &sigma).unwrap();
    let spec = fidelity_spectrum(&rho, &sigma, &diag, 4, &SpectrumOptions::exact()).unwrap();
    let r2 = &spec.reports[1];
    assert!(r2.certified_interval().contains(f, 1e-8));
    assert!(r2.certified_interval().width() < g - e);
}

// Two layers cannot reach every two-qubit eigenbasis, so the cost stalls well
// above zero; the certified interval must still contain F.
#[test]
fn underexpressive_ansatz_stays_certified() {
    let rho = random_density_rank(4, 2, 32).unwrap();
    let sigma = random_density_rank(4, 4, 34).unwrap();
    let opts = OptimizeOptions {
        seed: 33,
        ..OptimizeOptions::default()
    };
    let diag = vqsd::optimize(&rho, &AnsatzSpec::layered(2, 2), &opts).unwrap();
    assert!(diag.cost > 1e-4);
    let f = fidelity(&rho, &sigma).unwrap();
    let spec = fidelity_spectrum(&rho, &sigma, &diag, 4, &SpectrumOptions::exact()).unwrap();
    for r in &spec.reports {
        assert!(r.certified_interval().contains(f, 1e-8), "m={}", r.m);
    }
}

#[test]
fn sampled_pipeline_tracks_exact() {
    let rho = random_density_rank(8, 3, 41).unwrap();
    let sigma = random_density_rank(8, 8, 42).unwrap();
    let diag = vqsd::exact_diagonalization(&rho).unwrap();
    let exact = fidelity_spectrum(&rho, &sigma, &diag, 3, &SpectrumOptions::exact()).unwrap();
    let noisy = fidelity_spectrum(&rho, &sigma, &diag, 3, &SpectrumOptions::sampled(200_000, 43)).unwrap();
    for (a, b) in exact.reports.iter().zip(&noisy.reports) {
        assert!((a.tfb_low - b.tfb_low).abs() < 0.02);
        assert!(!b.certified);
        assert_eq!(b.circuits, 2 * b.m * b.m);
    }
}
