//! Fidelity, sub- and super-fidelity, ε-rank, spectral truncation and the
//! truncated fidelity bounds, plus the fidelity-derived distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{self, CMat};
use crate::states::{DensityMatrix, RANK_THRESHOLD};

/// Radicands of analytically nonnegative expressions are clamped to zero
/// above this value and rejected below it.
pub const RADICAND_TOL: f64 = 1e-12;

/// Slack used when comparing a tail sum against ε.
const EPS_RANK_SLACK: f64 = 1e-12;

pub(crate) fn clamp_radicand(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -RADICAND_TOL {
        Ok(0.0)
    } else {
        Err(Error::NegativeRadicand(x))
    }
}

fn check_dims(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    Ok(())
}

/// `‖√A √B‖₁` for PSD matrices given their square roots.
pub fn root_fidelity(sqrt_a: &CMat, sqrt_b: &CMat) -> Result<f64> {
    qmat::trace_norm(&(sqrt_a * sqrt_b))
}

/// Uhlmann fidelity `‖√ρ √σ‖₁`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    root_fidelity(rho.sqrt(), sigma.sqrt())
}

/// Relative size of accumulated roundoff in a trace over `d × d` products.
fn roundoff_scale(d: usize) -> f64 {
    4.0 * d as f64 * f64::EPSILON
}

/// Sub-fidelity `E = Tr ρσ + √(2[(Tr ρσ)² − Tr ρσρσ])`.
pub fn sub_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let rs = rho.matrix() * sigma.matrix();
    let overlap = qmat::trace(&rs).re;
    let second = qmat::trace_product(&rs, &rs).re;
    let floor = roundoff_scale(rho.dim()) * (overlap * overlap).max(second.abs());
    let radicand = clamp_radicand(overlap * overlap - second)?;
    Ok(overlap + qmat::floored_sqrt(2.0 * radicand, 2.0 * floor))
}

/// Super-fidelity `G = Tr ρσ + √((1 − Tr ρ²)(1 − Tr σ²))`.
pub fn super_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let overlap = qmat::trace_product(rho.matrix(), sigma.matrix()).re;
    let floor = roundoff_scale(rho.dim());
    let mixedness = |p: f64| -> Result<f64> {
        let x = clamp_radicand(1.0 - p)?;
        Ok(if x > floor { x } else { 0.0 })
    };
    let a = mixedness(rho.purity())?;
    let b = mixedness(sigma.purity())?;
    Ok(overlap + (a * b).sqrt())
}

/// `(√E, √G)`.
pub fn ssfb(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<(f64, f64)> {
    Ok((
        sub_fidelity(rho, sigma)?.max(0.0).sqrt(),
        super_fidelity(rho, sigma)?.max(0.0).sqrt(),
    ))
}

/// ε-rank of a PSD spectrum sorted descending: the least `m ≥ 1` whose tail
/// `Σ_{i>m} λ_i` is at most ε. At ε = 0 this is the count of eigenvalues
/// above [`RANK_THRESHOLD`].
pub fn epsilon_rank_of_spectrum(eigenvalues: &[f64], eps: f64) -> usize {
    if eigenvalues.is_empty() {
        return 0;
    }
    if eps <= 0.0 {
        return eigenvalues
            .iter()
            .filter(|&&x| x > RANK_THRESHOLD)
            .count()
            .max(1);
    }
    let d = eigenvalues.len();
    let mut tail: f64 = eigenvalues.iter().map(|x| x.max(0.0)).sum();
    for (m, &lam) in eigenvalues.iter().enumerate() {
        tail -= lam.max(0.0);
        if tail <= eps + EPS_RANK_SLACK {
            return m + 1;
        }
    }
    d
}

pub fn epsilon_rank(rho: &DensityMatrix, eps: f64) -> usize {
    epsilon_rank_of_spectrum(rho.eigenvalues(), eps)
}

/// `ρ_m = Π ρ Π` and `σ_m = Π σ Π` for the projector Π onto the top-m
/// eigenvectors of ρ.
#[derive(Debug, Clone)]
pub struct TruncatedPair {
    pub m: usize,
    pub rho_m: CMat,
    pub sigma_m: CMat,
    pub tr_rho_m: f64,
    pub tr_sigma_m: f64,
    /// `Σ_{i>m} r_i`, computed from the discarded eigenvalues.
    pub tail_rho_m: f64,
    sqrt_rho_m: CMat,
}

impl TruncatedPair {
    pub fn sqrt_rho_m(&self) -> &CMat {
        &self.sqrt_rho_m
    }
}

pub fn truncate(rho: &DensityMatrix, sigma: &DensityMatrix, m: usize) -> Result<TruncatedPair> {
    check_dims(rho, sigma)?;
    let d = rho.dim();
    if m == 0 || m > d {
        return Err(Error::InvalidArgument(format!("truncation level {m} outside 1..={d}")));
    }
    let spec = rho.spectrum();
    let vm = spec.eigenvectors.columns(0, m).into_owned();
    let weights = &spec.eigenvalues[..m];
    let weighted = |f: &dyn Fn(f64) -> f64| {
        let mut scaled = vm.clone();
        for (k, &w) in weights.iter().enumerate() {
            scaled.column_mut(k).scale_mut(f(w));
        }
        &scaled * vm.adjoint()
    };
    let rho_m = weighted(&|w| w);
    let floor = qmat::roundoff_floor(&spec.eigenvalues);
    let sqrt_rho_m = weighted(&|w| qmat::floored_sqrt(w, floor));
    let proj = &vm * vm.adjoint();
    let sigma_m = &proj * sigma.matrix() * &proj;
    let tr_rho_m = weights.iter().sum();
    let tr_sigma_m = qmat::trace(&sigma_m).re;
    let tail_rho_m = spec.eigenvalues[m..]
        .iter()
        .filter(|&&x| x > floor)
        .sum();
    Ok(TruncatedPair {
        m,
        rho_m,
        sigma_m,
        tr_rho_m,
        tr_sigma_m,
        tail_rho_m,
        sqrt_rho_m,
    })
}

/// `‖√ρ_m √σ‖₁`, a lower bound on `F(ρ, σ)`.
pub fn truncated_fidelity(tp: &TruncatedPair, sigma: &DensityMatrix) -> Result<f64> {
    root_fidelity(tp.sqrt_rho_m(), sigma.sqrt())
}

/// Truncated fidelity plus `√((1 − Tr ρ_m)(1 − Tr σ_m))`, an upper bound on
/// `F(ρ, σ)`.
pub fn truncated_generalized_fidelity(tp: &TruncatedPair, sigma: &DensityMatrix) -> Result<f64> {
    Ok(truncated_fidelity(tp, sigma)? + deficit_term(tp.tail_rho_m, 1.0 - tp.tr_sigma_m)?)
}

/// Trace deficits at or below this are roundoff.
pub const DEFICIT_FLOOR: f64 = 64.0 * f64::EPSILON;

/// `√(a b)` for the trace deficits `a = 1 − Tr ρ_m`, `b = 1 − Tr σ_m`, each
/// clamped from roundoff.
pub fn deficit_term(rho_deficit: f64, sigma_deficit: f64) -> Result<f64> {
    let floor = |x: f64| -> Result<f64> {
        let x = clamp_radicand(x)?;
        Ok(if x > DEFICIT_FLOOR { x } else { 0.0 })
    };
    Ok((floor(rho_deficit)? * floor(sigma_deficit)?).sqrt())
}

/// Fidelity-derived distances, all strictly decreasing in the fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `arccos F`
    BuresAngle,
    /// `√(2 − 2F)`
    BuresDistance,
    /// `√(1 − F²)`
    Sine,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [
        MetricKind::BuresAngle,
        MetricKind::BuresDistance,
        MetricKind::Sine,
    ];

    /// Value of the distance at `F = 0`.
    pub fn max_value(self) -> f64 {
        match self {
            MetricKind::BuresAngle => std::f64::consts::FRAC_PI_2,
            MetricKind::BuresDistance => std::f64::consts::SQRT_2,
            MetricKind::Sine => 1.0,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            MetricKind::BuresAngle => "angle",
            MetricKind::BuresDistance => "bures",
            MetricKind::Sine => "sine",
        }
    }
}

const METRIC_CLAMP: f64 = 1e-9;

fn clamp_unit(x: f64, hi: f64, what: &str) -> Result<f64> {
    if x < -METRIC_CLAMP || x > hi + METRIC_CLAMP || x.is_nan() {
        return Err(Error::InvalidArgument(format!("{what} {x} outside [0, {hi}]")));
    }
    Ok(x.clamp(0.0, hi))
}

pub fn metric(kind: MetricKind, f: f64) -> Result<f64> {
    let f = clamp_unit(f, 1.0, "fidelity")?;
    Ok(match kind {
        MetricKind::BuresAngle => f.acos(),
        MetricKind::BuresDistance => (2.0 - 2.0 * f).max(0.0).sqrt(),
        MetricKind::Sine => (1.0 - f * f).max(0.0).sqrt(),
    })
}

/// Inverse of [`metric`]; a value outside the metric's range is an error.
pub fn metric_inverse(kind: MetricKind, dval: f64) -> Result<f64> {
    let d = clamp_unit(dval, kind.max_value(), "distance")?;
    Ok(match kind {
        MetricKind::BuresAngle => d.cos().max(0.0),
        MetricKind::BuresDistance => (1.0 - 0.5 * d * d).clamp(0.0, 1.0),
        MetricKind::Sine => (1.0 - d * d).max(0.0).sqrt(),
    })
}

/// Positive and negative parts of `ρ − σ` and their descending spectra.
#[derive(Debug, Clone)]
pub struct DifferenceParts {
    pub plus: CMat,
    pub minus: CMat,
    pub plus_eigenvalues: Vec<f64>,
    pub minus_eigenvalues: Vec<f64>,
}

pub fn difference_parts(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DifferenceParts> {
    check_dims(rho, sigma)?;
    let eig = qmat::hermitian_eig(&(rho.matrix() - sigma.matrix()))?;
    let plus = eig.map(|x| if x > RANK_THRESHOLD { x } else { 0.0 });
    let minus = eig.map(|x| if x < -RANK_THRESHOLD { -x } else { 0.0 });
    let plus_eigenvalues = eig
        .eigenvalues
        .iter()
        .map(|&x| if x > RANK_THRESHOLD { x } else { 0.0 })
        .collect();
    let mut minus_eigenvalues: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&x| if x < -RANK_THRESHOLD { -x } else { 0.0 })
        .collect();
    minus_eigenvalues.reverse();
    Ok(DifferenceParts {
        plus,
        minus,
        plus_eigenvalues,
        minus_eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::{c, max_abs_diff, real_diag, CVec};
    use crate::states::{random_density_purity, random_density_rank};
    use proptest::prelude::*;

    fn pair(seed: u64, d: usize) -> (DensityMatrix, DensityMatrix) {
        let r1 = 1 + (seed as usize % d);
        let r2 = 1 + ((seed as usize / 3) % d);
        (
            random_density_rank(d, r1, 2 * seed).unwrap(),
            random_density_rank(d, r2, 2 * seed + 1).unwrap(),
        )
    }

    #[test]
    fn fidelity_basic_cases() {
        let rho = random_density_rank(4, 3, 1).unwrap();
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() <= 1e-9);
        let a = DensityMatrix::new(real_diag(&[1.0, 0.0])).unwrap();
        let b = DensityMatrix::new(real_diag(&[0.0, 1.0])).unwrap();
        assert!(fidelity(&a, &b).unwrap().abs() <= 1e-12);
        assert!(fidelity(&a, &DensityMatrix::maximally_mixed(4)).is_err());
    }

    #[test]
    fn fidelity_pure_shortcut() {
        for seed in 0..10 {
            let psi = random_density_rank(5, 1, 10 + seed).unwrap();
            let sigma = random_density_rank(5, 3, 20 + seed).unwrap();
            let v = psi.spectrum().eigenvectors.column(0).into_owned();
            let overlap = (v.adjoint() * sigma.matrix() * &v)[(0, 0)].re;
            assert!((fidelity(&psi, &sigma).unwrap() - overlap.sqrt()).abs() <= 1e-8);
        }
    }

    #[test]
    fn ssfb_cases() {
        let psi = random_density_rank(3, 1, 5).unwrap();
        let (lo, up) = ssfb(&psi, &psi).unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (up - 1.0).abs() < 1e-9);

        let phi = random_density_rank(3, 1, 6).unwrap();
        let f = fidelity(&psi, &phi).unwrap();
        let (lo, up) = ssfb(&psi, &phi).unwrap();
        assert!((lo - f).abs() <= 1e-9 && (up - f).abs() <= 1e-9);

        for seed in 0..30 {
            let (rho, sigma) = pair(seed, 4);
            let f = fidelity(&rho, &sigma).unwrap();
            let (lo, up) = ssfb(&rho, &sigma).unwrap();
            assert!(lo <= f + 1e-9 && f <= up + 1e-9);
        }
    }

    #[test]
    fn epsilon_rank_cases() {
        let psi = random_density_rank(4, 1, 3).unwrap();
        for eps in [0.0, 0.01, 0.5] {
            assert_eq!(epsilon_rank(&psi, eps), 1);
        }
        let mm = DensityMatrix::maximally_mixed(4);
        assert_eq!(epsilon_rank(&mm, 0.25), 3);
        assert_eq!(epsilon_rank(&mm, 0.0), 4);
        let rho = random_density_rank(4, 4, 3).unwrap();
        assert_eq!(epsilon_rank(&rho, 1.0), 1);
    }

    #[test]
    fn truncate_cases() {
        let (rho, sigma) = pair(7, 4);
        let full = truncate(&rho, &sigma, 4).unwrap();
        assert!(max_abs_diff(&full.rho_m, rho.matrix()) <= 1e-10);
        assert!(max_abs_diff(&full.sigma_m, sigma.matrix()) <= 1e-10);

        let one = truncate(&rho, &sigma, 1).unwrap();
        let v = rho.spectrum().eigenvectors.column(0).into_owned();
        let want = (&v * v.adjoint()).scale(rho.eigenvalues()[0]);
        assert!(max_abs_diff(&one.rho_m, &want) <= 1e-12);

        assert!(truncate(&rho, &sigma, 0).is_err());
        assert!(truncate(&rho, &sigma, 5).is_err());
    }

    #[test]
    fn truncated_sigma_trace_matches_diagonal_overlaps() {
        for seed in 0..10 {
            let (rho, sigma) = pair(seed, 5);
            let vecs = &rho.spectrum().eigenvectors;
            for m in 1..=5 {
                let tp = truncate(&rho, &sigma, m).unwrap();
                let oracle: f64 = (0..m)
                    .map(|i| {
                        let v = vecs.column(i);
                        (v.adjoint() * sigma.matrix() * v)[(0, 0)].re
                    })
                    .sum();
                assert!((tp.tr_sigma_m - oracle).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn truncated_fidelity_at_rank_is_exact() {
        for seed in 0..10 {
            let (rho, sigma) = pair(seed, 4);
            let f = fidelity(&rho, &sigma).unwrap();
            let tp = truncate(&rho, &sigma, rho.rank()).unwrap();
            assert!((truncated_fidelity(&tp, &sigma).unwrap() - f).abs() <= 1e-8);
            let tp = truncate(&rho, &sigma, 4).unwrap();
            assert!((truncated_generalized_fidelity(&tp, &sigma).unwrap() - f).abs() <= 1e-8);
        }
    }

    #[test]
    fn rank_one_truncation_closed_form() {
        let rho = random_density_rank(4, 2, 41).unwrap();
        let sigma = random_density_rank(4, 3, 42).unwrap();
        let tp = truncate(&rho, &sigma, 1).unwrap();
        let v = rho.spectrum().eigenvectors.column(0).into_owned();
        let s11 = (v.adjoint() * sigma.matrix() * &v)[(0, 0)].re;
        let oracle = (rho.eigenvalues()[0] * s11).sqrt();
        assert!((truncated_fidelity(&tp, &sigma).unwrap() - oracle).abs() <= 1e-10);
    }

    #[test]
    fn metric_cases() {
        for kind in MetricKind::ALL {
            assert!(metric(kind, 1.0).unwrap().abs() < 1e-15);
            assert!((metric(kind, 0.0).unwrap() - kind.max_value()).abs() < 1e-15);
            for k in 0..100 {
                let f = k as f64 / 99.0;
                let back = metric_inverse(kind, metric(kind, f).unwrap()).unwrap();
                assert!((back - f).abs() <= 1e-10, "{kind:?} {f} {back}");
            }
            assert!(metric_inverse(kind, -0.1).is_err());
            assert!(metric_inverse(kind, kind.max_value() + 0.1).is_err());
            let mut last = f64::INFINITY;
            for k in 0..=50 {
                let d = metric(kind, k as f64 / 50.0).unwrap();
                assert!(d < last);
                last = d;
            }
        }
        assert!(metric(MetricKind::Sine, 1.5).is_err());
    }

    #[test]
    fn difference_parts_reassemble() {
        let (rho, sigma) = pair(12, 4);
        let parts = difference_parts(&rho, &sigma).unwrap();
        let diff = rho.matrix() - sigma.matrix();
        assert!(max_abs_diff(&(&parts.plus - &parts.minus), &diff) <= 1e-10);
        assert!(max_abs_diff(&(&parts.plus * &parts.minus), &CMat::zeros(4, 4)) <= 1e-10);
        let tp: f64 = parts.plus_eigenvalues.iter().sum();
        let tm: f64 = parts.minus_eigenvalues.iter().sum();
        assert!((tp - tm).abs() <= 1e-10);
        assert!(parts.minus_eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    fn sqrt_psd(a: &CMat) -> CMat {
        qmat::matrix_sqrt(a).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_truncation_bounds(seed in 0u64..10_000, d in 2usize..7) {
            let (rho, sigma) = pair(seed, d);
            let f = fidelity(&rho, &sigma).unwrap();
            prop_assert!((f - fidelity(&sigma, &rho).unwrap()).abs() <= 1e-9);
            let (lo, up) = ssfb(&rho, &sigma).unwrap();
            prop_assert!(lo <= f + 1e-9 && f <= up + 1e-9);
            let mut last = (f64::NEG_INFINITY, f64::INFINITY);
            for m in 1..=d {
                let tp = truncate(&rho, &sigma, m).unwrap();
                let low = truncated_fidelity(&tp, &sigma).unwrap();
                let high = truncated_generalized_fidelity(&tp, &sigma).unwrap();
                prop_assert!(low <= f + 1e-9);
                prop_assert!(f <= high + 1e-9);
                prop_assert!(low >= last.0 - 1e-10);
                prop_assert!(high <= last.1 + 1e-10);
                prop_assert!(high - low <= tp.tail_rho_m.sqrt() + 1e-9);
                last = (low, high);
            }
        }

        #[test]
        fn prop_fidelity_perturbation(seed in 0u64..10_000) {
            // |F(A,C) − F(B,C)| ≤ √Tr[(√A − √B)²] for PSD A, B and a state C.
            let d = 4;
            let mut rng = crate::seeds::rng(seed);
            let ga = qmat::ginibre(d, 2, &mut rng).scale(0.6);
            let gb = qmat::ginibre(d, 3, &mut rng).scale(0.4);
            let a = &ga * ga.adjoint();
            let b = &gb * gb.adjoint();
            let state = random_density_purity(d, 0.5, seed).unwrap();
            let (sa, sb) = (sqrt_psd(&a), sqrt_psd(&b));
            let fa = root_fidelity(&sa, state.sqrt()).unwrap();
            let fb = root_fidelity(&sb, state.sqrt()).unwrap();
            let diff = &sa - &sb;
            let rhs = qmat::trace(&(&diff * &diff)).re.max(0.0).sqrt();
            prop_assert!((fa - fb).abs() <= rhs + 1e-9);
        }
    }

    #[test]
    fn pure_state_constructor() {
        let psi = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let p = DensityMatrix::pure(&psi).unwrap();
        assert!(p.is_pure());
        assert_eq!(p.rank(), 1);
    }
}
