//! Truncated and certified fidelity bounds computed from measured `T`
//! matrices, their combination across truncation levels, and the precision
//! estimate `γ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{self, deficit_term, metric, metric_inverse, MetricKind};
use crate::measure::{self, ElementTable, RepairStrategy, Sampling, TMatrix};
use crate::qmat;
use crate::seeds;
use crate::states::DensityMatrix;
use crate::vqsd::DiagonalizationResult;

/// Largest negative eigenvalue of a repaired `T` that still counts as PSD.
pub const T_PSD_TOL: f64 = 1e-10;

/// A closed interval `[low, up]` on the fidelity scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub up: f64,
}

impl Interval {
    pub const TRIVIAL: Interval = Interval { low: 0.0, up: 1.0 };

    pub fn new(low: f64, up: f64) -> Self {
        Self { low, up }
    }

    pub fn clamped(self) -> Self {
        Self {
            low: self.low.clamp(0.0, 1.0),
            up: self.up.clamp(0.0, 1.0),
        }
    }

    pub fn width(&self) -> f64 {
        self.up - self.low
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.low - tol <= x && x <= self.up + tol
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            low: self.low.max(other.low),
            up: self.up.min(other.up),
        }
    }

    /// Strictly inside `outer` on both sides.
    pub fn strictly_inside(&self, outer: &Interval) -> bool {
        self.low > outer.low && self.up < outer.up
    }
}

/// Truncated bounds read off a `T` matrix, before and after clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tfb {
    pub bounds: Interval,
    pub raw: Interval,
}

/// `Σ √λ_i(T)` and that plus `√((1 − Σ_{i≤m} r'_i)(1 − Σ_{i≤m} σ'_ii))`.
///
/// The first deficit comes from the discarded tail of `spectrum`, which must
/// be the full spectrum. In sampled mode the measured diagonal may overshoot
/// one, so its deficit is clipped at zero.
pub fn tfb_from_t(t: &TMatrix, spectrum: &[f64], table: &ElementTable) -> Result<Tfb> {
    if t.m != table.m || t.m > spectrum.len() {
        return Err(Error::InvalidArgument("T, table and spectrum levels disagree".into()));
    }
    if let Some(&min) = t.eigenvalues.last() {
        if min < -T_PSD_TOL {
            return Err(Error::NotPsd { eigenvalue: min });
        }
    }
    let low = qmat::sum_sqrt(&t.eigenvalues);
    let rho_tail: f64 = spectrum[t.m..].iter().sum();
    let mut sigma_deficit = 1.0 - table.diagonal_sum();
    if table.sampling != Sampling::Exact {
        sigma_deficit = sigma_deficit.max(0.0);
    }
    let up = low + deficit_term(rho_tail, sigma_deficit)?;
    let raw = Interval::new(low, up);
    Ok(Tfb {
        bounds: raw.clamped(),
        raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ccfb {
    pub bounds: Interval,
    /// `None` when no rank promise is available (the term is then infinite).
    pub delta1: Option<f64>,
    pub delta2: f64,
}

impl Ccfb {
    pub fn delta(&self) -> f64 {
        self.delta1.map_or(self.delta2, |d1| d1.min(self.delta2))
    }
}

/// Widens a truncated interval computed on `ρ'` by the diagonalization error
/// `δ = min(δ₁, δ₂)`, with `δ₁ = (4 r C)^{1/4}` for a promised rank `r` and
/// `δ₂ = (2ε'_m + √(2mC))^{1/2}`.
pub fn ccfb(tfb: Interval, cost: f64, m: usize, eps_m_prime: f64, known_rank: Option<usize>) -> Result<Ccfb> {
    if !(cost >= 0.0) {
        return Err(Error::InvalidArgument(format!("cost {cost} is negative")));
    }
    let eps = eps_m_prime.max(0.0);
    let delta1 = known_rank.map(|r| (4.0 * r as f64 * cost).powf(0.25));
    let delta2 = (2.0 * eps + (2.0 * m as f64 * cost).sqrt()).sqrt();
    let out = Ccfb { bounds: tfb, delta1, delta2 };
    let delta = out.delta();
    Ok(Ccfb {
        bounds: Interval::new((tfb.low - delta).max(0.0), (tfb.up + delta).min(1.0)),
        ..out
    })
}

fn distance_to_fidelity(kind: MetricKind, dval: f64) -> f64 {
    if dval <= 0.0 {
        1.0
    } else if dval >= kind.max_value() {
        0.0
    } else {
        metric_inverse(kind, dval).unwrap_or(0.0)
    }
}

/// Fidelities this close to one are roundoff; every distance has infinite
/// slope at `F = 1` and would turn them into ~1e-8.
const UNIT_SNAP: f64 = 16.0 * f64::EPSILON;

fn snap_unit(f: f64) -> f64 {
    if f >= 1.0 - UNIT_SNAP {
        1.0
    } else {
        f.max(0.0)
    }
}

/// Triangle-inequality bounds in the distance `kind`:
/// `D(ρ,σ) ∈ [D(F*_σ) − D(F_ρ), D(F_σ) + D(F_ρ)]`, where `F_σ, F*_σ` are the
/// truncated bounds of `ρ'` against σ and `F_ρ` is the lower truncated bound
/// of `ρ'` against ρ. A distance outside the metric's range maps to the
/// trivial fidelity bound.
pub fn ctib(kind: MetricKind, f_sigma: Interval, f_rho_low: f64) -> Result<Interval> {
    let d_rho = metric(kind, snap_unit(f_rho_low))?;
    let d_lb = metric(kind, snap_unit(f_sigma.up))? - d_rho;
    let d_ub = metric(kind, snap_unit(f_sigma.low))? + d_rho;
    Ok(Interval::new(
        distance_to_fidelity(kind, d_ub),
        distance_to_fidelity(kind, d_lb),
    ))
}

/// Intersection of certified intervals, clamped to `[0, 1]`.
pub fn certified_combine(intervals: &[Interval]) -> Result<Interval> {
    let (first, rest) = intervals
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("no intervals to combine".into()))?;
    Ok(rest.iter().fold(*first, |acc, iv| acc.intersect(iv)).clamped())
}

/// `γ = (ε + √(mC))^{1/2} + (2ε + (2+√2)√(mC))^{1/2} + ζ‖T‖`.
pub fn gamma_precision(eps: f64, m: usize, cost: f64, zeta: f64, t_norm: f64) -> f64 {
    let s = (m as f64 * cost.max(0.0)).sqrt();
    let eps = eps.max(0.0);
    (eps + s).sqrt() + (2.0 * eps + (2.0 + std::f64::consts::SQRT_2) * s).sqrt() + zeta * t_norm
}

/// Largest standard error of an entry of `T` under swap-test sampling:
/// `r_i/√shots` on the diagonal, `√(3 r_i r_j / shots)` off it.
pub fn max_t_standard_error(spectrum: &[f64], m: usize, shots: u64) -> f64 {
    let n = shots as f64;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in i..m {
            let w = (spectrum[i].max(0.0) * spectrum[j].max(0.0)).sqrt();
            let factor = if i == j { 1.0 } else { 3f64.sqrt() };
            worst = worst.max(factor * w / n.sqrt());
        }
    }
    worst
}

/// Relative shot precision `ζ = 3 m² se_max / ‖T‖`.
pub fn calibrate_zeta(spectrum: &[f64], m: usize, shots: u64, t_norm: f64) -> f64 {
    3.0 * (m * m) as f64 * max_t_standard_error(spectrum, m, shots) / t_norm.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindInterval {
    pub kind: MetricKind,
    pub low: f64,
    pub up: f64,
}

/// Everything computed at one truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub m: usize,
    pub cost: f64,
    /// `1 − Tr ρ'_m`.
    pub eps_m_prime: f64,
    pub tfb_low: f64,
    pub tfb_up: f64,
    pub tfb_low_raw: f64,
    pub tfb_up_raw: f64,
    pub ccfb_low: f64,
    pub ccfb_up: f64,
    /// `None` stands for +∞.
    pub delta1: Option<f64>,
    pub delta2: f64,
    pub ctib: Vec<KindInterval>,
    /// Lower truncated bound of `ρ'` against ρ itself.
    pub f_rho_low: f64,
    /// Intersection of the CCFB and CTIB intervals.
    pub certified_low: f64,
    pub certified_up: f64,
    /// False in sampled mode, where the certificates assume noiseless inputs.
    pub certified: bool,
    pub gamma: f64,
    pub zeta: f64,
    pub reference_fidelity: Option<f64>,
    pub repair_applied: bool,
    pub circuits: usize,
}

impl BoundsReport {
    pub fn tfb(&self) -> Interval {
        Interval::new(self.tfb_low, self.tfb_up)
    }

    pub fn ccfb(&self) -> Interval {
        Interval::new(self.ccfb_low, self.ccfb_up)
    }

    pub fn certified_interval(&self) -> Interval {
        Interval::new(self.certified_low, self.certified_up)
    }

    pub fn ctib_for(&self, kind: MetricKind) -> Interval {
        self.ctib
            .iter()
            .find(|k| k.kind == kind)
            .map_or(Interval::TRIVIAL, |k| Interval::new(k.low, k.up))
    }

    /// Tightest CTIB across metrics.
    pub fn ctib_best(&self) -> Interval {
        self.ctib
            .iter()
            .fold(Interval::TRIVIAL, |acc, k| acc.intersect(&Interval::new(k.low, k.up)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySpectrum {
    pub reports: Vec<BoundsReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub sampling: Sampling,
    pub seed: u64,
    pub known_rank: Option<usize>,
    pub repair: RepairStrategy,
    /// Overrides the ε used in `γ`; by default ρ's own discarded weight.
    pub gamma_eps: Option<f64>,
    /// Compute the exact fidelity for reference.
    pub reference: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::Exact,
            seed: 0,
            known_rank: None,
            repair: RepairStrategy::FrobeniusClip,
            gamma_eps: None,
            reference: true,
        }
    }
}

impl SpectrumOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn sampled(shots: u64, seed: u64) -> Self {
        Self {
            sampling: Sampling::Shots(shots),
            seed,
            ..Self::default()
        }
    }
}

/// Runs the measurement and bounding pipeline for `m = 1..=m_max`, growing
/// the element tables of σ and of ρ one row at a time.
pub fn fidelity_spectrum(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    diag: &DiagonalizationResult,
    m_max: usize,
    opts: &SpectrumOptions,
) -> Result<FidelitySpectrum> {
    let d = rho.dim();
    if sigma.dim() != d || diag.eigvecs.nrows() != d {
        return Err(Error::DimensionMismatch(d, sigma.dim()));
    }
    if m_max == 0 || m_max > d {
        return Err(Error::InvalidArgument(format!("m_max {m_max} outside 1..={d}")));
    }
    let reference = if opts.reference {
        Some(fidelity::fidelity(rho, sigma)?)
    } else {
        None
    };
    let spectrum = &diag.spectrum;
    let v = &diag.eigvecs;
    let mut sigma_table = measure::elements_sampled(sigma, v, 0, opts.sampling, seeds::derive(opts.seed, &[0]))?;
    let mut rho_table = measure::elements_sampled(rho, v, 0, opts.sampling, seeds::derive(opts.seed, &[1]))?;
    let exact = opts.sampling == Sampling::Exact;
    let mut reports = Vec::with_capacity(m_max);

    for m in 1..=m_max {
        sigma_table = measure::extend_elements(&sigma_table, sigma, v)?;
        rho_table = measure::extend_elements(&rho_table, rho, v)?;
        let t_sigma = measure::assemble_t_with(&sigma_table, spectrum, opts.repair)?;
        let t_rho = measure::assemble_t_with(&rho_table, spectrum, opts.repair)?;
        let tfb = tfb_from_t(&t_sigma, spectrum, &sigma_table)?;
        let f_rho_low = tfb_from_t(&t_rho, spectrum, &rho_table)?.bounds.low;

        let eps_m_prime = diag.tail(m);
        let cc = ccfb(tfb.bounds, diag.cost, m, eps_m_prime, opts.known_rank)?;
        let ctib_all = MetricKind::ALL
            .iter()
            .map(|&kind| {
                ctib(kind, tfb.bounds, f_rho_low).map(|iv| KindInterval {
                    kind,
                    low: iv.low,
                    up: iv.up,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut all = vec![cc.bounds];
        all.extend(ctib_all.iter().map(|k| Interval::new(k.low, k.up)));
        let certified = certified_combine(&all)?;

        let eps = opts
            .gamma_eps
            .unwrap_or_else(|| rho.eigenvalues()[m..].iter().map(|x| x.max(0.0)).sum());
        let t_norm = t_sigma.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let zeta = match opts.sampling {
            Sampling::Exact => 0.0,
            Sampling::Shots(n) => calibrate_zeta(spectrum, m, n, t_norm),
        };
        reports.push(BoundsReport {
            m,
            cost: diag.cost,
            eps_m_prime,
            tfb_low: tfb.bounds.low,
            tfb_up: tfb.bounds.up,
            tfb_low_raw: tfb.raw.low,
            tfb_up_raw: tfb.raw.up,
            ccfb_low: cc.bounds.low,
            ccfb_up: cc.bounds.up,
            delta1: cc.delta1,
            delta2: cc.delta2,
            ctib: ctib_all,
            f_rho_low,
            certified_low: certified.low,
            certified_up: certified.up,
            certified: exact,
            gamma: gamma_precision(eps, m, diag.cost, zeta, t_norm),
            zeta,
            reference_fidelity: reference,
            repair_applied: t_sigma.repair_applied || t_rho.repair_applied,
            circuits: sigma_table.circuits + rho_table.circuits,
        });
    }
    Ok(FidelitySpectrum { reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{fidelity, ssfb};
    use crate::states::{random_density_purity, random_density_rank, tensor_product_state};
    use crate::vqsd::{exact_diagonalization, perturbed_diagonalization};

    fn random_pair(seed: u64, d: usize) -> (DensityMatrix, DensityMatrix) {
        let rho = random_density_rank(d, 1 + seed as usize % d, seed).unwrap();
        let sigma = if seed.is_multiple_of(2) {
            random_density_rank(d, 1 + (seed as usize / 3) % d, 1000 + seed).unwrap()
        } else {
            random_density_purity(d, 1.0 / d as f64 + 0.5 * (1.0 - 1.0 / d as f64), 1000 + seed).unwrap()
        };
        (rho, sigma)
    }

    #[test]
    fn ccfb_arithmetic() {
        let tfb = Interval::new(0.6, 0.8);
        let c = ccfb(tfb, 1e-6, 2, 0.0, Some(4)).unwrap();
        assert!((c.delta1.unwrap() - 1.6e-5f64.powf(0.25)).abs() < 1e-15);
        assert!((c.delta1.unwrap() - 0.0632).abs() < 1e-4);
        let c = ccfb(tfb, 0.0, 3, 0.02, None).unwrap();
        assert_eq!(c.delta1, None);
        assert!((c.delta2 - 0.04f64.sqrt()).abs() < 1e-15);
        assert!((c.bounds.low - 0.4).abs() < 1e-12 && c.bounds.up == 1.0);
        let c = ccfb(tfb, 0.0, 3, 0.0, None).unwrap();
        assert_eq!(c.bounds, tfb);
        assert!(ccfb(tfb, -1.0, 1, 0.0, None).is_err());
    }

    #[test]
    fn gamma_arithmetic() {
        assert_eq!(gamma_precision(0.0, 3, 0.0, 0.0, 1.0), 0.0);
        let g = gamma_precision(0.01, 3, 0.0, 0.0, 0.5);
        assert!((g - (0.1 + 0.02f64.sqrt())).abs() < 1e-15);
        assert!((g - 0.2414).abs() < 1e-4);
        let g2 = gamma_precision(0.01, 3, 0.0, 0.1, 0.5);
        assert!((g2 - g - 0.05).abs() < 1e-15);
    }

    #[test]
    fn ctib_trivial_and_identity_cases() {
        let tfb = Interval::new(0.7, 0.9);
        for kind in MetricKind::ALL {
            let iv = ctib(kind, tfb, 1.0).unwrap();
            assert!((iv.low - 0.7).abs() < 1e-12 && (iv.up - 0.9).abs() < 1e-12);
            let iv = ctib(kind, tfb, 0.0).unwrap();
            assert_eq!(iv, Interval::TRIVIAL);
        }
    }

    #[test]
    fn combine_rules() {
        let a = Interval::new(0.2, 0.9);
        assert_eq!(certified_combine(&[a]).unwrap(), a);
        assert_eq!(certified_combine(&[a, Interval::TRIVIAL]).unwrap(), a);
        let b = Interval::new(0.3, 0.95);
        let c = certified_combine(&[a, b]).unwrap();
        assert_eq!(c, Interval::new(0.3, 0.9));
        assert!(certified_combine(&[]).is_err());
    }

    #[test]
    fn exact_spectrum_sandwich_and_convergence() {
        for seed in 0..60 {
            let d = [4, 8][seed as usize % 2];
            let (rho, sigma) = random_pair(seed, d);
            let diag = exact_diagonalization(&rho).unwrap();
            let spec = fidelity_spectrum(&rho, &sigma, &diag, d, &SpectrumOptions::exact()).unwrap();
            let f = fidelity(&rho, &sigma).unwrap();
            for r in &spec.reports {
                assert!(r.tfb_low <= f + 1e-8 && f <= r.tfb_up + 1e-8, "seed {seed} m {}", r.m);
                assert!(r.tfb_up - r.tfb_low <= r.eps_m_prime.max(0.0).sqrt() + 1e-9);
                assert!(r.certified_interval().contains(f, 1e-8));
                assert!(r.certified_low <= r.certified_up + 1e-9);
                assert!(!r.repair_applied);
            }
            for w in spec.reports.windows(2) {
                assert!(w[1].tfb_low >= w[0].tfb_low - 1e-10);
                assert!(w[1].tfb_up <= w[0].tfb_up + 1e-10);
                assert!(w[1].certified_interval().width() <= w[0].certified_interval().width() + 1e-9, "seed {seed} m {}: {:?} {:?}\n{:?}\n{:?}", w[1].m, w[0].certified_interval(), w[1].certified_interval(), w[0], w[1]);
            }
            let at_rank = &spec.reports[rho.rank() - 1];
            assert!((at_rank.tfb_low - f).abs() <= 1e-7);
            let last = spec.reports.last().unwrap();
            assert!((last.tfb_low - f).abs() <= 1e-6 && (last.tfb_up - f).abs() <= 1e-6);
        }
    }

    #[test]
    fn pure_rho_first_level_is_overlap_root() {
        let rho = random_density_rank(8, 1, 77).unwrap();
        let sigma = random_density_rank(8, 5, 78).unwrap();
        let diag = exact_diagonalization(&rho).unwrap();
        let spec = fidelity_spectrum(&rho, &sigma, &diag, 1, &SpectrumOptions::exact()).unwrap();
        let r1 = rho.spectrum().eigenvectors.column(0).into_owned();
        let overlap = (r1.adjoint() * sigma.matrix() * &r1)[(0, 0)].re;
        assert!((spec.reports[0].tfb_low - overlap.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn certified_contains_fidelity_under_perturbation() {
        for seed in 0..20 {
            for strength in [0.01, 0.05] {
                let (rho, sigma) = random_pair(seed, 8);
                let diag = perturbed_diagonalization(&rho, strength, 500 + seed).unwrap();
                let f = fidelity(&rho, &sigma).unwrap();
                let opts = SpectrumOptions {
                    known_rank: Some(rho.rank()),
                    ..SpectrumOptions::exact()
                };
                let spec = fidelity_spectrum(&rho, &sigma, &diag, 8, &opts).unwrap();
                for r in &spec.reports {
                    assert!(r.ccfb().contains(f, 1e-8));
                    for kind in MetricKind::ALL {
                        assert!(r.ctib_for(kind).contains(f, 1e-8), "{kind:?} seed {seed}");
                    }
                    assert!(r.certified_interval().contains(f, 1e-8));
                    let inside = r.certified_interval();
                    assert!(inside.low >= r.ccfb_low - 1e-15 && inside.up <= r.ccfb_up + 1e-15);
                }
            }
        }
    }

    #[test]
    fn ctib_lower_distance_grows_with_level() {
        for seed in 0..20 {
            let (rho, sigma) = random_pair(seed, 8);
            let diag = perturbed_diagonalization(&rho, 0.05, seed).unwrap();
            let spec = fidelity_spectrum(&rho, &sigma, &diag, 8, &SpectrumOptions::exact()).unwrap();
            for kind in MetricKind::ALL {
                let d_lb: Vec<f64> = spec
                    .reports
                    .iter()
                    .map(|r| metric(kind, r.tfb_up).unwrap() - metric(kind, r.f_rho_low).unwrap())
                    .collect();
                assert!(d_lb.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{kind:?} {d_lb:?}");
            }
        }
    }

    #[test]
    fn tensor_example_beats_ssfb() {
        let factors: Vec<_> = (0..3)
            .map(|k| random_density_rank(2, if k < 2 { 2 } else { 1 }, 40 + k).unwrap())
            .collect();
        let rho = tensor_product_state(&factors).unwrap();
        assert_eq!(rho.rank(), 4);
        let sigma = random_density_rank(8, 8, 50).unwrap();
        let diag = exact_diagonalization(&rho).unwrap();
        let spec = fidelity_spectrum(&rho, &sigma, &diag, 4, &SpectrumOptions::exact()).unwrap();
        let (e, g) = ssfb(&rho, &sigma).unwrap();
        let ss = Interval::new(e, g);
        assert!(spec.reports.iter().any(|r| r.certified_interval().strictly_inside(&ss)));
    }

    #[test]
    fn sampled_tracks_exact() {
        let (rho, sigma) = random_pair(3, 8);
        let diag = exact_diagonalization(&rho).unwrap();
        let exact = fidelity_spectrum(&rho, &sigma, &diag, 4, &SpectrumOptions::exact()).unwrap();
        let noisy = fidelity_spectrum(&rho, &sigma, &diag, 4, &SpectrumOptions::sampled(100_000, 9)).unwrap();
        for (a, b) in exact.reports.iter().zip(&noisy.reports) {
            assert!((a.tfb_low - b.tfb_low).abs() <= 0.02);
            assert!((a.tfb_up - b.tfb_up).abs() <= 0.02);
            assert!(!b.certified && b.zeta > 0.0);
        }
        let again = fidelity_spectrum(&rho, &sigma, &diag, 4, &SpectrumOptions::sampled(100_000, 9)).unwrap();
        assert_eq!(noisy, again);
    }

    #[test]
    fn argument_errors() {
        let (rho, sigma) = random_pair(1, 4);
        let diag = exact_diagonalization(&rho).unwrap();
        assert!(fidelity_spectrum(&rho, &sigma, &diag, 0, &SpectrumOptions::exact()).is_err());
        assert!(fidelity_spectrum(&rho, &sigma, &diag, 5, &SpectrumOptions::exact()).is_err());
        let other = DensityMatrix::maximally_mixed(8);
        assert!(fidelity_spectrum(&rho, &other, &diag, 2, &SpectrumOptions::exact()).is_err());
    }
}
