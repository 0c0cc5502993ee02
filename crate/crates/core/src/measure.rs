//! Matrix elements of a state in an approximate eigenbasis, either exactly or
//! through simulated swap tests, and the `T` matrix built from them.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{self, c, CMat, CVec};
use crate::seeds;
use crate::states::DensityMatrix;

/// How each matrix element is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Exact,
    /// Swap tests with this many ancilla shots per circuit.
    Shots(u64),
}

impl Sampling {
    pub fn shots(self) -> Option<u64> {
        match self {
            Sampling::Exact => None,
            Sampling::Shots(n) => Some(n),
        }
    }
}

/// `σ'_ij = ⟨r'_i|σ|r'_j⟩` for `i, j < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementTable {
    pub m: usize,
    pub entries: CMat,
    pub sampling: Sampling,
    pub seed: u64,
    /// Swap-test circuits run so far (zero in exact mode).
    pub circuits: usize,
}

impl ElementTable {
    fn empty(sampling: Sampling, seed: u64) -> Self {
        Self {
            m: 0,
            entries: CMat::zeros(0, 0),
            sampling,
            seed,
            circuits: 0,
        }
    }

    pub fn diagonal_sum(&self) -> f64 {
        (0..self.m).map(|k| self.entries[(k, k)].re).sum()
    }
}

/// Estimates `⟨a|σ|a⟩` from a swap test: the ancilla reads 0 with probability
/// `(1 + v)/2`, so `2k/shots − 1` is unbiased for `v`.
pub fn swap_test_overlap(a: &CVec, sigma: &DensityMatrix, shots: Option<u64>, seed: u64) -> Result<f64> {
    if a.len() != sigma.dim() {
        return Err(Error::DimensionMismatch(a.len(), sigma.dim()));
    }
    let v = (a.adjoint() * sigma.matrix() * a)[(0, 0)].re;
    let Some(shots) = shots else {
        return Ok(v);
    };
    if shots == 0 {
        return Err(Error::InvalidArgument("swap test needs at least one shot".into()));
    }
    let p = ((1.0 + v) / 2.0).clamp(0.0, 1.0);
    let dist = Binomial::new(shots, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let k = dist.sample(&mut seeds::rng(seed));
    Ok(2.0 * k as f64 / shots as f64 - 1.0)
}

const DIAG: u64 = 0;
const REAL: u64 = 1;
const IMAG: u64 = 2;

fn entry_seed(root: u64, i: usize, j: usize, part: u64) -> u64 {
    seeds::derive(root, &[i as u64, j as u64, part])
}

fn check_basis(sigma: &DensityMatrix, eigvecs: &CMat, m: usize) -> Result<()> {
    if eigvecs.nrows() != sigma.dim() {
        return Err(Error::DimensionMismatch(eigvecs.nrows(), sigma.dim()));
    }
    if m > eigvecs.ncols() {
        return Err(Error::InvalidArgument(format!(
            "level {m} exceeds the {} available eigenvectors",
            eigvecs.ncols()
        )));
    }
    Ok(())
}

/// Noiseless table: the top-left `m × m` block of `V†σV`.
pub fn elements_exact(sigma: &DensityMatrix, eigvecs: &CMat, m: usize) -> Result<ElementTable> {
    check_basis(sigma, eigvecs, m)?;
    let vm = eigvecs.columns(0, m);
    let block = vm.adjoint() * sigma.matrix() * vm;
    let entries = qmat::hermitize(&block)?;
    Ok(ElementTable {
        m,
        entries,
        sampling: Sampling::Exact,
        seed: 0,
        circuits: 0,
    })
}

pub fn elements_sampled(
    sigma: &DensityMatrix,
    eigvecs: &CMat,
    m: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<ElementTable> {
    check_basis(sigma, eigvecs, m)?;
    let mut table = ElementTable::empty(sampling, seed);
    for _ in 0..m {
        table = extend_elements(&table, sigma, eigvecs)?;
    }
    Ok(table)
}

/// Adds row and column `m`: one diagonal estimate plus a real and an
/// imaginary part for each of the `m` new off-diagonal elements. Existing
/// entries are copied unchanged.
pub fn extend_elements(table: &ElementTable, sigma: &DensityMatrix, eigvecs: &CMat) -> Result<ElementTable> {
    let m = table.m;
    check_basis(sigma, eigvecs, m + 1)?;
    let mut entries = CMat::zeros(m + 1, m + 1);
    entries.view_mut((0, 0), (m, m)).copy_from(&table.entries);

    if table.sampling == Sampling::Exact {
        let rj = eigvecs.column(m);
        let column = eigvecs.columns(0, m + 1).adjoint() * sigma.matrix() * rj;
        for i in 0..m {
            entries[(i, m)] = column[i];
            entries[(m, i)] = column[i].conj();
        }
        entries[(m, m)] = c(column[m].re, 0.0);
        return Ok(ElementTable {
            m: m + 1,
            entries,
            ..table.clone()
        });
    }

    let shots = table.sampling.shots();
    let root = table.seed;
    let rj: CVec = eigvecs.column(m).into_owned();
    let djj = swap_test_overlap(&rj, sigma, shots, entry_seed(root, m, m, DIAG))?;
    entries[(m, m)] = c(djj, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..m {
        let ri: CVec = eigvecs.column(i).into_owned();
        let dii = entries[(i, i)].re;
        let plus = (&ri + &rj).scale(h);
        let phased = (&ri + rj.map(|z| z * c(0.0, 1.0))).scale(h);
        let p = swap_test_overlap(&plus, sigma, shots, entry_seed(root, i, m, REAL))?;
        let q = swap_test_overlap(&phased, sigma, shots, entry_seed(root, i, m, IMAG))?;
        let mean = (dii + djj) / 2.0;
        let z = c(p - mean, mean - q);
        entries[(i, m)] = z;
        entries[(m, i)] = z.conj();
    }
    Ok(ElementTable {
        m: m + 1,
        entries,
        sampling: table.sampling,
        seed: root,
        circuits: table.circuits + 2 * m + 1,
    })
}

/// What to do when `T` comes out with negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStrategy {
    /// Nearest PSD matrix in Frobenius norm (eigenvalue clipping).
    #[default]
    FrobeniusClip,
    /// Leave `T` as measured.
    None,
}

/// Eigenvalues below this trigger a repair.
pub const REPAIR_THRESHOLD: f64 = -1e-10;

/// Spectrum entries down to this are treated as zero.
pub const SPECTRUM_TOL: f64 = 1e-12;

/// `T_ij = √(r'_i r'_j) σ'_ij`.
#[derive(Debug, Clone)]
pub struct TMatrix {
    pub m: usize,
    pub raw: CMat,
    pub repaired: CMat,
    pub repair_applied: bool,
    pub min_raw_eigenvalue: f64,
    /// Descending eigenvalues of `repaired`.
    pub eigenvalues: Vec<f64>,
}

pub fn assemble_t(table: &ElementTable, spectrum: &[f64]) -> Result<TMatrix> {
    assemble_t_with(table, spectrum, RepairStrategy::FrobeniusClip)
}

pub fn assemble_t_with(table: &ElementTable, spectrum: &[f64], strategy: RepairStrategy) -> Result<TMatrix> {
    let m = table.m;
    if m > spectrum.len() {
        return Err(Error::InvalidArgument(format!(
            "table level {m} exceeds spectrum length {}",
            spectrum.len()
        )));
    }
    if let Some(&bad) = spectrum[..m].iter().find(|&&r| !(r >= -SPECTRUM_TOL)) {
        return Err(Error::InvalidState(format!("negative spectrum entry {bad}")));
    }
    let roots: Vec<f64> = spectrum[..m].iter().map(|r| r.max(0.0).sqrt()).collect();
    let raw = CMat::from_fn(m, m, |i, j| table.entries[(i, j)] * (roots[i] * roots[j]));
    let raw_eig = qmat::hermitian_eig(&raw)?;
    let min_raw_eigenvalue = raw_eig.eigenvalues.last().copied().unwrap_or(0.0);
    let needs = min_raw_eigenvalue < REPAIR_THRESHOLD;
    let (repaired, repair_applied, eigenvalues) = if needs && strategy == RepairStrategy::FrobeniusClip {
        let clipped: Vec<f64> = raw_eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
        (raw_eig.map(|x| x.max(0.0)), true, clipped)
    } else {
        (raw.clone(), false, raw_eig.eigenvalues)
    };
    Ok(TMatrix {
        m,
        raw,
        repaired,
        repair_applied,
        min_raw_eigenvalue,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::fidelity;
    use crate::qmat::max_abs_diff;
    use crate::states::{random_density_purity, random_density_rank};

    fn basis(d: usize, seed: u64) -> CMat {
        qmat::random_haar_unitary(d, seed)
    }

    #[test]
    fn exact_table_cases() {
        let v = basis(4, 1);
        let r1: CVec = v.column(0).into_owned();
        let sigma = DensityMatrix::pure(&r1).unwrap();
        let t = elements_exact(&sigma, &v, 3).unwrap();
        assert!((t.entries[(0, 0)].re - 1.0).abs() < 1e-12);
        let mut expect = CMat::zeros(3, 3);
        expect[(0, 0)] = c(1.0, 0.0);
        assert!(max_abs_diff(&t.entries, &expect) < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(4);
        let t = elements_exact(&mixed, &v, 2).unwrap();
        assert!(max_abs_diff(&t.entries, &qmat::identity(2).scale(0.25)) < 1e-12);

        let sigma = random_density_rank(4, 4, 3).unwrap();
        let full = v.adjoint() * sigma.matrix() * &v;
        let t = elements_exact(&sigma, &v, 3).unwrap();
        assert!(max_abs_diff(&t.entries, &full.view((0, 0), (3, 3)).into_owned()) < 1e-12);
        assert!(elements_exact(&sigma, &v, 5).is_err());
        assert!(elements_exact(&sigma, &basis(2, 1), 1).is_err());
    }

    #[test]
    fn swap_test_cases() {
        let v = basis(4, 2);
        let a: CVec = v.column(0).into_owned();
        let sigma = DensityMatrix::pure(&a).unwrap();
        assert!((swap_test_overlap(&a, &sigma, None, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(swap_test_overlap(&a, &sigma, Some(100), 9).unwrap(), 1.0);
        assert!(swap_test_overlap(&a, &sigma, Some(0), 9).is_err());

        let b: CVec = v.column(1).into_owned();
        let shots = 10_000u64;
        let inside = (0..100)
            .filter(|&s| swap_test_overlap(&b, &sigma, Some(shots), s).unwrap().abs() <= 4.0 / (shots as f64).sqrt())
            .count();
        assert!(inside >= 95, "{inside}");
        let x = swap_test_overlap(&b, &sigma, Some(shots), 7).unwrap();
        assert_eq!(x, swap_test_overlap(&b, &sigma, Some(shots), 7).unwrap());
    }

    #[test]
    fn exact_extension_matches_block() {
        let v = basis(8, 4);
        let sigma = random_density_purity(8, 0.4, 5).unwrap();
        let direct = elements_exact(&sigma, &v, 5).unwrap();
        let grown = elements_sampled(&sigma, &v, 5, Sampling::Exact, 0).unwrap();
        assert!(max_abs_diff(&direct.entries, &grown.entries) < 1e-12);
        assert_eq!(grown.circuits, 0);
    }

    #[test]
    fn sampled_table_structure() {
        let v = basis(8, 6);
        let sigma = random_density_rank(8, 3, 7).unwrap();
        let mode = Sampling::Shots(1000);
        let one = elements_sampled(&sigma, &v, 1, mode, 11).unwrap();
        assert_eq!(one.circuits, 1);
        let a: CVec = v.column(0).into_owned();
        let direct = swap_test_overlap(&a, &sigma, Some(1000), entry_seed(11, 0, 0, DIAG)).unwrap();
        assert_eq!(one.entries[(0, 0)].re, direct);

        let two = extend_elements(&one, &sigma, &v).unwrap();
        assert_eq!(two.circuits - one.circuits, 3);
        assert_eq!(two.entries[(0, 0)], one.entries[(0, 0)]);

        let mut t = one.clone();
        for k in 1..6 {
            let next = extend_elements(&t, &sigma, &v).unwrap();
            assert_eq!(next.circuits - t.circuits, 2 * k + 1);
            assert_eq!(next.entries.view((0, 0), (k, k)).into_owned(), t.entries);
            t = next;
        }
        let direct = elements_sampled(&sigma, &v, 6, mode, 11).unwrap();
        assert_eq!(direct, t);
        for i in 0..6 {
            assert_eq!(t.entries[(i, i)].im, 0.0);
            for j in 0..6 {
                assert_eq!(t.entries[(i, j)], t.entries[(j, i)].conj());
            }
        }
    }

    #[test]
    fn sampled_converges_to_exact() {
        let v = basis(8, 8);
        let sigma = random_density_rank(8, 8, 9).unwrap();
        let exact = elements_exact(&sigma, &v, 4).unwrap();
        let rms = |shots: u64| -> f64 {
            let mut acc = 0.0;
            for seed in 0..10 {
                let s = elements_sampled(&sigma, &v, 4, Sampling::Shots(shots), seed).unwrap();
                acc += (&s.entries - &exact.entries).norm_squared();
            }
            (acc / 160.0).sqrt()
        };
        let (lo, hi) = (rms(1_000), rms(100_000));
        assert!(hi < lo / 5.0, "{lo} {hi}");
    }

    #[test]
    fn t_matrix_full_rank_gives_fidelity() {
        for seed in 0..20 {
            let rho = random_density_rank(8, 1 + seed as usize % 8, seed).unwrap();
            let sigma = random_density_purity(8, 0.3, 100 + seed).unwrap();
            let spec = rho.spectrum();
            let r = rho.rank();
            let table = elements_exact(&sigma, &spec.eigenvectors, r).unwrap();
            let t = assemble_t(&table, &spec.eigenvalues).unwrap();
            assert!(!t.repair_applied);
            assert_eq!(t.raw, t.repaired);
            let tfb = qmat::sum_sqrt(&t.eigenvalues);
            assert!((tfb - fidelity(&rho, &sigma).unwrap()).abs() <= 1e-8);
        }
    }

    #[test]
    fn exact_t_is_psd() {
        for seed in 0..100 {
            let rho = random_density_rank(4, 1 + seed as usize % 4, 300 + seed).unwrap();
            let sigma = random_density_rank(4, 1 + (seed as usize / 4) % 4, 400 + seed).unwrap();
            let spec = rho.spectrum();
            let table = elements_exact(&sigma, &spec.eigenvectors, 4).unwrap();
            let t = assemble_t(&table, &spec.eigenvalues).unwrap();
            assert!(!t.repair_applied, "seed {seed}: {}", t.min_raw_eigenvalue);
        }
    }

    #[test]
    fn repair_clips_injected_negative() {
        let mut table = elements_exact(&DensityMatrix::maximally_mixed(2), &qmat::identity(2), 2).unwrap();
        table.entries = qmat::real_diag(&[0.5, -0.01]);
        let t = assemble_t(&table, &[1.0, 1.0]).unwrap();
        assert!(t.repair_applied);
        assert!(max_abs_diff(&t.repaired, &qmat::real_diag(&[0.5, 0.0])) < 1e-15);
        assert!((t.min_raw_eigenvalue + 0.01).abs() < 1e-15);
        let bias = (&t.repaired - &t.raw).norm();
        assert!(bias <= 0.01 * 2f64.sqrt());
        let t = assemble_t_with(&table, &[1.0, 1.0], RepairStrategy::None).unwrap();
        assert!(!t.repair_applied);
        assert!(t.eigenvalues[1] < 0.0);
        assert!(assemble_t(&table, &[1.0, -0.5]).is_err());
        assert!(assemble_t(&table, &[1.0]).is_err());
    }

    #[test]
    fn t_at_level_one_is_scalar() {
        let rho = random_density_rank(4, 2, 1).unwrap();
        let sigma = random_density_rank(4, 4, 2).unwrap();
        let spec = rho.spectrum();
        let table = elements_exact(&sigma, &spec.eigenvectors, 1).unwrap();
        let t = assemble_t(&table, &spec.eigenvalues).unwrap();
        assert!((t.raw[(0, 0)].re - spec.eigenvalues[0] * table.entries[(0, 0)].re).abs() < 1e-15);
    }
}
