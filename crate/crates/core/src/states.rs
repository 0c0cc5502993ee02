//! Density matrices and the state families used by the experiments.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{self, CMat, CVec, SpectralDecomposition};
use crate::seeds;

/// Trace tolerance for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Most negative eigenvalue accepted as roundoff.
pub const MIN_EIGENVALUE: f64 = -1e-10;
/// Eigenvalues above this count towards the exact rank.
pub const RANK_THRESHOLD: f64 = 1e-12;

/// Hermitian, PSD, unit-trace matrix with its spectrum and square root cached
/// on first use.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMat,
    spectrum: OnceLock<SpectralDecomposition>,
    sqrt: OnceLock<CMat>,
}

impl DensityMatrix {
    /// Validates `matrix` and wraps it. The stored matrix is symmetrized.
    pub fn new(matrix: CMat) -> Result<Self> {
        let matrix = qmat::hermitize(&matrix)?;
        let tr = qmat::trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let spectrum = qmat::hermitian_eig(&matrix)?;
        check_min_eigenvalue(&spectrum.eigenvalues)?;
        Ok(Self {
            matrix,
            spectrum: OnceLock::from(spectrum),
            sqrt: OnceLock::new(),
        })
    }

    /// Divides a nonzero PSD matrix by its trace.
    pub fn normalized(matrix: CMat) -> Result<Self> {
        let tr = qmat::trace(&matrix).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(matrix.unscale(tr))
    }

    /// Builds `V diag(p) V†` from descending probabilities and orthonormal
    /// columns, keeping the given decomposition as the cached spectrum.
    pub fn from_spectrum(probabilities: Vec<f64>, eigenvectors: CMat) -> Result<Self> {
        let d = probabilities.len();
        if eigenvectors.shape() != (d, d) {
            return Err(Error::DimensionMismatch(d, eigenvectors.nrows()));
        }
        if probabilities.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("probabilities must be descending".into()));
        }
        let residual = qmat::unitarity_residual(&eigenvectors);
        if residual > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "eigenvectors not orthonormal (residual {residual:.3e})"
            )));
        }
        check_min_eigenvalue(&probabilities)?;
        let tr: f64 = probabilities.iter().sum();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let spectrum = SpectralDecomposition {
            eigenvalues: probabilities,
            eigenvectors,
        };
        let matrix = spectrum.reconstruct();
        let matrix = (&matrix + matrix.adjoint()).scale(0.5);
        Ok(Self {
            matrix,
            spectrum: OnceLock::from(spectrum),
            sqrt: OnceLock::new(),
        })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &CVec) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let psi = psi.unscale(norm);
        Self::new(&psi * psi.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self::new(qmat::identity(d).unscale(d as f64)).expect("I/d is a valid state")
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        self.spectrum.get_or_init(|| {
            qmat::hermitian_eig(&self.matrix).expect("validated on construction")
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum().eigenvalues
    }

    /// Principal square root.
    pub fn sqrt(&self) -> &CMat {
        self.sqrt.get_or_init(|| {
            let spec = self.spectrum();
            let floor = qmat::roundoff_floor(&spec.eigenvalues);
            spec.map(|x| qmat::floored_sqrt(x, floor))
        })
    }

    pub fn purity(&self) -> f64 {
        qmat::trace_product(&self.matrix, &self.matrix).re
    }

    /// Number of eigenvalues above [`RANK_THRESHOLD`].
    pub fn rank(&self) -> usize {
        self.eigenvalues()
            .iter()
            .filter(|&&x| x > RANK_THRESHOLD)
            .count()
    }

    pub fn is_pure(&self) -> bool {
        (self.purity() - 1.0).abs() < 1e-10
    }
}

fn check_min_eigenvalue(eigenvalues: &[f64]) -> Result<()> {
    match eigenvalues.iter().copied().reduce(f64::min) {
        Some(min) if min < MIN_EIGENVALUE => Err(Error::NotPsd { eigenvalue: min }),
        _ => Ok(()),
    }
}

/// `GG† / Tr(GG†)` for a `d × rank` Ginibre matrix `G`.
pub fn random_density_rank(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} outside 1..={d}"
        )));
    }
    let g = qmat::ginibre(d, rank, &mut seeds::rng(seed));
    DensityMatrix::normalized(&g * g.adjoint())
}

fn exponential_spectrum(d: usize, kappa: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|i| (-kappa * i as f64).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn spectrum_purity(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum()
}

/// Finds `κ` such that the spectrum `λ_i ∝ exp(−κ i)` has the requested
/// purity and returns `(κ, λ)`.
pub fn purity_spectrum(d: usize, target: f64) -> Result<(f64, Vec<f64>)> {
    let lower = 1.0 / d as f64;
    if d < 2 || !(target > lower && target < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "purity {target} outside ({lower}, 1)"
        )));
    }
    let purity_at = |k: f64| spectrum_purity(&exponential_spectrum(d, k));
    let mut hi = 1.0;
    while purity_at(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument(format!("purity {target} not reachable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if purity_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let spectrum = exponential_spectrum(d, kappa);
    if (spectrum_purity(&spectrum) - target).abs() > 1e-6 {
        return Err(Error::NoConvergence);
    }
    Ok((kappa, spectrum))
}

/// Full-rank state with an exponentially decaying spectrum of the given
/// purity in a Haar-random eigenbasis.
pub fn random_density_purity(d: usize, target_purity: f64, seed: u64) -> Result<DensityMatrix> {
    let (_, spectrum) = purity_spectrum(d, target_purity)?;
    let u = qmat::random_haar_unitary(d, seed);
    DensityMatrix::from_spectrum(spectrum, u)
}

/// `⊗ factors`, left to right.
pub fn tensor_product_state(factors: &[DensityMatrix]) -> Result<DensityMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty factor list".into()))?;
    let mut acc = first.matrix().clone();
    for f in rest {
        acc = qmat::tensor_product(&acc, f.matrix())?;
    }
    DensityMatrix::normalized(acc)
}

/// Normalization of the spin operators in the Ising Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpinConvention {
    /// `S = σ/2`.
    #[default]
    Half,
    /// `S = σ`.
    Pauli,
}

impl SpinConvention {
    fn scale(self) -> f64 {
        match self {
            SpinConvention::Half => 0.5,
            SpinConvention::Pauli => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub n_spins: usize,
    pub j: f64,
    pub h: f64,
    pub beta: f64,
    pub cyclic: bool,
    #[serde(default)]
    pub convention: SpinConvention,
}

impl IsingParams {
    fn validate(&self) -> Result<()> {
        if self.n_spins < 2 {
            return Err(Error::InvalidArgument("need at least two spins".into()));
        }
        if self.n_spins >= 32 || (1usize << self.n_spins) > qmat::MAX_DIM {
            return Err(Error::DimensionCap {
                dim: 1usize << self.n_spins.min(32),
                cap: qmat::MAX_DIM,
            });
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidArgument("beta must be positive".into()));
        }
        Ok(())
    }
}

/// `H = −Σ_j (h S^z_j + J S^x_j S^x_{j+1})` in the computational basis, site
/// 0 being the most significant bit. With `cyclic` the bond `(N−1, 0)` is
/// included.
pub fn ising_hamiltonian(p: &IsingParams) -> Result<CMat> {
    p.validate()?;
    let n = p.n_spins;
    let dim = 1usize << n;
    let s = p.convention.scale();
    let mask = |site: usize| 1usize << (n - 1 - site);
    let bonds: Vec<(usize, usize)> = (0..n)
        .filter(|&a| p.cyclic || a + 1 < n)
        .map(|a| (a, (a + 1) % n))
        .collect();
    let mut h = CMat::zeros(dim, dim);
    for b in 0..dim {
        let mut diag = 0.0;
        for site in 0..n {
            let z = if b & mask(site) == 0 { 1.0 } else { -1.0 };
            diag -= p.h * s * z;
        }
        h[(b, b)] += Complex64::new(diag, 0.0);
        for &(a, c) in &bonds {
            let flipped = b ^ mask(a) ^ mask(c);
            h[(flipped, b)] -= Complex64::new(p.j * s * s, 0.0);
        }
    }
    Ok(h)
}

/// `exp(−βH)/Z`, exponentiated after shifting the spectrum so the largest
/// Boltzmann weight is 1.
pub fn thermal_state(p: &IsingParams) -> Result<DensityMatrix> {
    let h = ising_hamiltonian(p)?;
    let eig = qmat::hermitian_eig(&h)?;
    let ground = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    // Energies come back descending; reverse to get descending weights.
    let d = eig.dim();
    let order: Vec<usize> = (0..d).rev().collect();
    let weights: Vec<f64> = order
        .iter()
        .map(|&k| (-p.beta * (eig.eigenvalues[k] - ground)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let vectors = CMat::from_fn(d, d, |r, col| eig.eigenvectors[(r, order[col])]);
    DensityMatrix::from_spectrum(probabilities, vectors)
}
