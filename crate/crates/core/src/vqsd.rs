//! Variational diagonalization of a density matrix.
//!
//! A layered circuit `U(θ)` is tuned so that `UρU†` is as close to diagonal
//! as possible. The dephased state `ρ' = U† Z(UρU†) U` then carries the
//! approximate spectrum and eigenvectors, and the cost `C` equals
//! `Tr[(ρ − ρ')²]`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{self, c, CMat};
use crate::optim::{self, NelderMeadOptions};
use crate::seeds;
use crate::states::DensityMatrix;

/// Layered hardware-efficient circuit: every layer applies `Rz·Ry·Rz` to
/// each qubit, then (if `entangling`) a ring of CNOTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub layers: usize,
    pub entangling: bool,
}

impl AnsatzSpec {
    /// Depth-one circuit of single-qubit rotations, enough for product states.
    pub fn product(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            layers: 1,
            entangling: false,
        }
    }

    pub fn layered(n_qubits: usize, layers: usize) -> Self {
        Self {
            n_qubits,
            layers,
            entangling: true,
        }
    }

    pub fn param_count(&self) -> usize {
        3 * self.n_qubits * self.layers
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}

fn rz(theta: f64) -> CMat {
    qmat::CMat::from_diagonal(&qmat::CVec::from_vec(vec![
        Complex64::from_polar(1.0, -theta / 2.0),
        Complex64::from_polar(1.0, theta / 2.0),
    ]))
}

fn ry(theta: f64) -> CMat {
    let (s, co) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// `Rz(a) Ry(b) Rz(c)`.
pub fn euler_zyz(a: f64, b: f64, c_: f64) -> CMat {
    rz(a) * ry(b) * rz(c_)
}

/// Applies CNOT(control → target) to the rows of `u`, qubit 0 being the most
/// significant bit.
fn apply_cnot(u: &mut CMat, n: usize, control: usize, target: usize) {
    let cm = 1usize << (n - 1 - control);
    let tm = 1usize << (n - 1 - target);
    for row in 0..u.nrows() {
        if row & cm != 0 && row & tm == 0 {
            u.swap_rows(row, row | tm);
        }
    }
}

pub fn build_unitary(spec: &AnsatzSpec, params: &[f64]) -> Result<CMat> {
    if params.len() != spec.param_count() {
        return Err(Error::InvalidArgument(format!(
            "ansatz expects {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    let n = spec.n_qubits;
    let mut u = qmat::identity(spec.dim());
    for layer in params.chunks(3 * n) {
        let local = layer
            .chunks(3)
            .map(|p| euler_zyz(p[0], p[1], p[2]))
            .reduce(|acc, g| acc.kronecker(&g))
            .unwrap_or_else(|| qmat::identity(1));
        u = local * u;
        if spec.entangling && n >= 2 {
            let bonds = if n == 2 { 1 } else { n };
            for q in 0..bonds {
                apply_cnot(&mut u, n, q, (q + 1) % n);
            }
        }
    }
    Ok(u)
}

/// Off-diagonal weight `Σ_{i≠j} |(UρU†)_ij|²`.
pub fn cost(rho: &DensityMatrix, u: &CMat) -> Result<f64> {
    if u.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch(u.nrows(), rho.dim()));
    }
    Ok(off_diagonal_weight(&(u * rho.matrix() * u.adjoint())))
}

fn off_diagonal_weight(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    /// Total cost evaluations across all restarts.
    pub max_evals: usize,
    /// Stop as soon as the cost drops to this level.
    pub cost_tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            cost_tol: 1e-12,
            seed: 0,
            restarts: 3,
        }
    }
}

/// Output of a diagonalization: `ρ' = Σ r'_i |r'_i⟩⟨r'_i|` and how it was
/// obtained.
#[derive(Debug, Clone)]
pub struct DiagonalizationResult {
    pub params: Vec<f64>,
    pub unitary: CMat,
    pub cost: f64,
    /// `r'_i`, descending.
    pub spectrum: Vec<f64>,
    /// Column `i` is `U†|π(i)⟩`.
    pub eigvecs: CMat,
    pub rho_prime: DensityMatrix,
    pub evaluations: usize,
    /// Whether the cost reached the requested tolerance.
    pub converged: bool,
}

impl DiagonalizationResult {
    /// Builds the result induced by an arbitrary unitary `U`.
    pub fn from_unitary(rho: &DensityMatrix, unitary: CMat, params: Vec<f64>) -> Result<Self> {
        let rotated = &unitary * rho.matrix() * unitary.adjoint();
        let cost = off_diagonal_weight(&rotated);
        let d = rho.dim();
        let diag: Vec<f64> = (0..d).map(|k| rotated[(k, k)].re.max(0.0)).collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]));
        let total: f64 = diag.iter().sum();
        let spectrum: Vec<f64> = order.iter().map(|&k| diag[k] / total).collect();
        let eigvecs = CMat::from_fn(d, d, |r, i| unitary[(order[i], r)].conj());
        let rho_prime = DensityMatrix::from_spectrum(spectrum.clone(), eigvecs.clone())?;
        Ok(Self {
            params,
            unitary,
            cost,
            spectrum,
            eigvecs,
            rho_prime,
            evaluations: 0,
            converged: true,
        })
    }

    /// `ε'_m = 1 − Tr ρ'_m`, computed as the discarded tail.
    pub fn tail(&self, m: usize) -> f64 {
        self.spectrum.iter().skip(m).sum()
    }
}

/// Derivative-free minimization of [`cost`] over the ansatz parameters.
///
/// The first restart starts from all-zero angles, later ones from uniformly
/// random angles; the best result over restarts is returned (ties favour the
/// earlier restart). Reaching `max_evals` is not an error: the best point is
/// returned with `converged = false`.
pub fn optimize(
    rho: &DensityMatrix,
    spec: &AnsatzSpec,
    opts: &OptimizeOptions,
) -> Result<DiagonalizationResult> {
    if spec.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(spec.dim(), rho.dim()));
    }
    if opts.restarts == 0 || opts.max_evals == 0 {
        return Err(Error::InvalidArgument("need at least one restart and one evaluation".into()));
    }
    let p = spec.param_count();
    let objective = |x: &[f64]| -> f64 {
        build_unitary(spec, x)
            .and_then(|u| cost(rho, &u))
            .unwrap_or(f64::INFINITY)
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut used = 0usize;
    for restart in 0..opts.restarts {
        let remaining = opts.max_evals - used;
        if remaining == 0 {
            break;
        }
        let budget = remaining / (opts.restarts - restart);
        let mut rng = seeds::rng(seeds::derive(opts.seed, &[restart as u64]));
        let x0: Vec<f64> = if restart == 0 {
            vec![0.0; p]
        } else {
            (0..p)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        };
        let nm = NelderMeadOptions {
            max_evals: budget.max(1),
            target: opts.cost_tol,
            initial_step: 0.5,
            ..NelderMeadOptions::default()
        };
        let out = optim::nelder_mead(&objective, &x0, &nm);
        used += out.evaluations;
        let better = best.as_ref().is_none_or(|(_, f)| out.value < *f);
        if better {
            best = Some((out.point, out.value));
        }
        if best.as_ref().is_some_and(|(_, f)| *f <= opts.cost_tol) {
            break;
        }
    }
    let (params, value) = best.expect("at least one restart ran");
    let unitary = build_unitary(spec, &params)?;
    let mut result = DiagonalizationResult::from_unitary(rho, unitary, params)?;
    result.evaluations = used;
    result.converged = value <= opts.cost_tol;
    Ok(result)
}

/// Exact diagonalization through the Hermitian eigensolver (`U = V†`).
pub fn exact_diagonalization(rho: &DensityMatrix) -> Result<DiagonalizationResult> {
    let v = rho.spectrum().eigenvectors.clone();
    DiagonalizationResult::from_unitary(rho, v.adjoint(), Vec::new())
}

/// Diagonalization with a controlled error: `U = exp(i s H) V†` where `V`
/// diagonalizes ρ exactly and `H` is a seeded random Hermitian matrix of unit
/// spectral norm.
pub fn perturbed_diagonalization(
    rho: &DensityMatrix,
    strength: f64,
    seed: u64,
) -> Result<DiagonalizationResult> {
    if !(strength >= 0.0) {
        return Err(Error::InvalidArgument(format!("strength {strength} is negative")));
    }
    let d = rho.dim();
    let h = qmat::random_hermitian(d, &mut seeds::rng(seed));
    let norm = qmat::spectral_norm(&h)?;
    let h = h.unscale(norm.max(f64::MIN_POSITIVE));
    let kick = qmat::exp_i_hermitian(&h, strength)?;
    let v = &rho.spectrum().eigenvectors;
    DiagonalizationResult::from_unitary(rho, kick * v.adjoint(), Vec::new())
}
