//! Dense complex linear algebra for Hermitian operators.
//!
//! Matrices are plain `nalgebra` dense matrices of `Complex64`. Functions that
//! require Hermitian input check it against a relative tolerance and work on
//! the symmetrized matrix `(A + A†) / 2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seeds;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Default cap on the Hilbert-space dimension of any operator we build.
pub const MAX_DIM: usize = 4096;

/// Relative tolerance for the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Relative threshold below which a negative eigenvalue is treated as roundoff.
pub const PSD_TOL: f64 = 1e-10;

const EIG_EPS: f64 = f64::EPSILON;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v, 0.0)),
    ))
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `max |A_ij - conj(A_ji)|`.
pub fn hermitian_deviation(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

fn check_square(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

fn check_finite(a: &CMat) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_same_dim(a: &CMat, b: &CMat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    Ok(())
}

/// Validates that `a` is square, finite and Hermitian within tolerance, and
/// returns the symmetrized matrix.
pub fn hermitize(a: &CMat) -> Result<CMat> {
    check_square(a)?;
    check_finite(a)?;
    let allowed = HERMITIAN_TOL * max_abs(a).max(1.0);
    let deviation = hermitian_deviation(a);
    if deviation > allowed {
        return Err(Error::NotHermitian { deviation, allowed });
    }
    Ok((a + a.adjoint()).scale(0.5))
}

/// Eigenvalues sorted descending with their eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let fk = f(lam);
            scaled.column_mut(k).scale_mut(fk);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|x| x)
    }

    /// Sum of the leading `m` eigenvalues.
    pub fn head_sum(&self, m: usize) -> f64 {
        self.eigenvalues.iter().take(m).sum()
    }

    /// Sum of the eigenvalues after the leading `m`, with negatives clipped.
    pub fn tail_sum(&self, m: usize) -> f64 {
        self.eigenvalues.iter().skip(m).map(|x| x.max(0.0)).sum()
    }

    /// Projector onto the span of the leading `m` eigenvectors.
    pub fn top_projector(&self, m: usize) -> CMat {
        let vm = self.eigenvectors.columns(0, m);
        vm * vm.adjoint()
    }
}

/// Hermitian eigendecomposition with eigenvalues in descending order. Ties
/// keep the solver's original column order.
pub fn hermitian_eig(a: &CMat) -> Result<SpectralDecomposition> {
    let h = hermitize(a)?;
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h, EIG_EPS, 1000 * n.max(1)).ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn check_psd_spectrum(eigenvalues: &[f64]) -> Result<()> {
    let scale = eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if let Some(&min) = eigenvalues.last() {
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd { eigenvalue: min });
        }
    }
    Ok(())
}

/// Eigenvalues at or below this magnitude are indistinguishable from zero
/// for a PSD spectrum of this size and scale.
pub fn roundoff_floor(eigenvalues: &[f64]) -> f64 {
    let scale = eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    2.0 * eigenvalues.len() as f64 * f64::EPSILON * scale
}

/// `√λ` with roundoff-level eigenvalues sent to zero before the root, whose
/// infinite slope at 0 would otherwise amplify them to ~1e-8.
pub fn floored_sqrt(x: f64, floor: f64) -> f64 {
    if x > floor {
        x.sqrt()
    } else {
        0.0
    }
}

/// `Σ √λ_i` over a PSD spectrum.
pub fn sum_sqrt(eigenvalues: &[f64]) -> f64 {
    let floor = roundoff_floor(eigenvalues);
    eigenvalues.iter().map(|&x| floored_sqrt(x, floor)).sum()
}

/// Principal square root of a PSD matrix given its decomposition.
pub fn sqrt_from_spectrum(decomp: &SpectralDecomposition) -> Result<CMat> {
    check_psd_spectrum(&decomp.eigenvalues)?;
    let floor = roundoff_floor(&decomp.eigenvalues);
    Ok(decomp.map(|x| floored_sqrt(x, floor)))
}

/// Principal square root of a Hermitian PSD matrix.
pub fn matrix_sqrt(a: &CMat) -> Result<CMat> {
    sqrt_from_spectrum(&hermitian_eig(a)?)
}

pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    check_finite(m)?;
    let svd = SVD::try_new(m.clone(), false, false, EIG_EPS, 1000 * m.nrows().max(1))
        .ok_or(Error::NoConvergence)?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Sum of singular values.
pub fn trace_norm(m: &CMat) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> Result<f64> {
    Ok(singular_values(m)?.iter().fold(0.0, |acc: f64, &s| acc.max(s)))
}

/// `½‖A − B‖₁`.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(0.5 * trace_norm(&(a - b))?)
}

/// `Tr[(A − B)²]`, the squared Frobenius distance of two Hermitian matrices.
pub fn hs_distance(a: &CMat, b: &CMat) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum())
}

/// Frobenius-nearest PSD matrix: negative eigenvalues are clipped to zero and
/// the trace is left as it falls.
pub fn psd_project(a: &CMat) -> Result<CMat> {
    Ok(hermitian_eig(a)?.map(|x| x.max(0.0)))
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Kronecker product, rejecting results beyond [`MAX_DIM`].
pub fn tensor_product(a: &CMat, b: &CMat) -> Result<CMat> {
    tensor_product_capped(a, b, MAX_DIM)
}

pub fn tensor_product_capped(a: &CMat, b: &CMat, cap: usize) -> Result<CMat> {
    let dim = a.nrows() * b.nrows();
    if dim > cap || a.ncols() * b.ncols() > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(a.kronecker(b))
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows × cols` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // Fill in row-major order so the draw sequence does not depend on storage.
    let mut g = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            g[(i, j)] = complex_gaussian(rng);
        }
    }
    g
}

/// GUE-distributed Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix, with
/// the phases of `R`'s diagonal pushed into `Q`.
pub fn haar_unitary_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let qr = ginibre(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            c(1.0, 0.0)
        };
        q.column_mut(k).apply(|z| *z *= phase);
    }
    q
}

pub fn random_haar_unitary(d: usize, seed: u64) -> CMat {
    haar_unitary_with(d, &mut seeds::rng(seed))
}

/// `exp(i t H)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let eig = hermitian_eig(h)?;
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, t * lam);
        scaled.column_mut(k).apply(|z| *z *= phase);
    }
    Ok(scaled * v.adjoint())
}

/// `‖U†U − I‖_max`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.ncols()))
}
