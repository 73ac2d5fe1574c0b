//! Dense spectra and solves for stability and feasibility questions.

use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{invalid, Error, Result};

/// Tolerance used for M-matrix verdicts on the smallest real part.
pub const M_MATRIX_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Eigenvalues sorted by increasing real part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub min_real_part: f64,
    pub is_m_matrix: bool,
}

impl SpectrumReport {
    /// Spectrum of `m`. The M-matrix verdict is only meaningful when `m`
    /// is a Z-matrix (non-positive off-diagonal), which callers guarantee.
    pub fn of(m: &DMatrix<f64>) -> Self {
        let mut eigenvalues: Vec<Complex<f64>> = eigenvalues(m);
        eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let min_real_part = eigenvalues.first().map_or(f64::INFINITY, |z| z.re);
        SpectrumReport {
            eigenvalues,
            min_real_part,
            is_m_matrix: min_real_part >= -M_MATRIX_TOL,
        }
    }
}

/// Eigenvalues by Francis QR. Shifted QR can cycle on permutation-like
/// matrices (e.g. `zI - P` for a cyclic `P`), so the iteration is bounded
/// and retried after an orthogonal similarity that breaks the symmetry.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    assert!(m.is_square());
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let max_iter = 200 * n.max(10);
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    for attempt in 1..=8u32 {
        let v = DVector::from_fn(n, |i, _| 1.0 + ((i as u32 + 1) * attempt) as f64 % 7.0);
        let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / v.norm_squared());
        let rotated = &h * m * &h;
        if let Some(s) = Schur::try_new(rotated, f64::EPSILON, max_iter) {
            return s.complex_eigenvalues().iter().copied().collect();
        }
    }
    // Last resort: unbounded iteration on the original matrix.
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn min_real_part(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min)
}

pub fn max_real_part(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Checks that a matrix is square with finite entries.
pub fn check_square_finite(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(name, "matrix must be square"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid(name, "entries must be finite"));
    }
    Ok(())
}

/// True when every leading principal minor of `m` is positive, decided
/// from the pivots of unpivoted Gaussian elimination. For a Z-matrix this
/// is equivalent to being a nonsingular M-matrix, independently of any
/// eigenvalue computation.
pub fn leading_minors_positive(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let mut a = m.clone();
    for k in 0..n {
        let p = a[(k, k)];
        if !(p > 0.0) {
            return false;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / p;
            if f != 0.0 {
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
    }
    true
}

fn relative_singular(m: &DMatrix<f64>, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let u = lu.u();
    (0..u.nrows()).any(|i| u[(i, i)].abs() <= 1e-13 * scale)
}

pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    if relative_singular(m, &lu) {
        return Err(Error::Singular);
    }
    lu.solve(b).ok_or(Error::Singular)
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    if relative_singular(m, &lu) {
        return Err(Error::Singular);
    }
    lu.try_inverse().ok_or(Error::Singular)
}

/// Principal submatrix on the given (sorted) index set.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}
