//! Small dense Hermitian-matrix helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this magnitude are treated as round-off.
pub const EIGEN_CLIP: f64 = 1e-10;

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix, tol: f64) -> Result<Vec<f64>> {
    let dev = hermiticity_error(m);
    if dev > tol {
        return Err(Error::NotHermitian(dev));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Eigenvalues in `(-EIGEN_CLIP, 0)` are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        *v = clip_eigenvalue(*v)?.sqrt();
    }
    let d = CMatrix::from_diagonal(&vals.map(|v| Complex64::new(v, 0.0)));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Nearest positive semidefinite matrix in Frobenius norm, rescaled to the
/// input's trace.
pub fn project_psd(m: &CMatrix) -> CMatrix {
    let sym = (m + m.adjoint()).scale(0.5);
    let trace = sym.trace().re;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let kept: f64 = vals.iter().sum();
    let scale = if kept > 0.0 { trace / kept } else { 0.0 };
    let d = CMatrix::from_diagonal(&vals.map(|v| Complex64::new(v * scale, 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn clip_eigenvalue(v: f64) -> Result<f64> {
    if v < -EIGEN_CLIP {
        Err(Error::NegativeEigenvalue(v))
    } else {
        Ok(v.max(0.0))
    }
}

/// `|v><v|` for a column vector given as a slice.
pub fn outer(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// `a (x) b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_clips_negative_part() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.2, 0.0),
            Complex64::new(-0.2, 0.0),
        ]));
        let p = project_psd(&m);
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(p[(1, 1)].norm() < 1e-12);
        let psd = CMatrix::from_fn(2, 2, |i, j| Complex64::new(if i == j { 0.5 } else { 0.3 }, 0.1 * (i as f64 - j as f64)));
        let q = project_psd(&psd);
        assert!((&q - &psd).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn eigenvalues_of_diagonal_and_non_hermitian() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        assert_eq!(hermitian_eigenvalues(&m, 1e-12).unwrap(), vec![-1.0, 3.0]);
        let mut bad = m.clone();
        bad[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(hermitian_eigenvalues(&bad, 1e-8), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn sqrt_squares_back() {
        let v = [Complex64::new(0.6, 0.1), Complex64::new(0.0, 0.5), Complex64::new(0.3, 0.0)];
        let m = outer(&v) + CMatrix::identity(3, 3).scale(0.2);
        let s = psd_sqrt(&m).unwrap();
        let back = &s * &s;
        assert!((back - m).iter().all(|d| d.norm() < 1e-12));
    }
}
