//! Thin wrappers over nalgebra's dense factorizations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Solve a square system by LU; `None` if singular or the result is not finite.
pub fn solve_square(a: &Mat, b: &Vector) -> Option<Vector> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Minimum-norm least-squares solution via the singular value decomposition.
pub fn solve_least_squares(a: &Mat, b: &Vector) -> Option<Vector> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * f64::EPSILON * (a.nrows().max(a.ncols()) as f64);
    let x = svd.solve(b, eps).ok()?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Solve a complex square system by LU.
pub fn solve_complex(a: &CMat, b: &CVec) -> Option<CVec> {
    let x = a.clone().lu().solve(b)?;
    if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix with non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().cloned().collect())
}

/// All eigenvalues of a complex square matrix.
pub fn complex_eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("eigenvalue iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Right singular vector belonging to the smallest singular value.
pub fn null_vector(a: &CMat) -> CVec {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    CVec::from_iterator(n, (0..n).map(|j| vt[(imin, j)].conj()))
}

/// Eigenvector for the eigenvalue `mu` by inverse iteration on a complex matrix.
pub fn inverse_iteration(a: &CMat, mu: Complex64) -> CVec {
    let n = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= mu + Complex64::new(scale * 1e-12, scale * 1e-12);
    }
    let lu = shifted.lu();
    let mut v = CVec::from_element(n, Complex64::new(1.0, 0.0));
    for _ in 0..3 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                let nw = w.norm();
                if nw == 0.0 {
                    break;
                }
                v = w / Complex64::new(nw, 0.0);
            }
            _ => return null_vector(&{
                let mut m = a.clone();
                for i in 0..n {
                    m[(i, i)] -= mu;
                }
                m
            }),
        }
    }
    v
}

/// Real 2n×2n form of a complex linear map acting on [Re v; Im v].
pub fn real_form(m: &CMat) -> Mat {
    let (r, c) = m.shape();
    let mut out = Mat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

pub fn to_complex(v: &Vector) -> CVec {
    v.map(|x| Complex64::new(x, 0.0))
}

pub fn to_complex_mat(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Infinity norm of a vector (0 for an empty vector).
pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}
