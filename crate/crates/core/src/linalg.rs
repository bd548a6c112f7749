//! Dense linear algebra used by the solvers: tolerance-thresholded
//! Moore-Penrose pseudo-inverse, a pivoting direct solve and norms.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type DenseMatrix<T = f64> = DMatrix<T>;

/// Default relative singular-value cutoff for an `m x n` matrix.
pub fn default_rel_tol(m: usize, n: usize) -> f64 {
    1e-7 * m.max(n) as f64
}

pub fn frobenius<T: Real>(a: &DMatrix<T>) -> f64 {
    a.iter()
        .map(|&x| {
            let x: f64 = x.into();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// `||a - b||_F / ||b||_F`, or the absolute difference when `b` is zero.
pub fn relative_frobenius_diff<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    let diff = frobenius(&(a - b));
    let denom = frobenius(b);
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

fn check_finite<T: Real>(a: &DMatrix<T>, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Moore-Penrose pseudo-inverse. Singular values below `rel_tol * sigma_max`
/// are treated as zero.
///
/// Tall inputs are reduced by a thin QR factorization first so that the SVD
/// only ever runs on a `min(m, n)`-sized square factor.
pub fn pseudo_inverse<T: Real>(a: &DMatrix<T>, rel_tol: T) -> Result<DMatrix<T>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidArgument(format!(
            "pseudo-inverse of an empty {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, "pseudo-inverse input")?;
    if a.nrows() < a.ncols() {
        return Ok(pinv_tall(a.transpose(), rel_tol)?.transpose());
    }
    pinv_tall(a.clone(), rel_tol)
}

/// Pseudo-inverse with the default cutoff for the matrix shape.
pub fn pinv<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    pseudo_inverse(a, T::cast(default_rel_tol(a.nrows(), a.ncols())))
}

fn pinv_tall<T: Real>(a: DMatrix<T>, rel_tol: T) -> Result<DMatrix<T>> {
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let svd = r.try_svd(true, true, T::eps(), 0).ok_or(Error::NoConvergence)?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NoConvergence),
    };
    let sigma = svd.singular_values;
    let sigma_max = sigma.iter().fold(T::zero(), |m, &s| if s > m { s } else { m });
    let cutoff = rel_tol * sigma_max;
    // V * diag(1/s) * U^T * Q^T, dropping small singular values
    let mut ut = u.transpose();
    for (i, &s) in sigma.iter().enumerate() {
        let inv = if s > cutoff && s > T::zero() { T::one() / s } else { T::zero() };
        ut.row_mut(i).scale_mut(inv);
    }
    let core = v_t.transpose() * ut;
    let out = core * q.transpose();
    check_finite(&out, "pseudo-inverse output")?;
    Ok(out)
}

/// Solves `theta * w = z` by LU with partial pivoting.
pub fn solve_direct<T: Real>(theta: &DMatrix<T>, z: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = theta.nrows();
    if theta.ncols() != n || z.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "cannot solve {}x{} system against {}x{} right-hand side",
            theta.nrows(),
            theta.ncols(),
            z.nrows(),
            z.ncols()
        )));
    }
    check_finite(theta, "system matrix")?;
    check_finite(z, "right-hand side")?;
    let lu = theta.clone().lu();
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(T::zero(), |m, &d| if d.abs() > m { d.abs() } else { m });
    let floor = T::from_count(n) * T::eps() * max;
    if max == T::zero() || diag.iter().any(|d| d.abs() <= floor) {
        return Err(Error::Singular);
    }
    let w = lu.solve(z).ok_or(Error::Singular)?;
    check_finite(&w, "direct solution")?;
    Ok(w)
}
