//! Small dense kernels: covariance factors, triangularization, Haar rotations
//! and Chi radii.
//!
//! Factors are lower triangular with a nonnegative diagonal, so a factor of a
//! given positive definite matrix is unique.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma};

use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;

/// `(P + Pᵀ) / 2`.
pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

/// Lower Cholesky factor `S` with `S·Sᵀ = P`.
///
/// The input is re-symmetrized first.
pub fn factor_spd(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("factor_spd", p.nrows(), p.ncols())?;
    let chol = symmetrize(p)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let l = chol.unpack();
    if l.iter().all(|v| v.is_finite()) {
        Ok(l)
    } else {
        Err(Error::NotPositiveDefinite)
    }
}

/// Factor of a positive semidefinite matrix.
///
/// Tries the Cholesky factor first. When that fails, the eigenvalues are
/// clipped at zero and the symmetric square root is triangularized. The flag
/// reports whether the fallback was taken. Eigenvalues below
/// `-1e-9 · max(1, λ_max)` are treated as a genuinely indefinite input.
pub fn factor_psd(p: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if let Ok(l) = factor_spd(p) {
        return Ok((l, false));
    }
    let n = p.nrows();
    let eig = symmetrize(p).symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || min < -1e-9 * max.max(1.0) {
        return Err(Error::CovarianceNotPd {
            min_eigenvalue: min,
        });
    }
    let mut root = eig.eigenvectors.clone();
    for j in 0..n {
        let s = eig.eigenvalues[j].max(0.0).sqrt();
        root.column_mut(j).scale_mut(s);
    }
    Ok((triangularize(&root)?, true))
}

/// Square lower-triangular `T` with `T·Tᵀ = M·Mᵀ` for a wide `n×m` matrix.
///
/// Householder QR of `Mᵀ`; the diagonal of the result is made nonnegative.
pub fn triangularize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, cols) = m.shape();
    if cols < n {
        return Err(Error::DimensionMismatch {
            context: "triangularize (columns must be >= rows)",
            expected: n,
            found: cols,
        });
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let r = m.transpose().qr().unpack_r();
    let mut t = r.transpose();
    for j in 0..n {
        if t[(j, j)] < 0.0 {
            t.column_mut(j).neg_mut();
        }
        for i in 0..j {
            t[(i, j)] = 0.0;
        }
    }
    Ok(t)
}

/// Like [`triangularize`], padding with zero columns when `M` is tall.
pub fn compress(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, cols) = m.shape();
    if cols >= n {
        triangularize(m)
    } else {
        let mut padded = DMatrix::zeros(n, n);
        padded.columns_mut(0, cols).copy_from(m);
        triangularize(&padded)
    }
}

/// Rank-one Cholesky downdate: returns `L'` with `L'·L'ᵀ = L·Lᵀ − x·xᵀ`.
pub fn cholesky_downdate(l: &DMatrix<f64>, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    check_dim("cholesky_downdate", n, x.len())?;
    let mut l = l.clone();
    let mut x = x.clone();
    for k in 0..n {
        let lkk = l[(k, k)];
        let r2 = lkk * lkk - x[k] * x[k];
        if x[k] == 0.0 {
            continue;
        }
        if !(r2 > 0.0) || lkk <= 0.0 {
            return Err(Error::DowndateFailure);
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let s = x[k] / lkk;
        l[(k, k)] = r;
        for i in (k + 1)..n {
            let li = (l[(i, k)] - s * x[i]) / c;
            l[(i, k)] = li;
            x[i] = c * x[i] - s * li;
        }
    }
    Ok(l)
}

/// Haar-distributed orthogonal `n×n` matrix.
///
/// QR of a standard-normal matrix with the signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal(n: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidDimension(n));
    }
    let a = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Chi-distributed radius with `dof` degrees of freedom.
pub fn sample_chi(dof: usize, rng: &mut RngStream) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidDimension(dof));
    }
    let gamma = Gamma::new(dof as f64 / 2.0, 2.0)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    loop {
        let rho = gamma.sample(rng).sqrt();
        if rho > 0.0 {
            return Ok(rho);
        }
    }
}

/// `B·A⁻¹` for symmetric positive definite `A`, by Cholesky with an LU fallback.
pub fn right_divide_spd(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let a = symmetrize(a);
    let bt = b.transpose();
    let xt = match a.clone().cholesky() {
        Some(chol) => chol.solve(&bt),
        None => a.lu().solve(&bt)?,
    };
    if xt.iter().all(|v| v.is_finite()) {
        Some(xt.transpose())
    } else {
        None
    }
}

/// `B·(S·Sᵀ)⁻¹` for a lower-triangular factor `S`.
pub fn right_divide_factor(b: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    // (S Sᵀ) Xᵀ = Bᵀ
    let y = s.solve_lower_triangular(&b.transpose())?;
    let xt = s.transpose().solve_upper_triangular(&y)?;
    if xt.iter().all(|v| v.is_finite()) {
        Some(xt.transpose())
    } else {
        None
    }
}

/// Frobenius norm of `A − B` divided by the Frobenius norm of `B` (or 1 if `B` is tiny).
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
