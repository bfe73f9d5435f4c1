//! Definiteness tests, positive semidefinite square roots, and linear solves.

use crate::error::MatError;
use crate::matrix::Matrix;

/// Relative pivot threshold below which `solve` declares the matrix singular.
const SOLVE_PIVOT_REL_TOL: f64 = 1e-12;

/// Tests whether the symmetric part of `m` is positive definite.
///
/// Runs a Cholesky factorization on (M + Mᵀ)/2 and requires every pivot to
/// exceed `tol`. Symmetrizing first absorbs the floating-point asymmetry
/// that block assembly leaves behind.
///
/// Panics on non-square input.
pub fn is_positive_definite(m: &Matrix, tol: f64) -> bool {
    let a = m.symmetrized();
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= tol {
            return false;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    true
}

/// Eigendecomposition of the symmetric part of `m` by cyclic Jacobi sweeps.
///
/// Returns (eigenvalues, V) with M·V = V·diag(eigenvalues) and orthonormal
/// columns in V. Eigenvalues come out in descending order.
pub fn sym_eig(m: &Matrix) -> (Vec<f64>, Matrix) {
    assert!(m.is_square(), "sym_eig needs a square matrix");
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = a.norm_fro().max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new_col)] = v[(k, old_col)];
        }
    }
    (vals, vecs)
}

/// Symmetric square root of a positive semidefinite matrix.
///
/// Eigenvalues in [−tol, 0) are treated as rounding debris and clipped to
/// zero, which keeps the reconstruction error within tol·(1+‖M‖). An
/// eigenvalue below −tol means the input genuinely is not PSD.
pub fn psd_factor(m: &Matrix, tol: f64) -> Result<Matrix, MatError> {
    if !m.is_square() {
        return Err(MatError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let (vals, vecs) = sym_eig(m);
    if let Some(&lambda_min) = vals.last() {
        if lambda_min < -tol {
            return Err(MatError::NotPositiveSemidefinite { eigenvalue: lambda_min });
        }
    }
    let sqrt_vals: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let root = &(&vecs * &Matrix::diag(&sqrt_vals)) * &vecs.transpose();
    Ok(root)
}

/// Solves M·X = B by LU factorization with partial pivoting.
///
/// A pivot smaller than `1e-12` relative to the largest entry of M counts
/// as singular; callers lean on that error to detect violated invertibility
/// assumptions rather than silently dividing by noise.
pub fn solve(m: &Matrix, b: &Matrix) -> Result<Matrix, MatError> {
    if !m.is_square() {
        return Err(MatError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    if b.rows() != n {
        return Err(MatError::DimensionMismatch { context: "solve: B row count must match M" });
    }
    let threshold = SOLVE_PIVOT_REL_TOL * m.norm_max();

    let mut lu = m.clone();
    let mut x = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv_row = k;
        let mut piv_val = lu[(k, k)].abs();
        for i in (k + 1)..n {
            if lu[(i, k)].abs() > piv_val {
                piv_val = lu[(i, k)].abs();
                piv_row = i;
            }
        }
        if piv_val.is_nan() || piv_val <= threshold {
            return Err(MatError::Singular { step: k, pivot: piv_val });
        }
        if piv_row != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv_row, j)];
                lu[(piv_row, j)] = tmp;
            }
            for j in 0..x.cols() {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(piv_row, j)];
                x[(piv_row, j)] = tmp;
            }
            perm.swap(k, piv_row);
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for col in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for j in (i + 1)..n {
                s -= lu[(i, j)] * x[(j, col)];
            }
            x[(i, col)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Matrix inverse via `solve` against the identity.
pub fn inverse(m: &Matrix) -> Result<Matrix, MatError> {
    solve(m, &Matrix::identity(m.rows()))
}
