//! Hurwitz stability test for small real matrices.

use crate::matrix::Matrix;

/// Characteristic polynomial coefficients by the Faddeev–LeVerrier
/// recurrence: returns [1, c1, ..., cn] for λⁿ + c1·λⁿ⁻¹ + ... + cn.
fn char_poly(m: &Matrix) -> Vec<f64> {
    assert!(m.is_square(), "char_poly needs a square matrix");
    let n = m.rows();
    let mut coeffs = vec![1.0];
    let mut aux = Matrix::identity(n);
    for k in 1..=n {
        aux = m * &aux;
        let trace: f64 = (0..n).map(|i| aux[(i, i)]).sum();
        let c = -trace / k as f64;
        coeffs.push(c);
        for i in 0..n {
            aux[(i, i)] += c;
        }
    }
    coeffs
}

/// Tests whether every eigenvalue of `m` has strictly negative real part.
///
/// Uses the Routh–Hurwitz criterion on the characteristic polynomial. A
/// zero or negative entry in the first column of the Routh array (which
/// covers marginal eigenvalues on the imaginary axis) yields `false`.
///
/// Panics on non-square input.
pub fn is_hurwitz(m: &Matrix) -> bool {
    let coeffs = char_poly(m);
    let n = coeffs.len() - 1;
    if n == 0 {
        return true;
    }
    // Rows 0 and 1 interleave the coefficients; subsequent rows follow the
    // Routh cross-multiplication rule. Strict stability needs a strictly
    // positive first column all the way down.
    let width = n / 2 + 1;
    let mut prev: Vec<f64> = (0..width).map(|i| coeffs.get(2 * i).copied().unwrap_or(0.0)).collect();
    let mut curr: Vec<f64> =
        (0..width).map(|i| coeffs.get(2 * i + 1).copied().unwrap_or(0.0)).collect();
    // NaN must fail the positivity check, so avoid `<=` comparisons.
    let strictly_positive = |v: f64| v > 0.0;
    if !strictly_positive(prev[0]) || !strictly_positive(curr[0]) {
        return false;
    }
    for _ in 2..=n {
        let mut next = vec![0.0; width];
        for i in 0..width - 1 {
            next[i] = (curr[0] * prev[i + 1] - prev[0] * curr[i + 1]) / curr[0];
        }
        if !strictly_positive(next[0]) {
            return false;
        }
        prev = curr;
        curr = next;
    }
    true
}
