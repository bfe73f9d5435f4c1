//! Matrix exponential by scaling and squaring.

use crate::error::MatError;
use crate::matrix::Matrix;

/// Computes e^{Mt}.
///
/// The scaled matrix X = Mt/2^s is brought below Frobenius norm 0.5, the
/// series core is summed to machine precision (geometric tail, so a few
/// dozen terms at most), and the result is squared back up. Sizes here are
/// tiny, so the extra squarings cost nothing and the small-norm core keeps
/// the series well conditioned.
pub fn expm(m: &Matrix, t: f64) -> Result<Matrix, MatError> {
    if !m.is_square() {
        return Err(MatError::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    let scaled = m.scale(t);
    let norm = scaled.norm_fro();
    let mut squarings = 0u32;
    while norm / f64::powi(2.0, squarings as i32) > 0.5 {
        squarings += 1;
    }
    let x = scaled.scale(f64::powi(2.0, -(squarings as i32)));

    let mut acc = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=40 {
        term = (&term * &x).scale(1.0 / k as f64);
        acc = &acc + &term;
        if term.norm_fro() <= f64::EPSILON * acc.norm_fro() {
            break;
        }
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        let diff = (a - b).norm_max();
        assert!(diff <= tol, "matrices differ by {diff:.3e} > {tol:.3e}\n{a:?}\n{b:?}");
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let z = Matrix::zeros(3, 3);
        let e = expm(&z, 17.5).unwrap();
        assert_eq!(e, Matrix::identity(3));
    }

    #[test]
    fn diagonal_matrix_exponentiates_entrywise() {
        let d = Matrix::diag(&[-0.3, 1.2]);
        let e = expm(&d, 1.0).unwrap();
        let want = Matrix::diag(&[(-0.3f64).exp(), 1.2f64.exp()]);
        assert_close(&e, &want, 1e-14);
    }

    #[test]
    fn nilpotent_block_matrix_truncates_exactly() {
        // For m = [[0, G], [0, 0]] we have m^2 = 0, so e^{mt} = I + mt
        // with no truncation error beyond rounding.
        let g = Matrix::from_rows(&[&[2.0, -1.0], &[0.5, 3.0]]);
        let z = Matrix::zeros(2, 2);
        let m = Matrix::from_blocks(&[&[&z, &g], &[&z, &z]]);
        let t = 0.7;
        let e = expm(&m, t).unwrap();
        let want = &Matrix::identity(4) + &m.scale(t);
        assert_close(&e, &want, 1e-15);
    }

    #[test]
    fn rotation_generator_gives_sine_and_cosine() {
        let m = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let a = 0.9;
        let e = expm(&m, a).unwrap();
        let want = Matrix::from_rows(&[&[a.cos(), -a.sin()], &[a.sin(), a.cos()]]);
        assert_close(&e, &want, 1e-14);
    }

    #[test]
    fn large_norm_input_still_matches_scalar_exponential() {
        let m = Matrix::diag(&[4.0, -6.0, 0.25]);
        let e = expm(&m, 3.0).unwrap();
        let want = Matrix::diag(&[12.0f64.exp(), (-18.0f64).exp(), 0.75f64.exp()]);
        for i in 0..3 {
            let rel = (e[(i, i)] - want[(i, i)]).abs() / want[(i, i)];
            assert!(rel < 1e-12, "relative error {rel:.3e} on diagonal {i}");
        }
    }

    #[test]
    fn non_square_input_is_rejected() {
        let m = Matrix::zeros(2, 3);
        assert_eq!(expm(&m, 1.0), Err(MatError::NotSquare { rows: 2, cols: 3 }));
    }
}
