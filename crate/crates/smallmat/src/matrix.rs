//! Dense row-major matrix storage and arithmetic.
//!
//! Everything in this crate targets the small blocks that show up in
//! control-law verification (a dozen rows at most), so the representation
//! is a plain `Vec<f64>` and all products are textbook triple loops.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Dense matrix with row-major storage.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `data.len() != rows * cols` or either dimension is zero;
    /// both are programming errors, not runtime conditions.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        assert_eq!(
            data.len(),
            rows * cols,
            "entry count {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Self { rows, cols, data }
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Builds a matrix from slices of rows. All rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty(), "need at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Column vector from a slice.
    pub fn column(entries: &[f64]) -> Self {
        Self::new(entries.len(), 1, entries.to_vec())
    }

    /// Assembles a block matrix from a grid of blocks.
    ///
    /// Within each block row all blocks must share a row count, and within
    /// each block column a column count; the grid must be rectangular.
    pub fn from_blocks(blocks: &[&[&Matrix]]) -> Self {
        assert!(!blocks.is_empty() && !blocks[0].is_empty(), "empty block grid");
        let grid_cols = blocks[0].len();
        let col_widths: Vec<usize> = blocks[0].iter().map(|b| b.cols).collect();
        let mut row_heights = Vec::with_capacity(blocks.len());
        for row in blocks {
            assert_eq!(row.len(), grid_cols, "ragged block grid");
            let h = row[0].rows;
            for (j, b) in row.iter().enumerate() {
                assert_eq!(b.rows, h, "block row height mismatch");
                assert_eq!(b.cols, col_widths[j], "block column width mismatch");
            }
            row_heights.push(h);
        }
        let total_rows: usize = row_heights.iter().sum();
        let total_cols: usize = col_widths.iter().sum();
        let mut out = Self::zeros(total_rows, total_cols);
        let mut r0 = 0;
        for (bi, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for b in row.iter() {
                for i in 0..b.rows {
                    for j in 0..b.cols {
                        out[(r0 + i, c0 + j)] = b[(i, j)];
                    }
                }
                c0 += b.cols;
            }
            r0 += row_heights[bi];
        }
        out
    }

    /// Copies the `rows x cols` block whose top-left corner sits at
    /// (row0, col0). Panics if the block exceeds the matrix bounds.
    pub fn submatrix(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols, "submatrix out of bounds");
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(row0 + i, col0 + j)];
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Symmetric part (M + Mᵀ)/2. Panics on non-square input.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square(), "symmetrized needs a square matrix");
        let mut s = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// Entrywise scaling by a scalar.
    pub fn scale(&self, c: f64) -> Matrix {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|x| x * c).collect())
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Quadratic form vᵀ M v. Panics unless M is square and sizes match.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mv = self.mul_vec(v);
        v.iter().zip(mv.iter()).map(|(a, b)| a * b).sum()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        Matrix::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        )
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        Matrix::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        )
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch in mul");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>13.6e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_times_anything_is_identity_on_it() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i = Matrix::identity(2);
        assert_eq!(&i * &m, m);
        assert_eq!(&m * &i, m);
    }

    #[test]
    fn transpose_swaps_indices() {
        let m = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let t = m.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.cols(), 2);
        assert_eq!(t[(2, 1)], 6.0);
        assert_eq!(m, t.transpose());
    }

    #[test]
    fn block_assembly_places_blocks_in_grid_order() {
        let a = Matrix::identity(2);
        let b = Matrix::zeros(2, 1);
        let c = Matrix::zeros(1, 2);
        let d = Matrix::from_rows(&[&[7.0]]);
        let m = Matrix::from_blocks(&[&[&a, &b], &[&c, &d]]);
        assert_eq!(m.rows(), 3);
        assert_eq!(m.cols(), 3);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(2, 2)], 7.0);
        assert_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn submatrix_extracts_the_requested_block() {
        let m = Matrix::from_rows(&[
            &[1.0, 2.0, 3.0],
            &[4.0, 5.0, 6.0],
            &[7.0, 8.0, 9.0],
        ]);
        let b = m.submatrix(1, 1, 2, 2);
        assert_eq!(b, Matrix::from_rows(&[&[5.0, 6.0], &[8.0, 9.0]]));
        assert_eq!(m.submatrix(0, 0, 3, 3), m);
    }

    #[test]
    fn symmetrized_averages_off_diagonal_pairs() {
        let m = Matrix::from_rows(&[&[1.0, 4.0], &[0.0, 2.0]]);
        let s = m.symmetrized();
        assert_eq!(s[(0, 1)], 2.0);
        assert_eq!(s[(1, 0)], 2.0);
        assert_eq!(s[(0, 0)], 1.0);
    }

    #[test]
    fn quad_form_matches_hand_expansion() {
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let v = [1.0, -2.0];
        // 2*1 + 2*1*(-2)*1 + 3*4 = 2 - 4 + 12
        assert_eq!(m.quad_form(&v), 10.0);
    }

    #[test]
    #[should_panic(expected = "entry count")]
    fn wrong_entry_count_panics() {
        Matrix::new(2, 2, vec![1.0, 2.0, 3.0]);
    }
}
