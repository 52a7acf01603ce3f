//! Small dense square matrices, stored row-major.
//!
//! State counts in this engine are tiny (a few dozen states), so a flat
//! `Vec<f64>` with explicit loops beats pulling in a linear-algebra crate:
//! row slices come out contiguous, which is exactly the access pattern the
//! probability recursions need.

use std::fmt;

/// Row-major square matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// All-zero matrix of the given size.
    pub fn zeros(size: usize) -> Self {
        SquareMatrix {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Identity matrix of the given size.
    pub fn identity(size: usize) -> Self {
        let mut m = SquareMatrix::zeros(size);
        for i in 0..size {
            m.data[i * size + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row vectors. Panics if the rows do not form a
    /// square matrix; callers construct these from data they control.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for row in rows {
            assert_eq!(row.len(), size, "matrix rows must all have length {size}");
            data.extend_from_slice(row);
        }
        SquareMatrix { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.size + col] = value;
    }

    /// Contiguous view of one row.
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.size..(row + 1) * self.size]
    }

    /// Matrix product `self * rhs`. Accumulates along the shared index in
    /// fixed order so repeated products are bit-reproducible.
    pub fn multiply(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.size, rhs.size, "matrix sizes must match");
        let n = self.size;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                let src = rhs.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    dst[j] += a * src[j];
                }
            }
        }
        out
    }

    /// Sum of each row, in row order.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Largest absolute entry-wise difference to another matrix.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.size, other.size, "matrix sizes must match");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SquareMatrix({}x{})", self.size, self.size)?;
        for i in 0..self.size {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_multiplicative_unit() {
        let m = SquareMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]);
        let id = SquareMatrix::identity(2);
        assert_eq!(m.multiply(&id), m);
        assert_eq!(id.multiply(&m), m);
    }

    #[test]
    fn hand_checked_product() {
        let m = SquareMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]);
        let sq = m.multiply(&m);
        assert!((sq.get(0, 0) - 0.83).abs() < 1e-12);
        assert!((sq.get(0, 1) - 0.17).abs() < 1e-12);
        assert!((sq.get(1, 0) - 0.34).abs() < 1e-12);
        assert!((sq.get(1, 1) - 0.66).abs() < 1e-12);
    }

    #[test]
    fn rows_are_contiguous() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.row(0), &[1.0, 2.0]);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.row_sums(), vec![3.0, 7.0]);
    }

    #[test]
    fn zeros_and_set() {
        let mut m = SquareMatrix::zeros(3);
        m.set(1, 2, 5.0);
        assert_eq!(m.get(1, 2), 5.0);
        assert_eq!(m.get(2, 1), 0.0);
        assert_eq!(m.max_abs_diff(&SquareMatrix::zeros(3)), 5.0);
    }
}
