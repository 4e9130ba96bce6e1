//! Dense row-major matrices and seeded, stream-addressable randomness.
//!
//! Everything downstream leans on two guarantees made here: a [`Matrix`] is
//! finite and rectangular from the moment it exists, and an [`RngStream`]
//! replays bit-identically for the same `(seed, stream)` pair while distinct
//! streams are statistically independent.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Row-major dense matrix of `f64`, non-empty and all-finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(Matrix { rows, cols, data: vec![0.0; rows * cols] })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::RaggedRows { row: i, expected: cols, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                details: format!("{rows}x{cols} needs {} entries, got {}", rows * cols, data.len()),
            });
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: idx / cols, col: idx % cols, value: v });
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Caller is responsible for keeping the all-finite invariant.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(value.is_finite(), "set({row},{col}) with non-finite {value}");
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// i-k-j loop order: streams over the right-hand rows instead of its columns.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                details: format!("{}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            });
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let left = self.row(i);
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in left.iter().enumerate() {
                let right = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(right) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix { rows: self.rows, cols: rhs.cols, data: out })
    }

    /// self += column · rowᵀ, the rank-one update at the heart of feature-space
    /// attention accumulation.
    pub fn accumulate_outer(&mut self, col: &[f64], row: &[f64]) -> Result<()> {
        if col.len() != self.rows || row.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "accumulate_outer",
                details: format!(
                    "target {}x{}, column of {}, row of {}",
                    self.rows,
                    self.cols,
                    col.len(),
                    row.len()
                ),
            });
        }
        for (i, &c) in col.iter().enumerate() {
            let out_row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &r) in out_row.iter_mut().zip(row) {
                *o += c * r;
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "max_abs_diff",
                details: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn mean_abs_diff(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "mean_abs_diff",
                details: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let total: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum();
        Ok(total / self.data.len() as f64)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len(), "dot product of unequal lengths");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ChaCha8-backed stream: `(seed, stream)` fully determines every draw, and
/// different stream ids give unrelated sequences under the same seed.
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream(rng)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// ±1.0 with equal probability.
    pub fn rademacher(&mut self) -> f64 {
        if self.0.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let data = (0..rows * cols).map(|_| self.standard_normal()).collect();
        Ok(Matrix { rows, cols, data })
    }

    /// Uniform draw from the closed unit ball in dimension `d`:
    /// isotropic direction scaled by U^(1/d).
    pub fn unit_ball_row(&mut self, d: usize) -> Vec<f64> {
        assert!(d > 0, "unit ball needs a positive dimension");
        loop {
            let dir: Vec<f64> = (0..d).map(|_| self.standard_normal()).collect();
            let norm = dot(&dir, &dir).sqrt();
            if norm > 1e-12 {
                let radius = self.uniform().powf(1.0 / d as f64);
                return dir.iter().map(|x| x / norm * radius).collect();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(Matrix::from_rows(&[]), Err(Error::EmptyMatrix)));
        assert!(matches!(Matrix::from_rows(&[vec![]]), Err(Error::EmptyMatrix)));
        assert!(matches!(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]),
            Err(Error::RaggedRows { row: 1, expected: 2, got: 1 })
        ));
        assert!(matches!(
            Matrix::from_rows(&[vec![1.0, f64::NAN]]),
            Err(Error::NonFiniteValue { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            Matrix::from_vec(2, 2, vec![1.0, 2.0, f64::INFINITY, 4.0]),
            Err(Error::NonFiniteValue { row: 1, col: 0, .. })
        ));
        assert!(Matrix::zeros(0, 3).is_err());
    }

    #[test]
    fn matmul_matches_hand_computation() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0, 7.0], vec![8.0, 9.0, 10.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        let want = Matrix::from_rows(&[vec![21.0, 24.0, 27.0], vec![47.0, 54.0, 61.0]]).unwrap();
        assert_eq!(c, want);
        assert!(c.matmul(&a).is_err(), "inner dimensions 3 and 2 must not multiply");
    }

    #[test]
    fn accumulate_outer_agrees_with_matmul() {
        let col = vec![1.0, -2.0, 0.5];
        let row = vec![3.0, 4.0];
        let mut acc = Matrix::zeros(3, 2).unwrap();
        acc.accumulate_outer(&col, &row).unwrap();
        acc.accumulate_outer(&col, &row).unwrap();
        let col_m = Matrix::from_rows(&[vec![1.0], vec![-2.0], vec![0.5]]).unwrap();
        let row_m = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let want = col_m.matmul(&row_m).unwrap().scale(2.0);
        assert_eq!(acc.max_abs_diff(&want).unwrap(), 0.0);
    }

    #[test]
    fn frobenius_norm_of_three_four_five() {
        let m = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.frobenius_norm(), 5.0);
    }

    #[test]
    fn rng_streams_replay_and_separate() {
        let a: Vec<f64> = {
            let mut r = RngStream::new(7, 3);
            (0..32).map(|_| r.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(7, 3);
            (0..32).map(|_| r.uniform()).collect()
        };
        let c: Vec<f64> = {
            let mut r = RngStream::new(7, 4);
            (0..32).map(|_| r.uniform()).collect()
        };
        assert_eq!(a, b, "same (seed, stream) must replay bit-identically");
        assert_ne!(a, c, "different streams must diverge");
    }

    #[test]
    fn rademacher_is_exactly_plus_minus_one() {
        let mut r = RngStream::new(1, 0);
        let draws: Vec<f64> = (0..1000).map(|_| r.rademacher()).collect();
        assert!(draws.iter().all(|&v| v == 1.0 || v == -1.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.12, "sign mean {mean} too far from zero");
    }

    #[test]
    fn unit_ball_rows_stay_inside() {
        let mut r = RngStream::new(11, 0);
        for d in [1, 2, 10] {
            for _ in 0..200 {
                let x = r.unit_ball_row(d);
                assert_eq!(x.len(), d);
                assert!(dot(&x, &x).sqrt() <= 1.0 + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn transpose_is_an_involution(rows in 1usize..6, cols in 1usize..6, seed in 0u64..1000) {
            let mut r = RngStream::new(seed, 0);
            let m = r.gaussian_matrix(rows, cols).unwrap();
            prop_assert_eq!(m.transpose().transpose(), m);
        }

        #[test]
        fn matmul_distributes_over_scaling(seed in 0u64..1000, s in -3.0f64..3.0) {
            let mut r = RngStream::new(seed, 1);
            let a = r.gaussian_matrix(3, 4).unwrap();
            let b = r.gaussian_matrix(4, 2).unwrap();
            let left = a.scale(s).matmul(&b).unwrap();
            let right = a.matmul(&b).unwrap().scale(s);
            prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
        }

        #[test]
        fn dot_matches_one_by_one_matmul(x in proptest::collection::vec(-10.0f64..10.0, 1..8)) {
            let y: Vec<f64> = x.iter().map(|v| v * 0.5 - 1.0).collect();
            let a = Matrix::from_rows(&[x.clone()]).unwrap();
            let b = Matrix::from_rows(&[y.clone()]).unwrap().transpose();
            let prod = a.matmul(&b).unwrap();
            prop_assert!((prod.get(0, 0) - dot(&x, &y)).abs() < 1e-12);
        }
    }
}
