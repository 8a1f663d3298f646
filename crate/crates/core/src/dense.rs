//! Row-major dense matrices and the handful of products the network needs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row block used by the parallel products. Block boundaries depend only on
/// the matrix shape, never on the thread count, so results are bitwise
/// reproducible however many threads run them.
const ROW_BLOCK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::dims(
                "DenseMatrix::from_vec",
                format!("{} values", n_rows * n_cols),
                data.len(),
            ));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::dims(
                    "DenseMatrix::from_rows",
                    format!("{n_cols} columns"),
                    format!("{} in row {i}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let width = self.n_cols.max(1);
        self.data
            .chunks_exact(width)
            .take(if self.n_cols == 0 { 0 } else { self.n_rows })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != other.n_rows {
            return Err(Error::dims("hstack", self.n_rows, other.n_rows));
        }
        let n_cols = self.n_cols + other.n_cols;
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for i in 0..self.n_rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols,
            data,
        })
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::dims(
                "matmul",
                format!("rhs with {} rows", self.n_cols),
                rhs.n_rows,
            ));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, rhs.n_cols);
        if rhs.n_cols == 0 {
            return Ok(out);
        }
        let width = rhs.n_cols;
        out.data
            .par_chunks_mut(ROW_BLOCK * width)
            .enumerate()
            .for_each(|(b, block)| {
                for (r, out_row) in block.chunks_mut(width).enumerate() {
                    let i = b * ROW_BLOCK + r;
                    for (k, &a) in self.row(i).iter().enumerate() {
                        // bag-of-words inputs are mostly zeros
                        if a == 0.0 {
                            continue;
                        }
                        for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                            *o += a * b;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · rhs`, without materializing the transpose. Partial products
    /// are formed per row block and summed in block order.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != rhs.n_rows {
            return Err(Error::dims(
                "t_matmul",
                format!("rhs with {} rows", self.n_rows),
                rhs.n_rows,
            ));
        }
        let (m, w) = (self.n_cols, rhs.n_cols);
        let n_blocks = self.n_rows.div_ceil(ROW_BLOCK);
        let partials: Vec<Vec<f64>> = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![0.0; m * w];
                for k in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(self.n_rows) {
                    let rhs_row = rhs.row(k);
                    for (i, &a) in self.row(k).iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        for (o, &v) in acc[i * w..(i + 1) * w].iter_mut().zip(rhs_row) {
                            *o += a * v;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = DenseMatrix::zeros(m, w);
        for p in partials {
            for (o, v) in out.data.iter_mut().zip(p) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ`.
    pub fn matmul_t(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != rhs.n_cols {
            return Err(Error::dims(
                "matmul_t",
                format!("rhs with {} columns", self.n_cols),
                rhs.n_cols,
            ));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, rhs.n_rows);
        if rhs.n_rows == 0 {
            return Ok(out);
        }
        let width = rhs.n_rows;
        out.data
            .par_chunks_mut(ROW_BLOCK * width)
            .enumerate()
            .for_each(|(b, block)| {
                for (r, out_row) in block.chunks_mut(width).enumerate() {
                    let a = self.row(b * ROW_BLOCK + r);
                    for (j, o) in out_row.iter_mut().enumerate() {
                        *o = a.iter().zip(rhs.row(j)).map(|(x, y)| x * y).sum();
                    }
                }
            });
        Ok(out)
    }

    /// Largest absolute entry; 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_hand_values() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(
            a.matmul(&b).unwrap(),
            DenseMatrix::from_rows(&[[2.0, 1.0], [4.0, 3.0]]).unwrap()
        );
        // aᵀb
        assert_eq!(
            a.t_matmul(&b).unwrap(),
            DenseMatrix::from_rows(&[[3.0, 1.0], [4.0, 2.0]]).unwrap()
        );
        // abᵀ
        assert_eq!(
            a.matmul_t(&b).unwrap(),
            DenseMatrix::from_rows(&[[2.0, 1.0], [4.0, 3.0]]).unwrap()
        );
    }

    #[test]
    fn shape_errors() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&DenseMatrix::zeros(2, 3)).is_err());
        assert!(a.t_matmul(&DenseMatrix::zeros(3, 1)).is_err());
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn hstack_and_select() {
        let a = DenseMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[4.0, 5.0], [6.0, 7.0], [8.0, 9.0]]).unwrap();
        let c = a.hstack(&b).unwrap();
        assert_eq!(c.row(1), &[2.0, 6.0, 7.0]);
        assert_eq!(c.select_rows(&[2, 0]).data(), &[3.0, 8.0, 9.0, 1.0, 4.0, 5.0]);
        assert_eq!(DenseMatrix::zeros(3, 0).rows().count(), 0);
    }

    #[test]
    fn blocked_products_match_naive_and_thread_count() {
        let a = DenseMatrix::from_fn(1300, 7, |i, j| ((i * 31 + j * 17) % 13) as f64 * 0.1 - 0.6);
        let b = DenseMatrix::from_fn(1300, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 * 0.05 - 0.2);
        let naive = DenseMatrix::from_fn(7, 5, |i, j| {
            let mut blocks = vec![0.0; 1300_usize.div_ceil(ROW_BLOCK)];
            for k in 0..1300 {
                blocks[k / ROW_BLOCK] += a.get(k, i) * b.get(k, j);
            }
            blocks.iter().sum()
        });
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = one.install(|| a.t_matmul(&b).unwrap());
        let r4 = four.install(|| a.t_matmul(&b).unwrap());
        assert_eq!(r1, r4);
        for (x, y) in r1.data().iter().zip(naive.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let w = DenseMatrix::from_fn(7, 3, |i, j| (i + j) as f64);
        assert_eq!(one.install(|| a.matmul(&w).unwrap()), four.install(|| a.matmul(&w).unwrap()));
    }
}
