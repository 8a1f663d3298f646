//! Compressed-sparse-row adjacency matrices and the graph propagation kernels.
//!
//! Every [`SparseMatrix`] is kept in canonical form: within a row the column
//! indices are strictly increasing, so there are no duplicate entries and the
//! diagonal of a row can be found by binary search.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Rows at or above this many output cells are computed on the rayon pool.
/// Each output row is produced by a single thread in a fixed order, so the
/// result is bitwise identical to the serial path.
const PARALLEL_CELLS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking every storage invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("malformed CSR: {msg}")));
        if row_offsets.len() != n_rows + 1 {
            return bad(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            ));
        }
        if row_offsets[0] != 0 || row_offsets[n_rows] != values.len() {
            return bad("row_offsets must start at 0 and end at nnz".into());
        }
        if col_indices.len() != values.len() {
            return bad("col_indices and values differ in length".into());
        }
        for r in 0..n_rows {
            let (start, end) = (row_offsets[r], row_offsets[r + 1]);
            if start > end {
                return bad(format!("row_offsets decreases at row {r}"));
            }
            let cols = &col_indices[start..end];
            if cols.iter().any(|&c| c >= n_cols) {
                return bad(format!("column index out of range in row {r}"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("columns of row {r} are not strictly increasing"));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value".into());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
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

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values stored in row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Number of stored entries in row `i`.
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Main diagonal, looked up by binary search in each row.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
            })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.set(i, j, v);
            }
        }
        out
    }
}

/// Builds the symmetric, binary, zero-diagonal adjacency of an undirected graph.
///
/// Duplicate pairs and reverse directions are coalesced and self-pairs are
/// dropped, so the self-loop added by [`normalize_adjacency`] appears once.
pub fn build_adjacency(edges: &[(usize, usize)], n: usize) -> Result<SparseMatrix> {
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::NodeOutOfRange(a, b, n));
        }
        if a == b {
            continue;
        }
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    row_offsets.push(0);
    for row in &mut neighbors {
        row.sort_unstable();
        row.dedup();
        col_indices.extend_from_slice(row);
        row_offsets.push(col_indices.len());
    }
    let values = vec![1.0; col_indices.len()];
    Ok(SparseMatrix {
        n_rows: n,
        n_cols: n,
        row_offsets,
        col_indices,
        values,
    })
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` together with its cached diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: SparseMatrix,
    diagonal: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows
    }
}

/// Adds self-loops and applies symmetric degree normalization.
///
/// Entry `(i, j)` is `a_ij / sqrt(d_i · d_j)`; the product under the root is
/// commutative, so the result is symmetric bit for bit.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<NormalizedAdjacency> {
    if a.n_rows != a.n_cols {
        return Err(Error::dims(
            "normalize_adjacency",
            "square matrix",
            format!("{}x{}", a.n_rows, a.n_cols),
        ));
    }
    let n = a.n_rows;
    let degree: Vec<f64> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            1.0 + cols
                .iter()
                .zip(vals)
                .filter(|(&j, _)| j != i)
                .map(|(_, v)| v)
                .sum::<f64>()
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    let mut diagonal = vec![0.0; n];
    row_offsets.push(0);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let mut self_done = false;
        let push = |j: usize, v: f64, col_indices: &mut Vec<usize>, values: &mut Vec<f64>| {
            let w = v / (degree[i] * degree[j]).sqrt();
            col_indices.push(j);
            values.push(w);
            w
        };
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                continue;
            }
            if j > i && !self_done {
                diagonal[i] = push(i, 1.0, &mut col_indices, &mut values);
                self_done = true;
            }
            push(j, v, &mut col_indices, &mut values);
        }
        if !self_done {
            diagonal[i] = push(i, 1.0, &mut col_indices, &mut values);
        }
        row_offsets.push(col_indices.len());
    }
    Ok(NormalizedAdjacency {
        matrix: SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
        },
        diagonal,
    })
}

/// Sorted, distinct feature columns that hold label information.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelColumnMask {
    label_cols: Vec<usize>,
}

impl LabelColumnMask {
    pub fn new(mut cols: Vec<usize>) -> Result<Self> {
        cols.sort_unstable();
        if cols.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "label column mask contains duplicates".into(),
            ));
        }
        Ok(Self { label_cols: cols })
    }

    /// The degenerate mask under which masked propagation is plain propagation.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The `k` trailing columns of an `n_cols`-wide feature matrix.
    pub fn trailing(n_cols: usize, k: usize) -> Self {
        Self {
            label_cols: (n_cols - k..n_cols).collect(),
        }
    }

    pub fn columns(&self) -> &[usize] {
        &self.label_cols
    }

    pub fn len(&self) -> usize {
        self.label_cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label_cols.is_empty()
    }

    fn indicator(&self, n_cols: usize) -> Result<Vec<bool>> {
        let mut is_label = vec![false; n_cols];
        for &c in &self.label_cols {
            if c >= n_cols {
                return Err(Error::dims(
                    "label column mask",
                    format!("columns < {n_cols}"),
                    c,
                ));
            }
            is_label[c] = true;
        }
        Ok(is_label)
    }
}

fn for_each_output_row(
    out: &mut DenseMatrix,
    f: impl Fn(usize, &mut [f64]) + Sync + Send,
) {
    let width = out.n_cols();
    if width == 0 {
        return;
    }
    if out.n_rows() * width >= PARALLEL_CELLS {
        out.data_mut()
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    } else {
        out.data_mut()
            .chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Exact sparse-dense product `M · X`.
pub fn spmm(m: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if m.n_cols != x.n_rows() {
        return Err(Error::dims(
            "spmm",
            format!("{} rows in X", m.n_cols),
            x.n_rows(),
        ));
    }
    let mut out = DenseMatrix::zeros(m.n_rows, x.n_cols());
    for_each_output_row(&mut out, |i, out_row| {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            for (o, &xv) in out_row.iter_mut().zip(x.row(j)) {
                *o += v * xv;
            }
        }
    });
    Ok(out)
}

fn check_square_input(op: &'static str, ahat: &NormalizedAdjacency, x: &DenseMatrix) -> Result<()> {
    if ahat.n() != x.n_rows() {
        return Err(Error::dims(op, format!("{} rows", ahat.n()), x.n_rows()));
    }
    Ok(())
}

/// `ÂX − diag(Â) X Σ_j e_j e_jᵀ`: the ordinary propagation, except that label
/// columns never receive a node's own value.
///
/// Non-label columns follow exactly the same summation order as [`spmm`]. For
/// label columns the diagonal entry is skipped rather than subtracted, so a
/// node's own label contributes exactly zero.
pub fn propagate_masked(
    ahat: &NormalizedAdjacency,
    x: &DenseMatrix,
    mask: &LabelColumnMask,
) -> Result<DenseMatrix> {
    check_square_input("propagate_masked", ahat, x)?;
    let is_label = mask.indicator(x.n_cols())?;
    let m = &ahat.matrix;
    let mut out = DenseMatrix::zeros(m.n_rows, x.n_cols());
    for_each_output_row(&mut out, |i, out_row| {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let x_row = x.row(j);
            if j == i {
                for ((o, &xv), &lab) in out_row.iter_mut().zip(x_row).zip(&is_label) {
                    if !lab {
                        *o += v * xv;
                    }
                }
            } else {
                for (o, &xv) in out_row.iter_mut().zip(x_row) {
                    *o += v * xv;
                }
            }
        }
    });
    Ok(out)
}

/// Adjoint of [`propagate_masked`] with respect to `X`: maps an upstream
/// gradient `G` to `(Â − diag(Â)·J)ᵀ G`, computed as a transpose (scatter)
/// product rather than by reusing the forward kernel.
pub fn propagate_masked_adjoint(
    ahat: &NormalizedAdjacency,
    g: &DenseMatrix,
    mask: &LabelColumnMask,
) -> Result<DenseMatrix> {
    check_square_input("propagate_masked_adjoint", ahat, g)?;
    let is_label = mask.indicator(g.n_cols())?;
    let m = &ahat.matrix;
    let mut out = DenseMatrix::zeros(m.n_cols, g.n_cols());
    for i in 0..m.n_rows {
        let (cols, vals) = m.row(i);
        let g_row = g.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let out_row = out.row_mut(j);
            if j == i {
                for ((o, &gv), &lab) in out_row.iter_mut().zip(g_row).zip(&is_label) {
                    if !lab {
                        *o += v * gv;
                    }
                }
            } else {
                for (o, &gv) in out_row.iter_mut().zip(g_row) {
                    *o += v * gv;
                }
            }
        }
    }
    Ok(out)
}
