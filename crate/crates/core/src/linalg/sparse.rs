use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-sparse-column matrix with sorted row indices and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    n_rows: usize,
    n_cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CscMatrix {
    /// Builds a matrix from coordinate entries; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_cols + 1];
        for &(i, j, _) in triplets {
            if i >= n_rows {
                return Err(Error::dim("triplet row index", n_rows, i));
            }
            if j >= n_cols {
                return Err(Error::dim("triplet column index", n_cols, j));
            }
            counts[j + 1] += 1;
        }
        for j in 0..n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            rows[next[j]] = i;
            vals[next[j]] = v;
            next[j] += 1;
        }

        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..n_cols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|&(i, _)| i);
            for &(i, v) in &scratch {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(CscMatrix {
            n_rows,
            n_cols,
            col_ptr,
            row_idx,
            values,
            symmetric: false,
        })
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            n_rows: n,
            n_cols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CscMatrix {
            n_rows,
            n_cols,
            col_ptr: vec![0; n_cols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
            symmetric: n_rows == n_cols,
        }
    }

    /// Stores every entry of `dense` whose magnitude is above `drop_tol`.
    pub fn from_dense(dense: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                let v = dense[(i, j)];
                if v.abs() > drop_tol {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            n_rows: dense.nrows(),
            n_cols: dense.ncols(),
            col_ptr,
            row_idx,
            values,
            symmetric: false,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Whether the matrix carries the symmetric flag.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Column `j` as parallel slices of row indices and values.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    /// Iterates stored entries as `(row, col, value)` in column order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_cols).flat_map(move |j| {
            (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |k| (self.row_idx[k], j, self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.column(j);
        match rows.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest |a_ij - a_ji| over the stored pattern.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Sets the symmetric flag after checking |a_ij - a_ji| <= 1e-12 max|a|.
    pub fn into_symmetric(mut self) -> Result<Self> {
        let tol = 1e-12 * self.max_abs();
        let asym = self.asymmetry();
        if asym > tol {
            return Err(Error::InvalidArgument(format!(
                "matrix flagged symmetric has asymmetry {asym:e} > {tol:e}"
            )));
        }
        self.symmetric = true;
        Ok(self)
    }

    /// Averages with the transpose and sets the symmetric flag.
    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        let mut s = CscMatrix::linear_combination(&[(0.5, self), (0.5, &t)])
            .expect("transpose has matching shape");
        s.symmetric = true;
        s
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_rows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.n_cols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                row_idx[next[i]] = j;
                values[next[i]] = self.values[k];
                next[i] += 1;
            }
        }
        CscMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            col_ptr: counts,
            row_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::dim("vector length", self.n_cols, x.len()));
        }
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_acc(1.0, x, &mut y);
        Ok(y)
    }

    /// y += c A x (no dimension checks).
    pub(crate) fn mul_vec_acc(&self, c: f64, x: &[f64], y: &mut [f64]) {
        for j in 0..self.n_cols {
            let xj = c * x[j];
            if xj == 0.0 {
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[k]] += self.values[k] * xj;
            }
        }
    }

    /// y += c A^T x (no dimension checks).
    pub(crate) fn tr_mul_vec_acc(&self, c: f64, x: &[f64], y: &mut [f64]) {
        for j in 0..self.n_cols {
            let mut s = 0.0;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += self.values[k] * x[self.row_idx[k]];
            }
            y[j] += c * s;
        }
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::dim("vector length", self.n_rows, x.len()));
        }
        let mut y = vec![0.0; self.n_cols];
        self.tr_mul_vec_acc(1.0, x, &mut y);
        Ok(y)
    }

    /// Y = A X for a dense block X.
    pub fn mul_block(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n_cols {
            return Err(Error::dim("block row count", self.n_cols, x.nrows()));
        }
        let mut y = DMatrix::zeros(self.n_rows, x.ncols());
        self.mul_block_acc(1.0, x, &mut y);
        Ok(y)
    }

    pub(crate) fn mul_block_acc(&self, c: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        for col in 0..x.ncols() {
            let xs = x.column(col);
            let mut ys = y.column_mut(col);
            self.mul_vec_acc(c, xs.as_slice(), ys.as_mut_slice());
        }
    }

    pub fn tr_mul_block(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n_rows {
            return Err(Error::dim("block row count", self.n_rows, x.nrows()));
        }
        let mut y = DMatrix::zeros(self.n_cols, x.ncols());
        self.tr_mul_block_acc(1.0, x, &mut y);
        Ok(y)
    }

    pub(crate) fn tr_mul_block_acc(&self, c: f64, x: &DMatrix<f64>, y: &mut DMatrix<f64>) {
        for col in 0..x.ncols() {
            let xs = x.column(col);
            let mut ys = y.column_mut(col);
            self.tr_mul_vec_acc(c, xs.as_slice(), ys.as_mut_slice());
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CscMatrix) -> Result<CscMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::dim("inner dimension", self.n_cols, other.n_rows));
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0; self.n_rows];
        let mut mark = vec![usize::MAX; self.n_rows];
        let mut touched = Vec::new();
        for j in 0..other.n_cols {
            touched.clear();
            let (brows, bvals) = other.column(j);
            for (&k, &bkj) in brows.iter().zip(bvals) {
                let (arows, avals) = self.column(k);
                for (&i, &aik) in arows.iter().zip(avals) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        touched.push(i);
                    }
                    acc[i] += aik * bkj;
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(CscMatrix {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            col_ptr,
            row_idx,
            values,
            symmetric: false,
        })
    }

    /// `self^T * other` without materializing the transpose of `self` twice.
    pub fn tr_matmul(&self, other: &CscMatrix) -> Result<CscMatrix> {
        self.transpose().matmul(other)
    }

    /// Σ c_k M_k over matrices of equal shape; the pattern is the union of the patterns.
    pub fn linear_combination(terms: &[(f64, &CscMatrix)]) -> Result<CscMatrix> {
        let plan = SumPattern::new(terms.iter().map(|(_, m)| *m))?;
        let coeffs: Vec<f64> = terms.iter().map(|(c, _)| *c).collect();
        Ok(plan.combine(&coeffs))
    }

    /// Keeps the rows and columns listed in `keep` (in that order).
    pub fn select(&self, keep: &[usize]) -> Result<CscMatrix> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.n_rows,
                cols: self.n_cols,
            });
        }
        let mut map = vec![usize::MAX; self.n_rows];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n_rows {
                return Err(Error::dim("selected index", self.n_rows, old));
            }
            map[old] = new;
        }
        let mut trip = Vec::new();
        for &old_j in keep {
            let (rows, vals) = self.column(old_j);
            for (&i, &v) in rows.iter().zip(vals) {
                if map[i] != usize::MAX {
                    trip.push((map[i], map[old_j], v));
                }
            }
        }
        let mut m = CscMatrix::from_triplets(keep.len(), keep.len(), &trip)?;
        m.symmetric = self.symmetric;
        Ok(m)
    }

    /// Symmetric permutation P A P^T where `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<CscMatrix> {
        self.select(perm)
    }

    pub(crate) fn set_symmetric_unchecked(&mut self, flag: bool) {
        self.symmetric = flag;
    }
}

/// Union sparsity pattern of several equally shaped matrices, with per-term
/// scatter maps so that repeated numeric linear combinations avoid re-merging.
#[derive(Debug, Clone)]
pub struct SumPattern {
    pattern: CscMatrix,
    maps: Vec<Vec<usize>>,
    term_values: Vec<Vec<f64>>,
    all_symmetric: bool,
}

impl SumPattern {
    pub fn new<'a>(terms: impl IntoIterator<Item = &'a CscMatrix>) -> Result<Self> {
        let terms: Vec<&CscMatrix> = terms.into_iter().collect();
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument("empty linear combination".into()));
        };
        let (nr, nc) = (first.n_rows, first.n_cols);
        for t in &terms {
            if t.n_rows != nr || t.n_cols != nc {
                return Err(Error::dim("term shape", nr * nc, t.n_rows * t.n_cols));
            }
        }
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut rows: Vec<usize> = Vec::new();
        for j in 0..nc {
            rows.clear();
            for t in &terms {
                rows.extend_from_slice(t.column(j).0);
            }
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend_from_slice(&rows);
            col_ptr.push(row_idx.len());
        }
        let pattern = CscMatrix {
            n_rows: nr,
            n_cols: nc,
            values: vec![0.0; row_idx.len()],
            col_ptr,
            row_idx,
            symmetric: false,
        };
        let maps = terms
            .iter()
            .map(|t| {
                let mut map = Vec::with_capacity(t.nnz());
                for j in 0..nc {
                    let start = pattern.col_ptr[j];
                    let prow = &pattern.row_idx[start..pattern.col_ptr[j + 1]];
                    for &i in t.column(j).0 {
                        let pos = prow.binary_search(&i).expect("row in union pattern");
                        map.push(start + pos);
                    }
                }
                map
            })
            .collect();
        Ok(SumPattern {
            pattern,
            maps,
            term_values: terms.iter().map(|t| t.values.clone()).collect(),
            all_symmetric: terms.iter().all(|t| t.symmetric),
        })
    }

    pub fn n_terms(&self) -> usize {
        self.maps.len()
    }

    pub fn pattern(&self) -> &CscMatrix {
        &self.pattern
    }

    /// Σ coeffs[k] · term_k on the union pattern.
    pub fn combine(&self, coeffs: &[f64]) -> CscMatrix {
        let mut out = self.pattern.clone();
        for ((c, map), vals) in coeffs.iter().zip(&self.maps).zip(&self.term_values) {
            if *c == 0.0 {
                continue;
            }
            for (&dst, &v) in map.iter().zip(vals) {
                out.values[dst] += c * v;
            }
        }
        out.symmetric = self.all_symmetric;
        out
    }
}
