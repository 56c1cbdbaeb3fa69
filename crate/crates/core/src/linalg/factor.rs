//! Direct factorizations: envelope Cholesky and band LU with partial
//! pivoting, both applied after a reverse Cuthill–McKee reordering.

use nalgebra::DMatrix;

use super::ordering::Ordering;
use super::sparse::CscMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Cholesky,
    Lu,
}

/// Lower envelope storage: row `i` holds `L[i, first[i]..=i]`.
#[derive(Debug, Clone)]
struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Envelope {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.start[i]..self.start[i + 1]]
    }
}

/// Row-windowed band storage. Row `i` covers columns `i-kl ..= i+kl+ku`.
#[derive(Debug, Clone)]
struct Band {
    kl: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl Band {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Chol(Envelope),
    Lu(Band),
}

/// A factorized square matrix. Immutable after construction; solves take `&self`.
#[derive(Debug, Clone)]
pub struct Factorization {
    kind: FactorKind,
    n: usize,
    ordering: Ordering,
    inner: Inner,
}

/// Factorizes `m` with an RCM ordering computed from its pattern.
pub fn factorize(m: &CscMatrix, kind: FactorKind) -> Result<Factorization> {
    check_input(m, kind)?;
    let ordering = Ordering::rcm(m);
    factorize_with_ordering(m, kind, ordering)
}

/// Factorizes `m` under a caller-supplied ordering, e.g. one reused across
/// matrices sharing a sparsity pattern.
pub fn factorize_with_ordering(
    m: &CscMatrix,
    kind: FactorKind,
    ordering: Ordering,
) -> Result<Factorization> {
    check_input(m, kind)?;
    if ordering.len() != m.n_rows() {
        return Err(Error::dim("ordering length", m.n_rows(), ordering.len()));
    }
    let inner = match kind {
        FactorKind::Cholesky => Inner::Chol(envelope_cholesky(m, &ordering)?),
        FactorKind::Lu => Inner::Lu(band_lu(m, &ordering)?),
    };
    Ok(Factorization {
        kind,
        n: m.n_rows(),
        ordering,
        inner,
    })
}

fn check_input(m: &CscMatrix, kind: FactorKind) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.n_rows(),
            cols: m.n_cols(),
        });
    }
    if kind == FactorKind::Cholesky && !m.is_symmetric() {
        return Err(Error::InvalidArgument(
            "cholesky requires a matrix flagged symmetric".into(),
        ));
    }
    for j in 0..m.n_cols() {
        let (_, vals) = m.column(j);
        if vals.iter().all(|&v| v == 0.0) {
            return Err(Error::StructurallySingular(j));
        }
    }
    Ok(())
}

fn envelope_cholesky(m: &CscMatrix, ord: &Ordering) -> Result<Envelope> {
    let n = m.n_rows();
    let inv = ord.inverse();
    let mut first: Vec<usize> = (0..n).collect();
    for (oi, oj, _) in m.iter() {
        let (i, j) = (inv[oi], inv[oj]);
        if j < i {
            first[i] = first[i].min(j);
        }
    }
    let mut start = Vec::with_capacity(n + 1);
    start.push(0);
    for i in 0..n {
        start.push(start[i] + i - first[i] + 1);
    }
    let mut data = vec![0.0; start[n]];
    for (oi, oj, v) in m.iter() {
        let (i, j) = (inv[oi], inv[oj]);
        if j <= i {
            data[start[i] + j - first[i]] = v;
        }
    }

    for i in 0..n {
        let fi = first[i];
        let (before, rest) = data.split_at_mut(start[i]);
        let row_i = &mut rest[..i - fi + 1];
        for j in fi..i {
            let fj = first[j];
            let lo = fi.max(fj);
            let row_j = &before[start[j]..start[j + 1]];
            let dot = dot(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj]);
            let ljj = row_j[j - fj];
            row_i[j - fi] = (row_i[j - fi] - dot) / ljj;
        }
        let off = &row_i[..i - fi];
        let d = row_i[i - fi] - dot(off, off);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                column: ord.perm()[i],
                value: d,
            });
        }
        row_i[i - fi] = d.sqrt();
    }
    Ok(Envelope { first, start, data })
}

fn band_lu(m: &CscMatrix, ord: &Ordering) -> Result<Band> {
    let n = m.n_rows();
    let inv = ord.inverse();
    let (mut kl, mut ku) = (0usize, 0usize);
    for (oi, oj, _) in m.iter() {
        let (i, j) = (inv[oi], inv[oj]);
        if i > j {
            kl = kl.max(i - j);
        } else {
            ku = ku.max(j - i);
        }
    }
    let width = 2 * kl + ku + 1;
    let mut b = Band {
        kl,
        width,
        data: vec![0.0; n * width],
        piv: vec![0; n],
    };
    for (oi, oj, v) in m.iter() {
        let (i, j) = (inv[oi], inv[oj]);
        let k = b.idx(i, j);
        b.data[k] = v;
    }
    // Fill-from-pivoting reaches at most kl + ku above the diagonal.
    let reach = kl + ku;
    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let mut p = k;
        let mut best = b.data[b.idx(k, k)].abs();
        for r in k + 1..=last_row {
            let v = b.data[b.idx(r, k)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Singular(ord.perm()[k]));
        }
        b.piv[k] = p;
        let last_col = (k + reach).min(n - 1);
        if p != k {
            for j in k..=last_col {
                let (a, c) = (b.idx(k, j), b.idx(p, j));
                b.data.swap(a, c);
            }
        }
        let pivot = b.data[b.idx(k, k)];
        for r in k + 1..=last_row {
            let ir = b.idx(r, k);
            if b.data[ir] == 0.0 {
                continue;
            }
            let l = b.data[ir] / pivot;
            b.data[ir] = l;
            let rk = b.idx(k, k + 1);
            let rr = b.idx(r, k + 1);
            let len = last_col - k;
            for t in 0..len {
                b.data[rr + t] -= l * b.data[rk + t];
            }
        }
    }
    Ok(b)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ordering(&self) -> &Ordering {
        &self.ordering
    }

    /// Number of stored factor entries.
    pub fn factor_len(&self) -> usize {
        match &self.inner {
            Inner::Chol(e) => e.data.len(),
            Inner::Lu(b) => b.data.len(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim("right-hand side length", self.n, b.len()));
        }
        let mut work = vec![0.0; self.n];
        let mut out = vec![0.0; self.n];
        self.solve_into(b, &mut work, &mut out);
        Ok(out)
    }

    /// Solves for every column of `rhs` with the same factors.
    pub fn solve_block(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.n {
            return Err(Error::dim("right-hand side rows", self.n, rhs.nrows()));
        }
        let mut out = DMatrix::zeros(self.n, rhs.ncols());
        let mut work = vec![0.0; self.n];
        for c in 0..rhs.ncols() {
            let src = rhs.column(c);
            let mut dst = out.column_mut(c);
            self.solve_into(
                src.as_slice(),
                &mut work,
                dst.as_mut_slice(),
            );
        }
        Ok(out)
    }

    /// x = P L z for a Cholesky factorization P A Pᵀ = L Lᵀ, so that
    /// x has covariance A when z is standard normal.
    pub fn mul_lower(&self, z: &[f64]) -> Result<Vec<f64>> {
        let Inner::Chol(e) = &self.inner else {
            return Err(Error::InvalidArgument("mul_lower needs a Cholesky factorization".into()));
        };
        if z.len() != self.n {
            return Err(Error::dim("vector length", self.n, z.len()));
        }
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let fi = e.first[i];
            out[self.ordering.perm()[i]] = dot(e.row(i), &z[fi..=i]);
        }
        Ok(out)
    }

    fn solve_into(&self, b: &[f64], work: &mut [f64], out: &mut [f64]) {
        let perm = self.ordering.perm();
        for (w, &old) in work.iter_mut().zip(perm) {
            *w = b[old];
        }
        match &self.inner {
            Inner::Chol(e) => chol_solve(e, work),
            Inner::Lu(band) => lu_solve(band, work),
        }
        for (&w, &old) in work.iter().zip(perm) {
            out[old] = w;
        }
    }
}

fn chol_solve(e: &Envelope, x: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let row = e.row(i);
        let fi = e.first[i];
        let s = dot(&row[..i - fi], &x[fi..i]);
        x[i] = (x[i] - s) / row[i - fi];
    }
    for i in (0..n).rev() {
        let row = e.row(i);
        let fi = e.first[i];
        x[i] /= row[i - fi];
        let xi = x[i];
        for (xj, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
            *xj -= l * xi;
        }
    }
}

fn lu_solve(b: &Band, x: &mut [f64]) {
    let n = x.len();
    for k in 0..n {
        let p = b.piv[k];
        if p != k {
            x.swap(k, p);
        }
        let xk = x[k];
        if xk != 0.0 {
            for r in k + 1..=(k + b.kl).min(n.saturating_sub(1)) {
                x[r] -= b.data[b.idx(r, k)] * xk;
            }
        }
    }
    let reach = b.width - b.kl - 1;
    for i in (0..n).rev() {
        let last = (i + reach).min(n - 1);
        let base = b.idx(i, i);
        let mut s = x[i];
        for (t, xj) in x[i + 1..=last].iter().enumerate() {
            s -= b.data[base + 1 + t] * xj;
        }
        x[i] = s / b.data[base];
    }
}
