//! Per-μ direct solves used as ground truth on desk-scale problems.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{factorize_with_ordering, AffineOperator, AffineRhs, FactorKind, Factorization, GramPair, Ordering};
use crate::pgd::{CanonicalTensor, RankOne};

/// Factorizes A(μ) (or A(μ)ᵀ) at grid points, reusing one fill-reducing ordering.
pub struct DirectSolver<'a> {
    op: &'a AffineOperator,
    ordering: Ordering,
    kind: FactorKind,
}

impl<'a> DirectSolver<'a> {
    pub fn new(op: &'a AffineOperator) -> Self {
        let kind = if op.is_spd() { FactorKind::Cholesky } else { FactorKind::Lu };
        DirectSolver {
            op,
            ordering: Ordering::rcm(op.pattern().pattern()),
            kind,
        }
    }

    pub fn factor(&self, idx: &[usize], transpose: bool) -> Result<Factorization> {
        let a = self.op.assemble_at(idx)?;
        let a = if transpose && !a.is_symmetric() { a.transpose() } else { a };
        factorize_with_ordering(&a, self.kind, self.ordering.clone()).map_err(|e| match e {
            Error::Singular(_) | Error::StructurallySingular(_) | Error::NotPositiveDefinite { .. } => {
                Error::SingularAt { point: idx.to_vec() }
            }
            other => other,
        })
    }

    /// u(μ) = A(μ)⁻¹ f(μ).
    pub fn solve(&self, rhs: &AffineRhs, idx: &[usize]) -> Result<Vec<f64>> {
        self.factor(idx, false)?.solve(&rhs.eval_at(idx)?)
    }

    /// Y(μ) = A(μ)⁻ᵀ Z.
    pub fn dual_solve(&self, z: &DMatrix<f64>, idx: &[usize]) -> Result<DMatrix<f64>> {
        self.factor(idx, true)?.solve_block(z)
    }
}

/// Exact dual solutions on a fully enumerated grid as a canonical tensor with
/// one indicator term per grid point.
pub fn exact_dual_tensor(op: &AffineOperator, z: &DMatrix<f64>) -> Result<CanonicalTensor> {
    let grid = op.grid();
    if grid.len().is_none_or(|l| l > 10_000) {
        return Err(Error::InvalidArgument("exact dual tensor needs a small enumerable grid".into()));
    }
    let solver = DirectSolver::new(op);
    let sizes = grid.sizes();
    let mut t = CanonicalTensor::zeros(op.n(), z.ncols(), sizes.clone());
    for idx in grid.iter() {
        let block = solver.dual_solve(z, &idx)?;
        let factors = sizes
            .iter()
            .zip(&idx)
            .map(|(&s, &k)| {
                let mut f = vec![0.0; s];
                f[k] = 1.0;
                f
            })
            .collect();
        t.push(RankOne { block, factors })?;
    }
    Ok(t)
}

/// SHA-256 over every matrix entry, coefficient table and rhs vector.
pub fn problem_hash(op: &AffineOperator, rhs: &AffineRhs) -> String {
    let mut h = Sha256::new();
    h.update((op.n() as u64).to_le_bytes());
    for t in op.terms() {
        for (i, j, v) in t.value.iter() {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
            h.update(v.to_le_bytes());
        }
        for f in &t.factors {
            for v in f.values() {
                h.update(v.to_le_bytes());
            }
        }
        h.update(b"|");
    }
    for t in rhs.terms() {
        for v in &t.value {
            h.update(v.to_le_bytes());
        }
        for f in &t.factors {
            for v in f.values() {
                h.update(v.to_le_bytes());
            }
        }
        h.update(b"|");
    }
    hex::encode(h.finalize())
}

fn points_hash(points: &[Vec<usize>]) -> String {
    let mut h = Sha256::new();
    for p in points {
        for &k in p {
            h.update((k as u64).to_le_bytes());
        }
        h.update(b";");
    }
    hex::encode(h.finalize())
}

/// Direct solutions at a set of points, optionally cached on disk under a key
/// derived from the problem and the point set.
pub struct TruthCache {
    dir: Option<PathBuf>,
}

impl TruthCache {
    pub fn in_memory() -> Self {
        TruthCache { dir: None }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        TruthCache { dir: Some(dir.into()) }
    }

    fn path(&self, op: &AffineOperator, rhs: &AffineRhs, points: &[Vec<usize>]) -> Option<PathBuf> {
        let key = format!("{}-{}", &problem_hash(op, rhs)[..16], &points_hash(points)[..16]);
        self.dir.as_ref().map(|d| d.join(format!("truth-{key}.bin")))
    }

    pub fn solutions(&self, op: &AffineOperator, rhs: &AffineRhs, points: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        let path = self.path(op, rhs, points);
        if let Some(p) = &path {
            if let Some(sols) = read_cached(p, points.len(), op.n())? {
                return Ok(sols);
            }
        }
        let solver = DirectSolver::new(op);
        let sols = points.iter().map(|idx| solver.solve(rhs, idx)).collect::<Result<Vec<_>>>()?;
        if let Some(p) = &path {
            write_cached(p, &sols)?;
        }
        Ok(sols)
    }
}

fn read_cached(path: &Path, count: usize, n: usize) -> Result<Option<Vec<Vec<f64>>>> {
    let Ok(bytes) = std::fs::read(path) else {
        return Ok(None);
    };
    if bytes.len() != count * n * 8 {
        return Ok(None);
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Some(vals.chunks(n.max(1)).map(|c| c.to_vec()).take(count).collect()))
}

fn write_cached(path: &Path, sols: &[Vec<f64>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut bytes = Vec::with_capacity(sols.iter().map(|s| s.len() * 8).sum());
    for s in sols {
        for v in s {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Per-point and RMS relative errors ‖u − ũ‖_X / ‖u‖_X.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueErrors {
    pub per_point: Vec<f64>,
    pub rms_rel: f64,
}

pub fn true_errors(u_true: &[Vec<f64>], u_tilde: &CanonicalTensor, gram: &GramPair, points: &[Vec<usize>]) -> Result<TrueErrors> {
    if u_true.len() != points.len() {
        return Err(Error::dim("solutions supplied", points.len(), u_true.len()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    let mut per_point = Vec::with_capacity(points.len());
    for (u, idx) in u_true.iter().zip(points) {
        let ut = u_tilde.evaluate_vec(idx)?;
        let e: Vec<f64> = u.iter().zip(&ut).map(|(a, b)| a - b).collect();
        let en = gram.xnorm(&e)?;
        let un = gram.xnorm(u)?;
        num += en * en;
        den += un * un;
        per_point.push(if un > 0.0 { en / un } else { f64::INFINITY });
    }
    Ok(TrueErrors {
        per_point,
        rms_rel: crate::sketch::guarded_ratio(num, den),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::synthetic::{random_affine, SyntheticSpec};

    #[test]
    fn direct_and_dual_solves() {
        for spd in [true, false] {
            let (op, rhs, _) = random_affine(&SyntheticSpec { spd, ..Default::default() }).unwrap();
            let s = DirectSolver::new(&op);
            let idx = vec![1, 2];
            let u = s.solve(&rhs, &idx).unwrap();
            let f = rhs.eval_at(&idx).unwrap();
            let au = op.apply_at(&idx, &u).unwrap();
            let r: f64 = au.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(r <= 1e-10 * f.iter().map(|x| x * x).sum::<f64>().sqrt());
            let z = DMatrix::from_fn(op.n(), 2, |i, j| (i + 3 * j) as f64 - 4.0);
            let y = s.dual_solve(&z, &idx).unwrap();
            let aty = op.transposed().apply_block_at(&idx, &y).unwrap();
            assert!((aty - &z).abs().max() < 1e-10 * z.abs().max());
        }
    }

    #[test]
    fn disk_cache_round_trip() {
        let (op, rhs, _) = random_affine(&SyntheticSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cache = TruthCache::on_disk(dir.path());
        let pts: Vec<Vec<usize>> = op.grid().iter().collect();
        let a = cache.solutions(&op, &rhs, &pts).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = cache.solutions(&op, &rhs, &pts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, TruthCache::in_memory().solutions(&op, &rhs, &pts).unwrap());
    }

    #[test]
    fn exact_dual_tensor_matches_pointwise() {
        let (op, _, _) = random_affine(&SyntheticSpec { spd: false, ..Default::default() }).unwrap();
        let z = DMatrix::from_fn(op.n(), 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let t = exact_dual_tensor(&op, &z).unwrap();
        let s = DirectSolver::new(&op);
        for idx in op.grid().iter() {
            let d = t.evaluate(&idx).unwrap() - s.dual_solve(&z, &idx).unwrap();
            assert!(d.abs().max() < 1e-14);
        }
    }
}
