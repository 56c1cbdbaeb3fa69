//! Separated evaluation of the K-vectors Ỹ(μ)ᵀf(μ), Ỹ(μ)ᵀA(μ)ũ(μ) and Zᵀũ(μ).
//!
//! Every product of a dual term with an operator term and a primal term is a
//! fixed K-vector, so per-μ cost is O(L·M·Q·K) with no length-n work.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{AffineOperator, AffineRhs};
use crate::pgd::{CanonicalTensor, RankOne};

#[derive(Debug, Clone)]
pub struct ProjectionCache<'a> {
    op: &'a AffineOperator,
    rhs: &'a AffineRhs,
    z: DMatrix<f64>,
    primal: Vec<RankOne>,
    dual: Vec<RankOne>,
    /// A_q u_m, indexed [m][q].
    au: Vec<Vec<Vec<f64>>>,
    /// Zᵀ u_m, indexed [m].
    zu: Vec<Vec<f64>>,
    /// Y_lᵀ b_t, indexed [l][t].
    yb: Vec<Vec<Vec<f64>>>,
    /// Y_lᵀ A_q u_m, indexed [l][m][q].
    yau: Vec<Vec<Vec<Vec<f64>>>>,
    active_dual: usize,
}

/// Projections at one grid point. All vectors have length K.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProjection {
    /// Ỹᵀ f.
    pub yf: Vec<f64>,
    /// Ỹᵀ A ũ^M.
    pub yau: Vec<f64>,
    /// Ỹᵀ A (ũ^M − ũ^{lag}).
    pub yau_inc: Vec<f64>,
    /// Zᵀ ũ^M.
    pub zu: Vec<f64>,
    /// Zᵀ (ũ^M − ũ^{lag}).
    pub zu_inc: Vec<f64>,
}

impl PointProjection {
    /// Ỹᵀ r = Ỹᵀ f − Ỹᵀ A ũ.
    pub fn yr(&self) -> Vec<f64> {
        self.yf.iter().zip(&self.yau).map(|(a, b)| a - b).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tr_project(block: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..block.ncols()).map(|i| dot(block.column(i).as_slice(), v)).collect()
}

impl<'a> ProjectionCache<'a> {
    pub fn new(op: &'a AffineOperator, rhs: &'a AffineRhs, z: &DMatrix<f64>) -> Result<Self> {
        crate::linalg::affine::check_compatible(op, rhs)?;
        if z.nrows() != op.n() {
            return Err(Error::dim("sketch rows", op.n(), z.nrows()));
        }
        Ok(ProjectionCache {
            op,
            rhs,
            z: z.clone(),
            primal: Vec::new(),
            dual: Vec::new(),
            au: Vec::new(),
            zu: Vec::new(),
            yb: Vec::new(),
            yau: Vec::new(),
            active_dual: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn primal_rank(&self) -> usize {
        self.primal.len()
    }

    pub fn dual_rank(&self) -> usize {
        self.active_dual
    }

    pub fn push_primal(&mut self, term: &RankOne) -> Result<()> {
        if term.block.nrows() != self.op.n() || term.block.ncols() != 1 {
            return Err(Error::dim("primal block rows", self.op.n(), term.block.nrows()));
        }
        let u = term.block.column(0);
        let u = u.as_slice();
        let au: Vec<Vec<f64>> = self.op.terms().iter().map(|t| t.value.mul_vec(u)).collect::<Result<_>>()?;
        self.zu.push(tr_project(&self.z, u));
        for (l, y) in self.dual.iter().enumerate() {
            let row = au.iter().map(|a| tr_project(&y.block, a)).collect();
            self.yau[l].push(row);
        }
        self.au.push(au);
        self.primal.push(term.clone());
        Ok(())
    }

    pub fn push_dual(&mut self, term: &RankOne) -> Result<()> {
        if term.block.nrows() != self.op.n() || term.block.ncols() != self.k() {
            return Err(Error::SketchMismatch {
                sketch: self.k(),
                dual: term.block.ncols(),
            });
        }
        // Terms beyond a truncation are discarded before a new one is added.
        self.dual.truncate(self.active_dual);
        self.yb.truncate(self.active_dual);
        self.yau.truncate(self.active_dual);
        self.yb.push(self.rhs.terms().iter().map(|t| tr_project(&term.block, &t.value)).collect());
        self.yau.push(
            self.au
                .iter()
                .map(|aqs| aqs.iter().map(|a| tr_project(&term.block, a)).collect())
                .collect(),
        );
        self.dual.push(term.clone());
        self.active_dual = self.dual.len();
        Ok(())
    }

    /// Pushes whatever terms of `primal` and `dual` are not cached yet.
    pub fn sync(&mut self, primal: &CanonicalTensor, dual: &CanonicalTensor) -> Result<()> {
        for t in &primal.terms()[self.primal.len().min(primal.rank())..] {
            self.push_primal(t)?;
        }
        if dual.rank() < self.active_dual {
            self.active_dual = dual.rank();
        }
        for t in &dual.terms()[self.active_dual..] {
            self.push_dual(t)?;
        }
        Ok(())
    }

    /// Uses only the first `l` cached dual terms.
    pub fn set_dual_rank(&mut self, l: usize) -> Result<()> {
        if l > self.dual.len() {
            return Err(Error::InvalidArgument(format!("dual rank {l} exceeds cached {}", self.dual.len())));
        }
        self.active_dual = l;
        Ok(())
    }

    /// Projections at `idx` using primal terms `0..m` with increment terms `lag..m`.
    pub fn point(&self, idx: &[usize], m: usize, lag: usize) -> PointProjection {
        let k = self.k();
        let m = m.min(self.primal.len());
        let lag = lag.min(m);
        let theta = self.op.coefficients_at(idx);
        let beta: Vec<f64> = self.rhs.terms().iter().map(|t| t.coefficient_at(idx)).collect();
        let uw: Vec<f64> = self.primal[..m].iter().map(|t| t.weight_at(idx)).collect();
        let mut out = PointProjection {
            yf: vec![0.0; k],
            yau: vec![0.0; k],
            yau_inc: vec![0.0; k],
            zu: vec![0.0; k],
            zu_inc: vec![0.0; k],
        };
        for (mi, &w) in uw.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, z) in out.zu.iter_mut().zip(&self.zu[mi]) {
                *o += w * z;
            }
            if mi >= lag {
                for (o, z) in out.zu_inc.iter_mut().zip(&self.zu[mi]) {
                    *o += w * z;
                }
            }
        }
        let mut ym = vec![0.0; k];
        for l in 0..self.active_dual {
            let yl = self.dual[l].weight_at(idx);
            if yl == 0.0 {
                continue;
            }
            for (t, &b) in beta.iter().enumerate() {
                let c = yl * b;
                for (o, v) in out.yf.iter_mut().zip(&self.yb[l][t]) {
                    *o += c * v;
                }
            }
            for (mi, &w) in uw.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                ym.iter_mut().for_each(|v| *v = 0.0);
                for (q, &th) in theta.iter().enumerate() {
                    if th != 0.0 {
                        for (o, v) in ym.iter_mut().zip(&self.yau[l][mi][q]) {
                            *o += th * v;
                        }
                    }
                }
                let c = yl * w;
                for (o, v) in out.yau.iter_mut().zip(&ym) {
                    *o += c * v;
                }
                if mi >= lag {
                    for (o, v) in out.yau_inc.iter_mut().zip(&ym) {
                        *o += c * v;
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgd::{greedy_solve, run_to_max_rank, GreedyConfig};
    use crate::problems::synthetic::{random_affine, SyntheticSpec};
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_direct_evaluation() {
        let (op, rhs, _) = random_affine(&SyntheticSpec::default()).unwrap();
        let cfg = GreedyConfig { max_rank: 4, ..Default::default() };
        let u = greedy_solve(&op, &rhs, cfg, run_to_max_rank).unwrap().tensor;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let k = 3;
        let z = DMatrix::from_fn(op.n(), k, |_, _| rng.random_range(-1.0..1.0));
        let mut y = CanonicalTensor::for_grid(op.n(), k, op.grid());
        for _ in 0..2 {
            y.push(RankOne {
                block: DMatrix::from_fn(op.n(), k, |_, _| rng.random_range(-1.0..1.0)),
                factors: op.grid().sizes().iter().map(|&s| (0..s).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            })
            .unwrap();
        }
        let mut cache = ProjectionCache::new(&op, &rhs, &z).unwrap();
        // Dual first, then primal, to exercise both fill orders.
        cache.sync(&CanonicalTensor::for_grid(op.n(), 1, op.grid()), &y).unwrap();
        cache.sync(&u, &y).unwrap();
        let lag = 1;
        for idx in op.grid().iter() {
            let pp = cache.point(&idx, u.rank(), lag);
            let yv = y.evaluate(&idx).unwrap();
            let f = rhs.eval_at(&idx).unwrap();
            let uv = u.evaluate_vec(&idx).unwrap();
            let inc: Vec<f64> = uv.iter().zip(u.truncated(lag).evaluate_vec(&idx).unwrap()).map(|(a, b)| a - b).collect();
            let au = op.apply_at(&idx, &uv).unwrap();
            let ainc = op.apply_at(&idx, &inc).unwrap();
            for i in 0..k {
                let yi = yv.column(i);
                let zi = z.column(i);
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
                assert!(close(pp.yf[i], dot(yi.as_slice(), &f)));
                assert!(close(pp.yau[i], dot(yi.as_slice(), &au)));
                assert!(close(pp.yau_inc[i], dot(yi.as_slice(), &ainc)));
                assert!(close(pp.zu[i], dot(zi.as_slice(), &uv)));
                assert!(close(pp.zu_inc[i], dot(zi.as_slice(), &inc)));
            }
        }
        cache.set_dual_rank(1).unwrap();
        let idx: Vec<usize> = vec![0, 0];
        let pp = cache.point(&idx, u.rank(), 0);
        let y1 = y.truncated(1).evaluate(&idx).unwrap();
        let f = rhs.eval_at(&idx).unwrap();
        assert!((pp.yf[0] - dot(y1.column(0).as_slice(), &f)).abs() < 1e-12);
    }
}
