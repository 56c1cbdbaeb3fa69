use serde::{Deserialize, Serialize};

use crate::sketch::{guarded_ratio, ProjectionCache};

/// Sketch-exact and dual-estimated relative norms of a known primal increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementCheck {
    /// From Zᵀ(increment) / Zᵀ(reference).
    pub exact: f64,
    /// From Ỹᵀ A(increment) / Ỹᵀ A(reference).
    pub dual: f64,
    /// max(exact/dual, dual/exact); infinite when either side is 0 or undefined.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IncrementMode {
    /// Increment ũ^M − ũ^{M−k} against ũ^M.
    #[default]
    Minus,
    /// Increment ũ^{M+k} − ũ^M against ũ^{M+k}; needs k look-ahead terms.
    Plus,
}

fn ratio_pair(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        // Identical zero increments carry no information about the dual.
        return 1.0;
    }
    if !(a > 0.0 && b > 0.0) || a.is_infinite() || b.is_infinite() {
        return f64::INFINITY;
    }
    (a / b).max(b / a)
}

/// α_{2,k} from the projection cache. For `Minus`, `m` is the current rank and
/// terms `m−k..m` form the increment (all of `0..m` when m < k). For `Plus`, the
/// cache must hold at least `m + k` primal terms.
pub fn alpha_2k(cache: &ProjectionCache<'_>, points: &[Vec<usize>], m: usize, k: usize, mode: IncrementMode) -> IncrementCheck {
    let (top, lag) = match mode {
        IncrementMode::Minus => (m, m.saturating_sub(k)),
        IncrementMode::Plus => (m + k, m),
    };
    let (mut zn, mut zd, mut yn, mut yd) = (0.0, 0.0, 0.0, 0.0);
    for idx in points {
        let pp = cache.point(idx, top, lag);
        zn += sq(&pp.zu_inc);
        zd += sq(&pp.zu);
        yn += sq(&pp.yau_inc);
        yd += sq(&pp.yau);
    }
    let exact = if zn == 0.0 { 0.0 } else { guarded_ratio(zn, zd) };
    let dual = if yn == 0.0 { 0.0 } else { guarded_ratio(yn, yd) };
    IncrementCheck {
        exact,
        dual,
        alpha: ratio_pair(exact, dual),
    }
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::truth::exact_dual_tensor;
    use crate::pgd::{greedy_solve, run_to_max_rank, CanonicalTensor, GreedyConfig};
    use crate::problems::synthetic::{random_affine, SyntheticSpec};
    use crate::sketch::{GaussianSketch, SigmaSpec};

    #[test]
    fn exact_dual_gives_unit_alpha() {
        let (op, rhs, g) = random_affine(&SyntheticSpec { spd: false, ..Default::default() }).unwrap();
        let u = greedy_solve(&op, &rhs, GreedyConfig { max_rank: 5, ..Default::default() }, run_to_max_rank).unwrap().tensor;
        let sk = GaussianSketch::draw(&SigmaSpec::GramNatural(g).prepare().unwrap(), 4, 3).unwrap();
        let y = exact_dual_tensor(&op, sk.z_block()).unwrap();
        let mut cache = ProjectionCache::new(&op, &rhs, sk.z_block()).unwrap();
        cache.sync(&u, &y).unwrap();
        let pts: Vec<_> = op.grid().iter().collect();
        for m in 1..=5 {
            let c = alpha_2k(&cache, &pts, m, 2, IncrementMode::Minus);
            assert!((c.alpha - 1.0).abs() < 1e-9, "m={m}: {c:?}");
        }
        let c = alpha_2k(&cache, &pts, 2, 3, IncrementMode::Plus);
        assert!((c.alpha - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_dual_is_infinite() {
        let (op, rhs, _) = random_affine(&SyntheticSpec::default()).unwrap();
        let u = greedy_solve(&op, &rhs, GreedyConfig { max_rank: 2, ..Default::default() }, run_to_max_rank).unwrap().tensor;
        let z = nalgebra::DMatrix::from_element(op.n(), 2, 1.0);
        let mut cache = ProjectionCache::new(&op, &rhs, &z).unwrap();
        cache.sync(&u, &CanonicalTensor::for_grid(op.n(), 2, op.grid())).unwrap();
        let pts: Vec<_> = op.grid().iter().collect();
        let c = alpha_2k(&cache, &pts, 2, 1, IncrementMode::Minus);
        assert_eq!(c.dual, 0.0);
        assert!(c.alpha.is_infinite());
    }
}
