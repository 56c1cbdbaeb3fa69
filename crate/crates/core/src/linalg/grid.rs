use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A finite set of parameter values on one axis, with a declared range used
/// for off-grid evaluation of closed-form coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    points: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Axis {
    /// Points in increasing order. The declared range is their hull.
    pub fn from_points(name: impl Into<String>, points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyAxis(0));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("axis points must be finite".into()));
        }
        let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Axis {
            name: name.into(),
            points,
            lo,
            hi,
        })
    }

    /// `n` equispaced points on `[lo, hi]`, endpoints included.
    pub fn uniform(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyAxis(0));
        }
        if !(hi >= lo) {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
        }
        let points = if n == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { hi } else { lo + k as f64 * h })
                .collect()
        };
        let mut axis = Axis::from_points(name, points)?;
        axis.lo = lo;
        axis.hi = hi;
        Ok(axis)
    }

    /// Standard-normal quantiles at the midpoints of `n` equal-probability bins.
    pub fn normal_quantiles(name: impl Into<String>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyAxis(0));
        }
        let normal = Normal::standard();
        let points: Vec<f64> = (0..n)
            .map(|k| {
                // Exploit symmetry so the grid is exactly antisymmetric.
                let j = n - 1 - k;
                if k == j {
                    0.0
                } else if k < j {
                    normal.inverse_cdf((k as f64 + 0.5) / n as f64)
                } else {
                    -normal.inverse_cdf((j as f64 + 0.5) / n as f64)
                }
            })
            .collect();
        Axis::from_points(name, points)
    }

    /// Widens the declared range used for off-grid evaluation.
    pub fn with_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if lo > self.lo || hi < self.hi {
            return Err(Error::InvalidArgument(
                "declared range must contain every grid point".into(),
            ));
        }
        self.lo = lo;
        self.hi = hi;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Index of the grid point equal to `value` up to 1e-12 relative.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + value.abs());
        self.points.iter().position(|&p| (p - value).abs() <= tol)
    }
}

/// Size of a product grid, exact when it fits in 128 bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cardinality {
    pub exact: Option<u128>,
    pub log10: f64,
}

impl Cardinality {
    /// Value as a float, possibly rounded (used in sample-size formulas).
    pub fn as_f64(&self) -> f64 {
        match self.exact {
            Some(c) => c as f64,
            None => 10f64.powf(self.log10),
        }
    }

    pub fn ln(&self) -> f64 {
        match self.exact {
            Some(c) => (c as f64).ln(),
            None => self.log10 * std::f64::consts::LN_10,
        }
    }
}

impl std::fmt::Display for Cardinality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.exact {
            Some(c) => write!(f, "{c}"),
            None => write!(f, "10^{:.4}", self.log10),
        }
    }
}

/// Product grid P = P_1 × … × P_p. Points are addressed by multi-indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    axes: Vec<Axis>,
}

impl ParameterGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::EmptyAxis(i));
            }
        }
        Ok(ParameterGrid { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn cardinality(&self) -> Cardinality {
        let mut exact = Some(1u128);
        let mut log10 = 0.0;
        for a in &self.axes {
            exact = exact.and_then(|c| c.checked_mul(a.len() as u128));
            log10 += (a.len() as f64).log10();
        }
        Cardinality { exact, log10 }
    }

    /// Number of points when it fits in `usize`.
    pub fn len(&self) -> Option<usize> {
        self.cardinality()
            .exact
            .and_then(|c| usize::try_from(c).ok())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.dim() {
            return Err(Error::AxisCount {
                expected: self.dim(),
                got: idx.len(),
            });
        }
        for (axis, (&k, a)) in idx.iter().zip(&self.axes).enumerate() {
            if k >= a.len() {
                return Err(Error::GridIndex {
                    axis,
                    index: k,
                    len: a.len(),
                });
            }
        }
        Ok(())
    }

    /// Parameter values of a grid point.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.points[k])
            .collect()
    }

    /// Multi-index of an on-grid point, or `OffGrid` naming the first bad axis.
    pub fn locate(&self, mu: &[f64]) -> Result<Vec<usize>> {
        if mu.len() != self.dim() {
            return Err(Error::AxisCount {
                expected: self.dim(),
                got: mu.len(),
            });
        }
        mu.iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(axis, (&v, a))| a.index_of(v).ok_or(Error::OffGrid { axis, value: v }))
            .collect()
    }

    /// Lazy iteration in row-major order (last axis fastest).
    pub fn iter(&self) -> GridIter {
        GridIter {
            sizes: self.sizes(),
            next: Some(vec![0; self.dim()]),
        }
    }

    /// Row-major linear index of a multi-index (small grids only).
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&k, a)| acc * a.len() + k)
    }

    /// A fixed evaluation set: the whole grid when it has at most `count`
    /// points, otherwise `count` uniform draws (with replacement) seeded by `seed`.
    pub fn evaluation_set(&self, count: usize, seed: u64) -> Vec<Vec<usize>> {
        match self.len() {
            Some(len) if len <= count => self.iter().collect(),
            _ => self.sample(count, seed),
        }
    }

    /// `count` uniformly random grid points.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.axes
                    .iter()
                    .map(|a| rng.random_range(0..a.len()))
                    .collect()
            })
            .collect()
    }
}

pub struct GridIter {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl Iterator for GridIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        let mut carry = true;
        for i in (0..nxt.len()).rev() {
            nxt[i] += 1;
            if nxt[i] < self.sizes[i] {
                carry = false;
                break;
            }
            nxt[i] = 0;
        }
        if !carry {
            self.next = Some(nxt);
        }
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_axis_includes_endpoints() {
        let a = Axis::uniform("k2", 0.5, 1.2, 500).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(a.points()[0], 0.5);
        assert_eq!(a.points()[499], 1.2);
        let h = a.points()[1] - a.points()[0];
        assert!((h - 0.7 / 499.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_axes() {
        let one = Axis::normal_quantiles("x", 1).unwrap();
        assert_eq!(one.points(), &[0.0]);
        let a = Axis::normal_quantiles("x", 50).unwrap();
        let p = a.points();
        for k in 0..50 {
            assert_eq!(p[k], -p[49 - k]);
            if k > 0 {
                assert!(p[k] > p[k - 1]);
            }
        }
        // Independent oracle: bisection on the normal CDF via erfc.
        let cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
        let target = 0.5 / 50.0;
        let (mut lo, mut hi) = (-10.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((p[0] - lo).abs() < 1e-9);
    }

    #[test]
    fn huge_grid_cardinality_is_not_materialized() {
        let axes = (0..20)
            .map(|i| Axis::normal_quantiles(format!("mu{i}"), 50).unwrap())
            .collect();
        let g = ParameterGrid::new(axes).unwrap();
        let c = g.cardinality();
        assert_eq!(c.exact, Some(50u128.pow(20)));
        assert!((c.log10 - 20.0 * 50f64.log10()).abs() < 1e-12);
        assert!(g.len().is_none());
        let s = g.evaluation_set(100, 1);
        assert_eq!(s.len(), 100);
        assert_eq!(s, g.evaluation_set(100, 1));

        let axes = (0..30)
            .map(|i| Axis::uniform(format!("mu{i}"), 0.0, 1.0, 50).unwrap())
            .collect();
        let c = ParameterGrid::new(axes).unwrap().cardinality();
        assert!(c.exact.is_none());
    }

    #[test]
    fn iteration_is_row_major_and_complete() {
        let g = ParameterGrid::new(vec![
            Axis::uniform("a", 0.0, 1.0, 2).unwrap(),
            Axis::uniform("b", 0.0, 1.0, 3).unwrap(),
        ])
        .unwrap();
        let all: Vec<_> = g.iter().collect();
        assert_eq!(all.len(), 6);
        for (l, idx) in all.iter().enumerate() {
            assert_eq!(g.linear_index(idx), l);
        }
        assert_eq!(g.locate(&[1.0, 0.5]).unwrap(), vec![1, 1]);
        assert!(matches!(g.locate(&[0.3, 0.5]), Err(Error::OffGrid { axis: 0, .. })));
    }
}
