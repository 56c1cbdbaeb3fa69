use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::ParameterGrid;

/// One separated term: an n×K spatial block times per-axis factor tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub block: DMatrix<f64>,
    pub factors: Vec<Vec<f64>>,
}

impl RankOne {
    #[inline]
    pub fn weight_at(&self, idx: &[usize]) -> f64 {
        self.factors.iter().zip(idx).map(|(f, &k)| f[k]).product()
    }
}

/// Canonical-format tensor Σ_m block_m Π_i w^m_i(μ_i).
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTensor {
    n: usize,
    k_cols: usize,
    sizes: Vec<usize>,
    terms: Vec<RankOne>,
}

impl CanonicalTensor {
    pub fn zeros(n: usize, k_cols: usize, sizes: Vec<usize>) -> Self {
        CanonicalTensor {
            n,
            k_cols,
            sizes,
            terms: Vec::new(),
        }
    }

    pub fn for_grid(n: usize, k_cols: usize, grid: &ParameterGrid) -> Self {
        CanonicalTensor::zeros(n, k_cols, grid.sizes())
    }

    pub fn from_terms(n: usize, k_cols: usize, sizes: Vec<usize>, terms: Vec<RankOne>) -> Result<Self> {
        let mut t = CanonicalTensor::zeros(n, k_cols, sizes);
        for term in terms {
            t.push(term)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, term: RankOne) -> Result<()> {
        if term.block.nrows() != self.n {
            return Err(Error::dim("spatial block rows", self.n, term.block.nrows()));
        }
        if term.block.ncols() != self.k_cols {
            return Err(Error::dim("spatial block columns", self.k_cols, term.block.ncols()));
        }
        if term.factors.len() != self.sizes.len() {
            return Err(Error::AxisCount {
                expected: self.sizes.len(),
                got: term.factors.len(),
            });
        }
        for (f, &s) in term.factors.iter().zip(&self.sizes) {
            if f.len() != s {
                return Err(Error::dim("factor table length", s, f.len()));
            }
        }
        self.terms.push(term);
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn k_cols(&self) -> usize {
        self.k_cols
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn terms(&self) -> &[RankOne] {
        &self.terms
    }

    /// The first `m` terms (ũ^m). Pure greedy never alters earlier terms, so
    /// this recovers every intermediate iterate.
    pub fn truncated(&self, m: usize) -> CanonicalTensor {
        CanonicalTensor {
            n: self.n,
            k_cols: self.k_cols,
            sizes: self.sizes.clone(),
            terms: self.terms[..m.min(self.rank())].to_vec(),
        }
    }

    /// Concatenation of terms: evaluates to the sum.
    pub fn concat(&self, other: &CanonicalTensor) -> Result<CanonicalTensor> {
        if self.n != other.n || self.k_cols != other.k_cols || self.sizes != other.sizes {
            return Err(Error::InvalidArgument("tensors have different shapes".into()));
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    /// Evaluation at a grid multi-index, as an n×K array.
    pub fn evaluate(&self, idx: &[usize]) -> Result<DMatrix<f64>> {
        self.check_index(idx)?;
        let mut out = DMatrix::<f64>::zeros(self.n, self.k_cols);
        for t in &self.terms {
            let w = t.weight_at(idx);
            if w != 0.0 {
                out.zip_apply(&t.block, |o, b| *o += w * b);
            }
        }
        Ok(out)
    }

    /// Evaluation of a K = 1 tensor as a vector.
    pub fn evaluate_vec(&self, idx: &[usize]) -> Result<Vec<f64>> {
        if self.k_cols != 1 {
            return Err(Error::dim("tensor columns", 1, self.k_cols));
        }
        Ok(self.evaluate(idx)?.as_slice().to_vec())
    }

    /// Per-term weights Π_i w^m_i(μ_i) at a grid point.
    pub fn weights_at(&self, idx: &[usize]) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight_at(idx)).collect()
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.sizes.len() {
            return Err(Error::AxisCount {
                expected: self.sizes.len(),
                got: idx.len(),
            });
        }
        for (axis, (&k, &s)) in idx.iter().zip(&self.sizes).enumerate() {
            if k >= s {
                return Err(Error::GridIndex {
                    axis,
                    index: k,
                    len: s,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_zero_and_unit_factors() {
        let t = CanonicalTensor::zeros(3, 2, vec![4, 5]);
        assert_eq!(t.evaluate(&[1, 2]).unwrap(), DMatrix::zeros(3, 2));
        let block = DMatrix::from_fn(3, 2, |i, j| (i + 10 * j) as f64);
        let mut t = t;
        t.push(RankOne {
            block: block.clone(),
            factors: vec![vec![1.0; 4], vec![1.0; 5]],
        })
        .unwrap();
        assert_eq!(t.evaluate(&[3, 4]).unwrap(), block);
        assert!(t.evaluate(&[4, 0]).is_err());
        assert!(t.evaluate(&[0]).is_err());
    }

    #[test]
    fn rank_three_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sizes = vec![3, 4];
        let terms: Vec<RankOne> = (0..3)
            .map(|_| RankOne {
                block: DMatrix::from_fn(5, 1, |_, _| rng.random_range(-1.0..1.0)),
                factors: sizes
                    .iter()
                    .map(|&s| (0..s).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
            })
            .collect();
        let t = CanonicalTensor::from_terms(5, 1, sizes, terms.clone()).unwrap();
        let got = t.evaluate_vec(&[2, 1]).unwrap();
        for i in 0..5 {
            let mut s = 0.0;
            for m in 0..3 {
                s += terms[m].block[(i, 0)] * terms[m].factors[0][2] * terms[m].factors[1][1];
            }
            assert!((got[i] - s).abs() <= 1e-14);
        }
        let split = t.truncated(1).concat(&CanonicalTensor::from_terms(5, 1, vec![3, 4], terms[1..].to_vec()).unwrap()).unwrap();
        assert_eq!(split, t);
    }
}
