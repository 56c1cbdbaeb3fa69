//! Small random affine problems for experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{AffineOperator, AffineRhs, AffineTerm, Axis, AxisFactor, CscMatrix, GramPair, ParameterGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub axis_sizes: Vec<usize>,
    /// Number of parameter-dependent operator terms besides the fixed one.
    pub extra_terms: usize,
    pub rhs_terms: usize,
    /// Symmetric positive definite on the grid; otherwise non-symmetric.
    pub spd: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 8,
            axis_sizes: vec![4, 3],
            extra_terms: 2,
            rhs_terms: 2,
            spd: true,
            seed: 0,
        }
    }
}

/// A(μ) = A_0 + Σ_q θ_q(μ) A_q with A_0 a shifted 1D Laplacian, and a
/// separable right-hand side. Coefficients θ_q lie in [0, 1] and A_q is scaled
/// so that A(μ) stays well conditioned; the Gram matrix is the identity
/// plus a random diagonal.
pub fn random_affine(spec: &SyntheticSpec) -> Result<(AffineOperator, AffineRhs, GramPair)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let axes = spec
        .axis_sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| Axis::uniform(format!("mu{i}"), 0.0, 1.0, s))
        .collect::<Result<Vec<_>>>()?;
    let grid = ParameterGrid::new(axes)?;

    let mut lap = Vec::new();
    for i in 0..n {
        lap.push((i, i, 2.5));
        if i + 1 < n {
            lap.push((i, i + 1, -1.0));
            lap.push((i + 1, i, -1.0));
        }
    }
    let a0 = CscMatrix::from_triplets(n, n, &lap)?.into_symmetric()?;
    let ones = |g: &ParameterGrid| g.axes().iter().map(|a| AxisFactor::ones(a.len())).collect::<Vec<_>>();
    let mut terms = vec![AffineTerm {
        value: a0,
        factors: ones(&grid),
    }];
    let scale = 0.4 / spec.extra_terms.max(1) as f64;
    for _ in 0..spec.extra_terms {
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) <= 2 {
                    let v = scale * rng.random_range(-1.0..1.0);
                    if spec.spd {
                        if i <= j {
                            trip.push((i, j, v));
                            if i != j {
                                trip.push((j, i, v));
                            }
                        }
                    } else {
                        trip.push((i, j, v));
                    }
                }
            }
        }
        let mut m = CscMatrix::from_triplets(n, n, &trip)?;
        if spec.spd {
            m = m.into_symmetric()?;
        }
        let factors = grid
            .axes()
            .iter()
            .map(|a| AxisFactor::table((0..a.len()).map(|_| rng.random_range(0.0..1.0)).collect()))
            .collect();
        terms.push(AffineTerm { value: m, factors });
    }
    let op = AffineOperator::new(grid.clone(), terms)?.with_spd(spec.spd)?;

    let rhs_terms = (0..spec.rhs_terms.max(1))
        .map(|_| AffineTerm {
            value: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            factors: grid
                .axes()
                .iter()
                .map(|a| AxisFactor::table((0..a.len()).map(|_| rng.random_range(-1.0..1.0)).collect()))
                .collect(),
        })
        .collect();
    let rhs = AffineRhs::new(grid, rhs_terms)?;

    let diag: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0 + rng.random_range(0.0..1.0))).collect();
    let gram = GramPair::new(CscMatrix::from_triplets(n, n, &diag)?.into_symmetric()?)?;
    Ok((op, rhs, gram))
}
