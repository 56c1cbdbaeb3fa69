use serde::{Deserialize, Serialize};

use super::projection::ProjectionCache;
use super::sigma::GaussianSketch;
use crate::error::{Error, Result};
use crate::linalg::{AffineOperator, AffineRhs};
use crate::pgd::CanonicalTensor;

/// Denominators below this make a relative estimate infinite.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

/// ‖Φv‖₂ = sqrt((1/K) Σ_i (Z_iᵀv)²).
pub fn estimate_norm(s: &GaussianSketch, v: &[f64]) -> Result<f64> {
    Ok(mean_sq(&s.project(v)?).sqrt())
}

pub(crate) fn mean_sq(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// sqrt(num/den), infinite when the denominator vanishes.
pub fn guarded_ratio(num: f64, den: f64) -> f64 {
    if den < DENOMINATOR_FLOOR {
        f64::INFINITY
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub index: Vec<usize>,
    pub delta: f64,
    pub delta_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub points: Vec<PointEstimate>,
    /// sqrt(mean_μ Δ(μ)²).
    pub rms: f64,
    /// sqrt(Σ_μ num(μ) / Σ_μ den(μ)).
    pub rms_rel: f64,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Default)]
struct Accumulator {
    points: Vec<PointEstimate>,
    num: f64,
    den: f64,
}

impl Accumulator {
    /// `num` and `den` are the K-sample means of squared projections.
    fn push(&mut self, index: Vec<usize>, num: f64, den: f64) {
        self.num += num;
        self.den += den;
        self.points.push(PointEstimate {
            index,
            delta: num.sqrt(),
            delta_rel: guarded_ratio(num, den),
        });
    }

    fn finish(self, k: usize, seed: u64) -> EstimateBundle {
        let count = self.points.len().max(1) as f64;
        EstimateBundle {
            rms: (self.num / count).sqrt(),
            rms_rel: if self.points.is_empty() { 0.0 } else { guarded_ratio(self.num, self.den) },
            points: self.points,
            k,
            seed,
        }
    }
}

/// Δ(μ) = ‖Φ(u(μ) − ũ(μ))‖₂ with known solutions; relative forms divide by ‖Φu(μ)‖₂.
pub fn exact_estimators(
    u_true: &[Vec<f64>],
    points: &[Vec<usize>],
    u_tilde: &CanonicalTensor,
    s: &GaussianSketch,
) -> Result<EstimateBundle> {
    if u_true.len() != points.len() {
        return Err(Error::dim("solutions supplied", points.len(), u_true.len()));
    }
    let mut acc = Accumulator::default();
    for (u, idx) in u_true.iter().zip(points) {
        let ut = u_tilde.evaluate_vec(idx)?;
        let e: Vec<f64> = u.iter().zip(&ut).map(|(a, b)| a - b).collect();
        acc.push(idx.clone(), mean_sq(&s.project(&e)?), mean_sq(&s.project(u)?));
    }
    Ok(acc.finish(s.k(), s.seed()))
}

/// Δ̃(μ) = sqrt((1/K) Σ_i (Ỹ_i(μ)ᵀ r(μ))²) with relative forms over (Ỹ_iᵀ f)².
pub fn fast_estimators(
    op: &AffineOperator,
    rhs: &AffineRhs,
    u_tilde: &CanonicalTensor,
    y_tilde: &CanonicalTensor,
    s: &GaussianSketch,
    points: &[Vec<usize>],
) -> Result<EstimateBundle> {
    if y_tilde.k_cols() != s.k() {
        return Err(Error::SketchMismatch {
            sketch: s.k(),
            dual: y_tilde.k_cols(),
        });
    }
    let mut cache = ProjectionCache::new(op, rhs, s.z_block())?;
    cache.sync(u_tilde, y_tilde)?;
    Ok(fast_from_cache(&cache, u_tilde.rank(), points, s.seed()))
}

/// Fast estimators from an already synchronized cache using primal terms `0..m`.
pub fn fast_from_cache(cache: &ProjectionCache<'_>, m: usize, points: &[Vec<usize>], seed: u64) -> EstimateBundle {
    let mut acc = Accumulator::default();
    for idx in points {
        let pp = cache.point(idx, m, m);
        acc.push(idx.clone(), mean_sq(&pp.yr()), mean_sq(&pp.yf));
    }
    acc.finish(cache.k(), seed)
}

#[cfg(test)]
mod tests {
    use super::super::rng::standard_normal_column;
    use super::super::sigma::SigmaSpec;
    use super::*;
    use crate::linalg::CscMatrix;

    #[test]
    fn zero_vector_and_replay() {
        let s = SigmaSpec::Identity(2).prepare().unwrap();
        let sk = GaussianSketch::draw(&s, 2, 11).unwrap();
        assert_eq!(estimate_norm(&sk, &[0.0, 0.0]).unwrap(), 0.0);
        let z1 = standard_normal_column(11, 0, 2)[0];
        let z2 = standard_normal_column(11, 1, 2)[0];
        let expect = ((z1 * z1 + z2 * z2) / 2.0).sqrt();
        assert_eq!(estimate_norm(&sk, &[1.0, 0.0]).unwrap(), expect);
        assert!(estimate_norm(&sk, &[1.0]).is_err());
    }

    #[test]
    fn unbiased_over_many_sketches() {
        let m = CscMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 1.0), (2, 2, 3.0), (0, 1, 0.5), (1, 0, 0.5)])
            .unwrap()
            .into_symmetric()
            .unwrap();
        let s = SigmaSpec::L2(m).prepare().unwrap();
        let v = [1.0, -1.0, 0.5];
        let truth = s.norm(&v).unwrap().powi(2);
        let reps = 2000;
        let samples: Vec<f64> = (0..reps)
            .map(|r| estimate_norm(&GaussianSketch::draw(&s, 4, 1000 + r).unwrap(), &v).unwrap().powi(2))
            .collect();
        let mean = samples.iter().sum::<f64>() / reps as f64;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - truth).abs() <= 3.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn exact_estimator_concentrates_for_large_k() {
        let s = SigmaSpec::Identity(5).prepare().unwrap();
        let sk = GaussianSketch::draw(&s, 10_000, 5).unwrap();
        let u = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let zero = CanonicalTensor::zeros(5, 1, vec![1]);
        let b = exact_estimators(&[u.clone()], &[vec![0]], &zero, &sk).unwrap();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ratio = b.points[0].delta / norm;
        assert!((0.97..=1.03).contains(&ratio));
        assert!((b.points[0].delta_rel - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scale_equivariance_and_guard() {
        let s = SigmaSpec::Identity(3).prepare().unwrap();
        let sk = GaussianSketch::draw(&s, 5, 2).unwrap();
        let v = [0.3, -1.0, 2.0];
        let a = estimate_norm(&sk, &v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| -4.0 * x).collect();
        assert!((estimate_norm(&sk, &scaled).unwrap() - 4.0 * a).abs() <= 4.0 * a * 1e-15);
        assert_eq!(guarded_ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(guarded_ratio(0.0, 0.0), f64::INFINITY);
    }
}
