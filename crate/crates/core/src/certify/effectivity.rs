use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::EstimateBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectivityReport {
    /// (grid index, η) for every point with nonzero true error.
    pub eta: Vec<(Vec<usize>, f64)>,
    /// Points skipped because the true error is zero.
    pub excluded: usize,
}

impl EffectivityReport {
    pub fn values(&self) -> Vec<f64> {
        self.eta.iter().map(|(_, v)| *v).collect()
    }

    pub fn median(&self) -> Option<f64> {
        median(&self.values())
    }

    /// Fraction of η within [1/w, w].
    pub fn fraction_within(&self, w: f64) -> f64 {
        if self.eta.is_empty() {
            return 0.0;
        }
        let hits = self.eta.iter().filter(|(_, v)| *v >= 1.0 / w && *v <= w).count();
        hits as f64 / self.eta.len() as f64
    }
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// η(μ) = Δ̃^rel(μ) / (true relative error at μ).
pub fn effectivity_report(estimates: &EstimateBundle, truth_rel: &[f64]) -> Result<EffectivityReport> {
    if truth_rel.len() != estimates.points.len() {
        return Err(Error::dim("true errors", estimates.points.len(), truth_rel.len()));
    }
    let mut eta = Vec::new();
    let mut excluded = 0;
    for (p, &t) in estimates.points.iter().zip(truth_rel) {
        if t > 0.0 && t.is_finite() {
            eta.push((p.index.clone(), p.delta_rel / t));
        } else {
            excluded += 1;
        }
    }
    Ok(EffectivityReport { eta, excluded })
}

/// Worst pointwise and RMS ratios between two estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaIndices {
    pub alpha_inf: f64,
    pub alpha_2: f64,
    pub alpha_inf_rel: f64,
    pub alpha_2_rel: f64,
}

fn two_sided(a: f64, b: f64) -> f64 {
    if a == b {
        return 1.0;
    }
    if !(a > 0.0 && b > 0.0) {
        return f64::INFINITY;
    }
    (a / b).max(b / a)
}

/// α_∞ and α₂ (absolute and relative) between exact-dual and fast estimates.
pub fn alpha_indices(exact: &EstimateBundle, fast: &EstimateBundle) -> Result<AlphaIndices> {
    if exact.points.len() != fast.points.len() {
        return Err(Error::dim("estimate points", exact.points.len(), fast.points.len()));
    }
    let mut ai = 1.0f64;
    let mut ai_rel = 1.0f64;
    for (e, f) in exact.points.iter().zip(&fast.points) {
        ai = ai.max(two_sided(e.delta, f.delta));
        ai_rel = ai_rel.max(two_sided(e.delta_rel, f.delta_rel));
    }
    Ok(AlphaIndices {
        alpha_inf: ai,
        alpha_2: two_sided(exact.rms, fast.rms),
        alpha_inf_rel: ai_rel,
        alpha_2_rel: two_sided(exact.rms_rel, fast.rms_rel),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::PointEstimate;

    fn bundle(vals: &[(f64, f64)]) -> EstimateBundle {
        let points: Vec<_> = vals
            .iter()
            .enumerate()
            .map(|(i, &(d, r))| PointEstimate { index: vec![i], delta: d, delta_rel: r })
            .collect();
        let rms = (vals.iter().map(|v| v.0 * v.0).sum::<f64>() / vals.len() as f64).sqrt();
        EstimateBundle { points, rms, rms_rel: 0.5, k: 3, seed: 0 }
    }

    #[test]
    fn zero_truth_is_excluded() {
        let b = bundle(&[(0.0, 0.0), (0.0, 0.0)]);
        let r = effectivity_report(&b, &[0.0, 0.0]).unwrap();
        assert!(r.eta.is_empty());
        assert_eq!(r.excluded, 2);
        assert_eq!(r.median(), None);
    }

    #[test]
    fn eta_and_alphas() {
        let b = bundle(&[(1.0, 0.2), (2.0, 0.4), (3.0, 0.1)]);
        let r = effectivity_report(&b, &[0.1, 0.4, 0.1]).unwrap();
        assert_eq!(r.values(), vec![2.0, 1.0, 1.0]);
        assert_eq!(r.median(), Some(1.0));
        assert!((r.fraction_within(1.5) - 2.0 / 3.0).abs() < 1e-15);
        let a = alpha_indices(&b, &b).unwrap();
        assert_eq!((a.alpha_inf, a.alpha_2, a.alpha_inf_rel, a.alpha_2_rel), (1.0, 1.0, 1.0, 1.0));
        let c = bundle(&[(2.0, 0.2), (2.0, 0.4), (3.0, 0.05)]);
        let a = alpha_indices(&b, &c).unwrap();
        assert_eq!(a.alpha_inf, 2.0);
        assert_eq!(a.alpha_inf_rel, 2.0);
    }
}
