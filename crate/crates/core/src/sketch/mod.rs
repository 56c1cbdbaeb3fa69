//! Gaussian sketches and randomized error estimators.

pub mod estimate;
pub mod fdist;
pub mod projection;
pub mod rng;
pub mod sigma;
pub mod sizing;

pub use estimate::{estimate_norm, exact_estimators, fast_estimators, fast_from_cache, guarded_ratio, EstimateBundle, PointEstimate};
pub use fdist::{f_cdf, f_effectivity_bound, f_pdf, ks_pvalue, ks_statistic, reg_inc_beta, sqrt_f_pdf};
pub use projection::{PointProjection, ProjectionCache};
pub use rng::{standard_normal_column, NormalStream, RNG_ID};
pub use sigma::{GaussianSketch, PreparedSigma, SigmaDescriptor, SigmaSpec, SketchRecord};
pub use sizing::{chi2_tail_bound, sample_size, sample_size_ln, SizingMode};

/// Draws K Gaussian vectors with covariance Σ.
pub fn draw_sketch(sigma: &PreparedSigma, k: usize, seed: u64) -> crate::Result<GaussianSketch> {
    GaussianSketch::draw(sigma, k, seed)
}
