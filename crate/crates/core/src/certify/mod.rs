//! Baseline estimators, effectivity diagnostics and the intertwined
//! primal–dual greedy loop.

pub mod alpha;
pub mod baselines;
pub mod effectivity;
pub mod intertwined;
pub mod report;
pub mod truth;

pub use alpha::{alpha_2k, IncrementCheck, IncrementMode};
pub use baselines::{kappa_oracle, residual_estimator, stagnation_estimator, EstimatorValues, KappaReport};
pub use effectivity::{alpha_indices, effectivity_report, median, AlphaIndices, EffectivityReport};
pub use intertwined::{
    baseline_curves, evaluation_points, extend_primal, intertwined_solve, intertwined_with_sketch, BaselineCurves,
    CertificateReport, IntertwinedConfig, IterationRecord, Termination,
};
pub use truth::{exact_dual_tensor, problem_hash, true_errors, DirectSolver, TrueErrors, TruthCache};
