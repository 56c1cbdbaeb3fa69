//! Canonical low-rank tensors and their greedy/ALS construction.

pub mod als;
pub mod greedy;
pub mod io;
pub mod residual;
pub mod tensor;

#[cfg(test)]
mod tests;

pub use als::{AlsState, CorrectionProblem, Formulation, GreedyConfig};
pub use greedy::{dual_greedy_solve, greedy_solve, run_to_max_rank, GreedyResult, GreedySolver, StepInfo};
pub use residual::{dual_residual, residual};
pub use tensor::{CanonicalTensor, RankOne};
