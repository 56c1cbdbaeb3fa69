//! Sparse matrices, direct solvers, Gram norms and affine parametrized operators.

pub mod affine;
pub mod factor;
pub mod gram;
pub mod grid;
pub mod mtx;
pub mod ordering;
pub mod sparse;

pub use affine::{AffineOperator, AffineRhs, AffineTerm, AxisFactor, ClosedForm};
pub use factor::{factorize, factorize_with_ordering, FactorKind, Factorization};
pub use gram::GramPair;
pub use grid::{Axis, Cardinality, ParameterGrid};
pub use ordering::Ordering;
pub use sparse::{CscMatrix, SumPattern};
