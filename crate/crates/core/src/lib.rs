//! Proper Generalized Decomposition of parametrized linear systems with
//! randomized, residual-based a posteriori error certification.

pub mod certify;
pub mod error;
pub mod linalg;
pub mod pgd;
pub mod problems;
pub mod provenance;
pub mod sketch;

pub use error::{Error, Result};
