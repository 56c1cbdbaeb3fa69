use nalgebra::DMatrix;

use super::tensor::CanonicalTensor;
use crate::error::{Error, Result};
use crate::linalg::{AffineOperator, AffineRhs};

/// r(μ) = f(μ) − A(μ) ũ(μ) at a grid point.
pub fn residual(op: &AffineOperator, rhs: &AffineRhs, t: &CanonicalTensor, idx: &[usize]) -> Result<Vec<f64>> {
    if t.n() != op.n() {
        return Err(Error::dim("tensor spatial dimension", op.n(), t.n()));
    }
    let u = t.evaluate_vec(idx)?;
    let au = op.apply_at(idx, &u)?;
    let mut r = rhs.eval_at(idx)?;
    r.iter_mut().zip(&au).for_each(|(r, a)| *r -= a);
    Ok(r)
}

/// R(μ) = Z − A(μ)ᵀ Ỹ(μ) for a dual tensor; `op_t` is the transposed operator.
pub fn dual_residual(op_t: &AffineOperator, z: &DMatrix<f64>, y: &CanonicalTensor, idx: &[usize]) -> Result<DMatrix<f64>> {
    if y.k_cols() != z.ncols() {
        return Err(Error::SketchMismatch {
            sketch: z.ncols(),
            dual: y.k_cols(),
        });
    }
    let yv = y.evaluate(idx)?;
    Ok(z - op_t.apply_block_at(idx, &yv)?)
}
