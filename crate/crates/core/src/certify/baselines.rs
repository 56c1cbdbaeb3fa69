use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{AffineOperator, AffineRhs, GramPair};
use crate::pgd::{residual, CanonicalTensor};
use crate::sketch::guarded_ratio;

/// Per-point ratios and their RMS aggregate sqrt(Σ num² / Σ den²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorValues {
    pub per_point: Vec<f64>,
    pub rms: f64,
}

fn aggregate(pairs: impl Iterator<Item = Result<(f64, f64)>>) -> Result<EstimatorValues> {
    let (mut num, mut den) = (0.0, 0.0);
    let mut per_point = Vec::new();
    for p in pairs {
        let (a, b) = p?;
        num += a * a;
        den += b * b;
        per_point.push(if b > 0.0 { a / b } else { f64::INFINITY });
    }
    Ok(EstimatorValues {
        per_point,
        rms: guarded_ratio(num, den),
    })
}

/// ‖ũ^{M+k} − ũ^M‖_X / ‖ũ^{M+k}‖_X.
pub fn stagnation_estimator(
    u_m: &CanonicalTensor,
    u_mk: &CanonicalTensor,
    gram: &GramPair,
    points: &[Vec<usize>],
) -> Result<EstimatorValues> {
    if u_mk.rank() < u_m.rank() {
        return Err(Error::InvalidArgument(format!(
            "reference rank {} below coarse rank {}",
            u_mk.rank(),
            u_m.rank()
        )));
    }
    aggregate(points.iter().map(|idx| {
        let fine = u_mk.evaluate_vec(idx)?;
        let coarse = u_m.evaluate_vec(idx)?;
        let d: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| a - b).collect();
        Ok((gram.xnorm(&d)?, gram.xnorm(&fine)?))
    }))
}

/// ‖A(μ)ũ(μ) − f(μ)‖_{X'} / ‖f(μ)‖_{X'}.
pub fn residual_estimator(
    op: &AffineOperator,
    rhs: &AffineRhs,
    u: &CanonicalTensor,
    gram: &GramPair,
    points: &[Vec<usize>],
) -> Result<EstimatorValues> {
    let v = aggregate(points.iter().map(|idx| {
        let r = residual(op, rhs, u, idx)?;
        let f = rhs.eval_at(idx)?;
        Ok((gram.dual_norm(&r)?, gram.dual_norm(&f)?))
    }))?;
    if v.rms.is_infinite() {
        return Err(Error::Domain("right-hand side vanishes on every point".into()));
    }
    Ok(v)
}

/// κ_N = max_μ γ(μ)/β(μ), the extreme singular values of R_X^{-1/2} A(μ) R_X^{-1/2}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub per_point: Vec<f64>,
    pub argmax: Vec<usize>,
}

pub const KAPPA_MAX_N: usize = 200;

pub fn kappa_oracle(op: &AffineOperator, gram: &GramPair, points: &[Vec<usize>]) -> Result<KappaReport> {
    let n = op.n();
    if n > KAPPA_MAX_N {
        return Err(Error::InvalidArgument(format!("dense condition oracle limited to n <= {KAPPA_MAX_N}, got {n}")));
    }
    if gram.n() != n {
        return Err(Error::dim("Gram size", n, gram.n()));
    }
    let eig = SymmetricEigen::new(gram.matrix().to_dense());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite { column: 0, value: eig.eigenvalues.min() });
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let mut per_point = Vec::with_capacity(points.len());
    let mut best = (0.0, Vec::new());
    for idx in points {
        let b = &inv_sqrt * op.assemble_at(idx)?.to_dense() * &inv_sqrt;
        let sv = b.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if smin <= 1e-14 * smax {
            return Err(Error::SingularAt { point: idx.clone() });
        }
        let k = smax / smin;
        if k > best.0 {
            best = (k, idx.clone());
        }
        per_point.push(k);
    }
    Ok(KappaReport {
        kappa: best.0,
        per_point,
        argmax: best.1,
    })
}
