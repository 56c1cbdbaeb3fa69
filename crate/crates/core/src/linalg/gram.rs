use super::factor::{factorize, FactorKind, Factorization};
use super::sparse::CscMatrix;
use crate::error::{Error, Result};

/// An SPD Gram matrix R_X with its Cholesky factors, defining
/// ‖v‖²_X = vᵀR_X v and ‖v‖²_{X'} = vᵀR_X⁻¹v.
#[derive(Debug, Clone)]
pub struct GramPair {
    r_x: CscMatrix,
    chol: Factorization,
}

impl GramPair {
    pub fn new(r_x: CscMatrix) -> Result<Self> {
        let r_x = if r_x.is_symmetric() {
            r_x
        } else {
            r_x.into_symmetric()?
        };
        for i in 0..r_x.n_rows() {
            let d = r_x.get(i, i);
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { column: i, value: d });
            }
        }
        let chol = factorize(&r_x, FactorKind::Cholesky)?;
        Ok(GramPair { r_x, chol })
    }

    /// Euclidean geometry.
    pub fn identity(n: usize) -> Self {
        GramPair::new(CscMatrix::identity(n)).expect("identity is SPD")
    }

    pub fn n(&self) -> usize {
        self.r_x.n_rows()
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.r_x
    }

    pub fn factorization(&self) -> &Factorization {
        &self.chol
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != self.n() {
            return Err(Error::dim("vector length", self.n(), a.len()));
        }
        let rb = self.r_x.mul_vec(b)?;
        Ok(a.iter().zip(&rb).map(|(x, y)| x * y).sum())
    }

    pub fn xnorm(&self, v: &[f64]) -> Result<f64> {
        let q = self.inner(v, v)?;
        sqrt_form(q, v)
    }

    pub fn dual_norm(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.n() {
            return Err(Error::dim("vector length", self.n(), v.len()));
        }
        let s = self.chol.solve(v)?;
        let q: f64 = v.iter().zip(&s).map(|(x, y)| x * y).sum();
        sqrt_form(q, v)
    }
}

fn sqrt_form(q: f64, v: &[f64]) -> Result<f64> {
    let scale: f64 = v.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    if q < -1e-12 * scale {
        return Err(Error::NegativeQuadraticForm(q));
    }
    Ok(q.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn zero_and_identity() {
        let g = GramPair::identity(3);
        assert_eq!(g.xnorm(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(g.dual_norm(&[0.0; 3]).unwrap(), 0.0);
        let v = [3.0, 4.0, 12.0];
        assert_eq!(g.xnorm(&v).unwrap(), 13.0);
        assert_eq!(g.dual_norm(&v).unwrap(), 13.0);
        assert!(g.xnorm(&[1.0]).is_err());
    }

    #[test]
    fn matches_dense_spectral_oracle() {
        let n = 12;
        let r = random_spd(n, 4);
        let g = GramPair::new(CscMatrix::from_dense(&r, 0.0).symmetrized()).unwrap();
        let eig = r.clone().symmetric_eigen();
        let v = DVector::from_fn(n, |i, _| (i as f64).cos());
        let c = eig.eigenvectors.transpose() * &v;
        let x2: f64 = (0..n).map(|k| eig.eigenvalues[k] * c[k] * c[k]).sum();
        let d2: f64 = (0..n).map(|k| c[k] * c[k] / eig.eigenvalues[k]).sum();
        let vs = v.as_slice();
        assert!((g.xnorm(vs).unwrap() - x2.sqrt()).abs() <= 1e-10 * x2.sqrt());
        assert!((g.dual_norm(vs).unwrap() - d2.sqrt()).abs() <= 1e-10 * d2.sqrt());
    }

    #[test]
    fn rejects_non_spd() {
        let m = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(GramPair::new(m).is_err());
    }
}
