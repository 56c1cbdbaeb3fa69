use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::rng::{standard_normal_column, RNG_ID};
use crate::error::{Error, Result};
use crate::linalg::{factorize, CscMatrix, FactorKind, Factorization, GramPair};
use crate::provenance::hash_bytes;

/// Covariance Σ of the Gaussian sketch, i.e. the norm ‖·‖_Σ being estimated.
#[derive(Debug, Clone)]
pub enum SigmaSpec {
    /// Σ = I.
    Identity(usize),
    /// Σ = R_X, the solution-space Gram matrix.
    GramNatural(GramPair),
    /// Σ = R_{L²} (or any SPD matrix).
    L2(CscMatrix),
    /// Σ = Lᵀ R_W L with an m×n extractor L and an m×m SPD weight.
    Qoi { extractor: CscMatrix, weight: DMatrix<f64> },
    /// Σ = l lᵀ.
    ScalarQoi(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaDescriptor {
    pub variant: String,
    pub n: usize,
    /// Rows of the factor U (length of each standard normal draw).
    pub m: usize,
    pub hash: String,
}

/// Σ = UᵀU in whatever form is cheapest to apply as z ↦ Uᵀz.
#[derive(Debug, Clone)]
enum Factor {
    Identity,
    Chol(Factorization),
    Qoi { extractor_t: CscMatrix, chol_w: DMatrix<f64> },
    Scalar(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct PreparedSigma {
    spec: SigmaSpec,
    factor: Factor,
    n: usize,
    m: usize,
}

impl SigmaSpec {
    pub fn n(&self) -> usize {
        match self {
            SigmaSpec::Identity(n) => *n,
            SigmaSpec::GramNatural(g) => g.n(),
            SigmaSpec::L2(m) => m.n_rows(),
            SigmaSpec::Qoi { extractor, .. } => extractor.n_cols(),
            SigmaSpec::ScalarQoi(l) => l.len(),
        }
    }

    pub fn variant(&self) -> &'static str {
        match self {
            SigmaSpec::Identity(_) => "identity",
            SigmaSpec::GramNatural(_) => "gram_natural",
            SigmaSpec::L2(_) => "l2",
            SigmaSpec::Qoi { .. } => "qoi",
            SigmaSpec::ScalarQoi(_) => "scalar_qoi",
        }
    }

    /// Factorizes Σ; fails when Σ is not positive (semi-)definite as required.
    pub fn prepare(self) -> Result<PreparedSigma> {
        let n = self.n();
        let (factor, m) = match &self {
            SigmaSpec::Identity(n) => (Factor::Identity, *n),
            SigmaSpec::GramNatural(g) => (Factor::Chol(g.factorization().clone()), g.n()),
            SigmaSpec::L2(mat) => {
                let mat = if mat.is_symmetric() { mat.clone() } else { mat.clone().into_symmetric()? };
                (Factor::Chol(factorize(&mat, FactorKind::Cholesky)?), n)
            }
            SigmaSpec::Qoi { extractor, weight } => {
                if weight.nrows() != extractor.n_rows() || weight.ncols() != extractor.n_rows() {
                    return Err(Error::dim("qoi weight size", extractor.n_rows(), weight.nrows()));
                }
                let chol = weight
                    .clone()
                    .cholesky()
                    .ok_or(Error::NotPositiveDefinite { column: 0, value: f64::NAN })?;
                (
                    Factor::Qoi {
                        extractor_t: extractor.transpose(),
                        chol_w: chol.l(),
                    },
                    extractor.n_rows(),
                )
            }
            SigmaSpec::ScalarQoi(l) => (Factor::Scalar(l.clone()), 1),
        };
        Ok(PreparedSigma { spec: self, factor, n, m })
    }
}

impl PreparedSigma {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &SigmaSpec {
        &self.spec
    }

    /// Z = Uᵀ ẑ for a standard normal ẑ of length `m`.
    pub fn color(&self, zhat: &[f64]) -> Result<Vec<f64>> {
        if zhat.len() != self.m {
            return Err(Error::dim("standard normal draw length", self.m, zhat.len()));
        }
        match &self.factor {
            Factor::Identity => Ok(zhat.to_vec()),
            Factor::Chol(f) => f.mul_lower(zhat),
            Factor::Qoi { extractor_t, chol_w } => {
                let w = chol_w * nalgebra::DVector::from_column_slice(zhat);
                extractor_t.mul_vec(w.as_slice())
            }
            Factor::Scalar(l) => Ok(l.iter().map(|x| x * zhat[0]).collect()),
        }
    }

    /// Σ v.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::dim("vector length", self.n, v.len()));
        }
        match &self.spec {
            SigmaSpec::Identity(_) => Ok(v.to_vec()),
            SigmaSpec::GramNatural(g) => g.matrix().mul_vec(v),
            SigmaSpec::L2(m) => m.mul_vec(v),
            SigmaSpec::Qoi { extractor, weight } => {
                let lv = extractor.mul_vec(v)?;
                let wlv = weight * nalgebra::DVector::from_vec(lv);
                extractor.tr_mul_vec(wlv.as_slice())
            }
            SigmaSpec::ScalarQoi(l) => {
                let s: f64 = l.iter().zip(v).map(|(a, b)| a * b).sum();
                Ok(l.iter().map(|x| x * s).collect())
            }
        }
    }

    /// ‖v‖_Σ = sqrt(vᵀ Σ v).
    pub fn norm(&self, v: &[f64]) -> Result<f64> {
        let sv = self.apply(v)?;
        let q: f64 = v.iter().zip(&sv).map(|(a, b)| a * b).sum();
        Ok(q.max(0.0).sqrt())
    }

    pub fn descriptor(&self) -> SigmaDescriptor {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(self.spec.variant().as_bytes());
        let mut push_sparse = |m: &CscMatrix| {
            for (i, j, v) in m.iter() {
                bytes.extend_from_slice(&(i as u64).to_le_bytes());
                bytes.extend_from_slice(&(j as u64).to_le_bytes());
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        };
        match &self.spec {
            SigmaSpec::Identity(_) => {}
            SigmaSpec::GramNatural(g) => push_sparse(g.matrix()),
            SigmaSpec::L2(m) => push_sparse(m),
            SigmaSpec::Qoi { extractor, weight } => {
                push_sparse(extractor);
                for v in weight.iter() {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            SigmaSpec::ScalarQoi(l) => {
                for v in l {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        bytes.extend_from_slice(&(self.n as u64).to_le_bytes());
        SigmaDescriptor {
            variant: self.spec.variant().to_string(),
            n: self.n,
            m: self.m,
            hash: hash_bytes(&bytes),
        }
    }
}

/// K Gaussian vectors Z_i ~ N(0, Σ), the columns of `z_block`.
#[derive(Debug, Clone)]
pub struct GaussianSketch {
    z_block: DMatrix<f64>,
    seed: u64,
    sigma: SigmaDescriptor,
}

/// Serialized form: vectors are regenerated from the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub k: usize,
    pub seed: u64,
    pub rng_id: String,
    pub sigma: SigmaDescriptor,
}

impl GaussianSketch {
    pub fn draw(sigma: &PreparedSigma, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("sketch needs at least one sample".into()));
        }
        let mut z_block = DMatrix::zeros(sigma.n, k);
        for i in 0..k {
            let zhat = standard_normal_column(seed, i as u64, sigma.m);
            let z = sigma.color(&zhat)?;
            z_block.column_mut(i).copy_from_slice(&z);
        }
        Ok(GaussianSketch {
            z_block,
            seed,
            sigma: sigma.descriptor(),
        })
    }

    pub fn k(&self) -> usize {
        self.z_block.ncols()
    }

    pub fn n(&self) -> usize {
        self.z_block.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng_id(&self) -> &'static str {
        RNG_ID
    }

    pub fn z_block(&self) -> &DMatrix<f64> {
        &self.z_block
    }

    pub fn sigma(&self) -> &SigmaDescriptor {
        &self.sigma
    }

    /// Z_iᵀ v for every i.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n() {
            return Err(Error::dim("vector length", self.n(), v.len()));
        }
        Ok((0..self.k())
            .map(|i| self.z_block.column(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn record(&self) -> SketchRecord {
        SketchRecord {
            k: self.k(),
            seed: self.seed,
            rng_id: RNG_ID.to_string(),
            sigma: self.sigma.clone(),
        }
    }

    /// Regenerates a sketch from its record and the matching covariance.
    pub fn from_record(rec: &SketchRecord, sigma: &PreparedSigma) -> Result<Self> {
        if rec.rng_id != RNG_ID {
            return Err(Error::InvalidArgument(format!("unknown rng `{}`", rec.rng_id)));
        }
        if sigma.descriptor() != rec.sigma {
            return Err(Error::InvalidArgument("covariance does not match the sketch record".into()));
        }
        GaussianSketch::draw(sigma, rec.k, rec.seed)
    }
}
