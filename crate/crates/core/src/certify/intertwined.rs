use serde::{Deserialize, Serialize};

use super::alpha::{alpha_2k, IncrementCheck, IncrementMode};
use super::baselines::{residual_estimator, stagnation_estimator};
use super::truth::true_errors;
use crate::error::{Error, Result};
use crate::linalg::{AffineOperator, AffineRhs, GramPair};
use crate::pgd::{CanonicalTensor, GreedyConfig, GreedySolver};
use crate::sketch::{fast_from_cache, sample_size_ln, GaussianSketch, PreparedSigma, ProjectionCache, SigmaDescriptor, SizingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntertwinedConfig {
    pub tol: f64,
    pub delta: f64,
    pub m_max: usize,
    pub w: f64,
    pub alpha: f64,
    pub k_lag: usize,
    pub primal: GreedyConfig,
    pub dual: GreedyConfig,
    pub seed: u64,
    /// Fixes K instead of sizing it from (δ, w, #P, m_max).
    pub k_override: Option<usize>,
    /// Hard cap on the dual rank; defaults to 4·m_max.
    pub l_max: Option<usize>,
    pub increment: IncrementMode,
    /// Evaluation points when the grid is too large to enumerate.
    pub eval_points: usize,
}

impl Default for IntertwinedConfig {
    fn default() -> Self {
        IntertwinedConfig {
            tol: 1e-2,
            delta: 1e-2,
            m_max: 20,
            w: 5.0,
            alpha: 2.0,
            k_lag: 6,
            primal: GreedyConfig::default(),
            dual: GreedyConfig { seed: 1, ..GreedyConfig::default() },
            seed: 0,
            k_override: None,
            l_max: None,
            increment: IncrementMode::Minus,
            eval_points: 10_000,
        }
    }
}

impl IntertwinedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.alpha > 1.0) {
            return bad(format!("alpha must exceed 1, got {}", self.alpha));
        }
        if !(self.w > std::f64::consts::E) {
            return bad(format!("w must exceed e in relative mode, got {}", self.w));
        }
        if self.k_lag == 0 {
            return bad("increment count k must be at least 1".into());
        }
        if self.m_max == 0 {
            return bad("m_max must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("failure probability {} not in (0, 1)", self.delta));
        }
        if self.k_override == Some(0) {
            return bad("K override must be positive".into());
        }
        Ok(())
    }

    pub fn l_max(&self) -> usize {
        self.l_max.unwrap_or(4 * self.m_max)
    }

    /// Sample count from the relative bound with 2#P replaced by 2·m_max·#P.
    pub fn sample_count(&self, ln_cardinality: f64) -> Result<usize> {
        match self.k_override {
            Some(k) => Ok(k),
            None => sample_size_ln(self.delta, self.w, ln_cardinality, SizingMode::Relative, Some(self.m_max)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub m: usize,
    pub l: usize,
    /// Δ̃^rel after the dual loop of this iteration.
    pub estimate: f64,
    /// Every α_{2,k} evaluation of this iteration, in order.
    pub checks: Vec<IncrementCheck>,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCurves {
    pub m: Vec<usize>,
    pub stagnation_k: usize,
    pub residual: Vec<f64>,
    pub stagnation: Vec<f64>,
    /// True relative RMS error when direct solutions are available.
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub k: usize,
    pub seed: u64,
    pub rng_id: String,
    pub sigma: SigmaDescriptor,
    pub config: IntertwinedConfig,
    pub n_points: usize,
    pub history: Vec<IterationRecord>,
    pub estimate: f64,
    pub termination: Termination,
    pub baselines: Option<BaselineCurves>,
    #[serde(skip_serializing)]
    pub points: Vec<Vec<usize>>,
    #[serde(skip_serializing)]
    pub primal: CanonicalTensor,
    #[serde(skip_serializing)]
    pub dual: CanonicalTensor,
    #[serde(skip_serializing)]
    pub sketch: GaussianSketch,
}

impl CertificateReport {
    pub fn final_rank(&self) -> usize {
        self.primal.rank()
    }

    pub fn dual_rank(&self) -> usize {
        self.dual.rank()
    }
}

/// Points over which RMS quantities are summed: the whole grid when it is small
/// enough, otherwise a fixed seeded sample.
pub fn evaluation_points(op: &AffineOperator, count: usize, seed: u64) -> Vec<Vec<usize>> {
    op.grid().evaluation_set(count, seed)
}

/// Intertwined primal–dual greedy construction with α_{2,k}-driven dual enrichment.
pub fn intertwined_solve(
    op: &AffineOperator,
    rhs: &AffineRhs,
    sigma: &PreparedSigma,
    cfg: &IntertwinedConfig,
) -> Result<CertificateReport> {
    cfg.validate()?;
    let k = cfg.sample_count(op.grid().cardinality().ln())?;
    let sketch = GaussianSketch::draw(sigma, k, cfg.seed)?;
    intertwined_with_sketch(op, rhs, sketch, cfg)
}

/// As [`intertwined_solve`] with a caller-supplied sketch.
pub fn intertwined_with_sketch(
    op: &AffineOperator,
    rhs: &AffineRhs,
    sketch: GaussianSketch,
    cfg: &IntertwinedConfig,
) -> Result<CertificateReport> {
    cfg.validate()?;
    let points = evaluation_points(op, cfg.eval_points, cfg.seed);
    let op_t = op.transposed();
    let mut primal = GreedySolver::primal(op, rhs, GreedyConfig { max_rank: usize::MAX, ..cfg.primal.clone() })?;
    let mut dual = GreedySolver::dual(&op_t, sketch.z_block(), GreedyConfig { max_rank: usize::MAX, ..cfg.dual.clone() })?;
    let mut cache = ProjectionCache::new(op, rhs, sketch.z_block())?;
    let lookahead = match cfg.increment {
        IncrementMode::Minus => 0,
        IncrementMode::Plus => cfg.k_lag,
    };

    // The listing starts from L = 1: build that term before the first check.
    dual.step()?;
    cache.sync(primal.tensor(), dual.tensor())?;

    let mut estimate = 2.0 * cfg.tol;
    let mut m = 0;
    let mut history = Vec::new();
    while estimate > cfg.tol && m < cfg.m_max {
        m += 1;
        while primal.rank() < m + lookahead {
            primal.step()?;
        }
        cache.sync(primal.tensor(), dual.tensor())?;

        let mut checks = vec![alpha_2k(&cache, &points, m, cfg.k_lag, cfg.increment)];
        while checks.last().unwrap().alpha > cfg.alpha {
            if dual.rank() >= cfg.l_max() {
                return Err(Error::DualRankCap {
                    cap: cfg.l_max(),
                    rank: m,
                    alpha: checks.last().unwrap().alpha,
                });
            }
            dual.step()?;
            cache.sync(primal.tensor(), dual.tensor())?;
            checks.push(alpha_2k(&cache, &points, m, cfg.k_lag, cfg.increment));
        }

        estimate = fast_from_cache(&cache, m, &points, sketch.seed()).rms_rel;
        history.push(IterationRecord {
            m,
            l: dual.rank(),
            estimate,
            checks,
            primal_objective: primal.objective_history()[m],
            dual_objective: *dual.objective_history().last().unwrap(),
        });
    }

    let termination = if estimate <= cfg.tol { Termination::Tolerance } else { Termination::MaxRank };
    Ok(CertificateReport {
        k: sketch.k(),
        seed: sketch.seed(),
        rng_id: sketch.rng_id().to_string(),
        sigma: sketch.sigma().clone(),
        config: cfg.clone(),
        n_points: points.len(),
        history,
        estimate,
        termination,
        baselines: None,
        points,
        primal: primal.tensor().truncated(m),
        dual: dual.into_tensor(),
        sketch,
    })
}

/// Residual and stagnation baselines (and truth when solutions are given) for
/// ranks `ms`. `primal` must already hold max(ms) + k terms; see [`extend_primal`].
pub fn baseline_curves(
    op: &AffineOperator,
    rhs: &AffineRhs,
    gram: &GramPair,
    primal: &CanonicalTensor,
    ms: &[usize],
    k: usize,
    points: &[Vec<usize>],
    truth: Option<&[Vec<f64>]>,
) -> Result<BaselineCurves> {
    let mut residual = Vec::with_capacity(ms.len());
    let mut stagnation = Vec::with_capacity(ms.len());
    let mut true_rms = truth.map(|_| Vec::with_capacity(ms.len()));
    for &m in ms {
        if primal.rank() < m + k {
            return Err(Error::InvalidArgument(format!("stagnation at rank {m} needs {} terms, have {}", m + k, primal.rank())));
        }
        let um = primal.truncated(m);
        residual.push(residual_estimator(op, rhs, &um, gram, points)?.rms);
        stagnation.push(stagnation_estimator(&um, &primal.truncated(m + k), gram, points)?.rms);
        if let (Some(sols), Some(out)) = (truth, true_rms.as_mut()) {
            out.push(true_errors(sols, &um, gram, points)?.rms_rel);
        }
    }
    Ok(BaselineCurves {
        m: ms.to_vec(),
        stagnation_k: k,
        residual,
        stagnation,
        truth: true_rms,
    })
}

/// Appends greedy corrections to `t` until it has `rank` terms.
pub fn extend_primal(op: &AffineOperator, rhs: &AffineRhs, t: &CanonicalTensor, rank: usize, cfg: &GreedyConfig) -> Result<CanonicalTensor> {
    let mut s = GreedySolver::primal(op, rhs, GreedyConfig { max_rank: usize::MAX, ..cfg.clone() })?;
    for term in t.terms() {
        s.push_term(term.clone())?;
    }
    while s.rank() < rank {
        s.step()?;
    }
    Ok(s.into_tensor())
}
