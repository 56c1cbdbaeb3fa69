use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::als::{rms, run_als, AlsFailure, AlsState, CorrectionProblem, Formulation, GreedyConfig, Linear, Quadratic};
use super::tensor::{CanonicalTensor, RankOne};
use crate::error::{Error, Result};
use crate::linalg::affine::check_compatible;
use crate::linalg::{AffineOperator, AffineRhs};

/// Record of one accepted correction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub rank: usize,
    pub objective: f64,
    pub delta: f64,
    pub als_sweeps: Vec<f64>,
    pub restarts: usize,
}

/// Incremental pure-greedy PGD: each call to [`GreedySolver::step`] appends one
/// rank-one term and never touches earlier ones.
///
/// The tracked objective is mean_μ ‖r(μ)‖² for minimal residual. For Galerkin
/// it is mean_μ ‖r(μ)‖²_{A(μ)⁻¹} minus the constant mean_μ ‖f(μ)‖²_{A(μ)⁻¹},
/// so the zero tensor scores 0.
pub struct GreedySolver<'a> {
    op: &'a AffineOperator,
    cfg: GreedyConfig,
    quad: Quadratic,
    lin: Linear,
    tensor: CanonicalTensor,
    objective: Vec<f64>,
    steps: Vec<StepInfo>,
    rng: ChaCha8Rng,
}

impl<'a> GreedySolver<'a> {
    /// Primal problem A(μ) u(μ) = f(μ).
    pub fn primal(op: &'a AffineOperator, rhs: &AffineRhs, cfg: GreedyConfig) -> Result<Self> {
        check_compatible(op, rhs)?;
        let mut s = GreedySolver::empty(op, 1, cfg)?;
        for t in rhs.terms() {
            let b = DMatrix::from_column_slice(op.n(), 1, &t.value);
            let chi = |i: usize, k: usize| t.factors[i].values()[k];
            s.lin.add_residual_term(op, s.cfg.formulation, &b, &chi)?;
        }
        let j0 = match s.cfg.formulation {
            Formulation::Galerkin => 0.0,
            Formulation::MinResidual => {
                let mut acc = 0.0;
                for a in rhs.terms() {
                    for b in rhs.terms() {
                        let ip: f64 = a.value.iter().zip(&b.value).map(|(x, y)| x * y).sum();
                        let m: f64 = a
                            .factors
                            .iter()
                            .zip(&b.factors)
                            .map(|(fa, fb)| {
                                let (va, vb) = (fa.values(), fb.values());
                                va.iter().zip(vb).map(|(x, y)| x * y).sum::<f64>() / va.len() as f64
                            })
                            .product();
                        acc += ip * m;
                    }
                }
                acc
            }
        };
        s.objective.push(j0);
        Ok(s)
    }

    /// Dual problem A(μ)ᵀ Y(μ) = Z with a parameter-independent n×K block.
    /// `op_t` must already be the transposed operator.
    pub fn dual(op_t: &'a AffineOperator, z: &DMatrix<f64>, cfg: GreedyConfig) -> Result<Self> {
        if z.nrows() != op_t.n() {
            return Err(Error::dim("sketch block rows", op_t.n(), z.nrows()));
        }
        let mut s = GreedySolver::empty(op_t, z.ncols(), cfg)?;
        let one = |_: usize, _: usize| 1.0;
        s.lin.add_residual_term(op_t, s.cfg.formulation, z, &one)?;
        let j0 = match s.cfg.formulation {
            Formulation::Galerkin => 0.0,
            Formulation::MinResidual => z.norm_squared(),
        };
        s.objective.push(j0);
        Ok(s)
    }

    fn empty(op: &'a AffineOperator, k_cols: usize, cfg: GreedyConfig) -> Result<Self> {
        if cfg.formulation == Formulation::Galerkin && !op.is_spd() {
            return Err(Error::GalerkinNeedsSpd);
        }
        let sizes = op.grid().sizes();
        let quad = Quadratic::new(op, cfg.formulation)?;
        Ok(GreedySolver {
            op,
            quad,
            lin: Linear::new(&sizes),
            tensor: CanonicalTensor::zeros(op.n(), k_cols, sizes),
            objective: Vec::new(),
            steps: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
        })
    }

    pub fn config(&self) -> &GreedyConfig {
        &self.cfg
    }

    pub fn tensor(&self) -> &CanonicalTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> CanonicalTensor {
        self.tensor
    }

    pub fn rank(&self) -> usize {
        self.tensor.rank()
    }

    /// Objective after 0, 1, …, M corrections.
    pub fn objective_history(&self) -> &[f64] {
        &self.objective
    }

    pub fn steps(&self) -> &[StepInfo] {
        &self.steps
    }

    /// The objective of the next correction, for driving ALS by hand.
    pub fn correction_problem(&self) -> CorrectionProblem<'_> {
        CorrectionProblem::new(&self.quad, &self.lin, self.tensor.sizes())
    }

    /// Random ALS starting point with the solver's shapes.
    pub fn random_state(&mut self) -> AlsState {
        AlsState::random(self.tensor.n(), self.tensor.k_cols(), self.tensor.sizes(), &mut self.rng)
    }

    /// Appends a caller-supplied term as if it were the next correction.
    pub fn push_term(&mut self, term: RankOne) -> Result<&StepInfo> {
        let st = AlsState {
            u: term.block.clone(),
            lambdas: term.factors.clone(),
        };
        let delta = self.correction_problem().objective(&st)?;
        self.accept(term, delta, vec![delta], 0)
    }

    /// Computes and appends one rank-one correction.
    pub fn step(&mut self) -> Result<&StepInfo> {
        let sizes = self.tensor.sizes().to_vec();
        let (n, k) = (self.tensor.n(), self.tensor.k_cols());
        let mut last_reason = String::new();
        let mut accepted: Option<(RankOne, f64, Vec<f64>, usize)> = None;
        for attempt in 0..=self.cfg.max_restarts {
            let mut prob = CorrectionProblem::new(&self.quad, &self.lin, &sizes);
            match run_als(&mut prob, n, k, &self.cfg, &mut self.rng) {
                Ok(run) => {
                    accepted = Some((run.term, run.delta, run.sweeps, attempt));
                    break;
                }
                Err(AlsFailure::ZeroResidual) => {
                    // Exact solution reached: the best correction is zero.
                    let term = RankOne {
                        block: DMatrix::zeros(n, k),
                        factors: sizes.iter().map(|&s| vec![1.0; s]).collect(),
                    };
                    accepted = Some((term, 0.0, vec![0.0], attempt));
                    break;
                }
                Err(AlsFailure::Degenerate(r)) => last_reason = r,
                Err(AlsFailure::Fatal(e)) => return Err(e),
            }
        }
        let Some((mut term, delta, sweeps, restarts)) = accepted else {
            return Err(Error::CorrectionRejected {
                restarts: self.cfg.max_restarts,
                reason: last_reason,
            });
        };
        normalize(&mut term);
        self.accept(term, delta, sweeps, restarts)
    }

    fn accept(&mut self, term: RankOne, delta: f64, sweeps: Vec<f64>, restarts: usize) -> Result<&StepInfo> {
        self.lin.add_tensor_term(self.op, self.cfg.formulation, &term)?;
        self.tensor.push(term)?;
        let j = self.objective.last().copied().unwrap_or(0.0) + delta;
        self.objective.push(j);
        self.steps.push(StepInfo {
            rank: self.tensor.rank(),
            objective: j,
            delta,
            als_sweeps: sweeps,
            restarts,
        });
        Ok(self.steps.last().expect("just pushed"))
    }
}

/// Scales every factor to unit RMS and absorbs the scale into the block.
pub(crate) fn normalize(term: &mut RankOne) {
    for f in &mut term.factors {
        let r = rms(f);
        if r > 0.0 && r.is_finite() {
            f.iter_mut().for_each(|x| *x /= r);
            term.block *= r;
        }
    }
}

/// Output of a greedy run.
#[derive(Debug, Clone)]
pub struct GreedyResult {
    pub tensor: CanonicalTensor,
    pub objective: Vec<f64>,
    pub steps: Vec<StepInfo>,
}

fn drive(mut s: GreedySolver<'_>, mut stop: impl FnMut(usize, &CanonicalTensor) -> bool) -> Result<GreedyResult> {
    while s.rank() < s.cfg.max_rank && !stop(s.rank(), s.tensor()) {
        s.step()?;
    }
    Ok(GreedyResult {
        objective: s.objective.clone(),
        steps: s.steps.clone(),
        tensor: s.into_tensor(),
    })
}

/// Pure greedy PGD for A(μ)u(μ) = f(μ). `stop(M, ũ^M)` returning true ends the run;
/// `max_rank` always does.
pub fn greedy_solve(
    op: &AffineOperator,
    rhs: &AffineRhs,
    cfg: GreedyConfig,
    stop: impl FnMut(usize, &CanonicalTensor) -> bool,
) -> Result<GreedyResult> {
    drive(GreedySolver::primal(op, rhs, cfg)?, stop)
}

/// Pure greedy PGD for A(μ)ᵀY(μ) = Z with K columns; `op_t` is the transposed operator.
pub fn dual_greedy_solve(
    op_t: &AffineOperator,
    z: &DMatrix<f64>,
    cfg: GreedyConfig,
    stop: impl FnMut(usize, &CanonicalTensor) -> bool,
) -> Result<GreedyResult> {
    drive(GreedySolver::dual(op_t, z, cfg)?, stop)
}

/// Never stops early.
pub fn run_to_max_rank(_: usize, _: &CanonicalTensor) -> bool {
    false
}
