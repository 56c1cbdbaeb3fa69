//! Alternating least squares for one rank-one correction.
//!
//! Both formulations reduce to minimizing, over v(μ) = U λ(μ) with
//! λ(μ) = Π_i λ_i(μ_i), the quadratic increment
//!
//!   D(v) = mean_μ λ² e(μ) − 2 mean_μ λ s(μ),
//!   e(μ) = Σ_e g_e(μ) tr(Uᵀ M_e U),   s(μ) = Σ_s h_s(μ) tr(Uᵀ V_s),
//!
//! where g_e, h_s are separable and means over the product grid factor into
//! per-axis means. Minimal residual uses M_e = A_qᵀA_q' (symmetrized pairs)
//! and V_s = A_qᵀ b_t; Galerkin uses M_e = A_q and V_s = b_t, where the current
//! residual is Σ_t b_t χ_t(μ).

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::RankOne;
use crate::error::{Error, Result};
use crate::linalg::{factorize_with_ordering, AffineOperator, CscMatrix, FactorKind, Ordering, SumPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    MinResidual,
    Galerkin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub formulation: Formulation,
    pub max_rank: usize,
    pub als_sweeps: usize,
    pub als_stagnation_tol: f64,
    pub seed: u64,
    pub max_restarts: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            formulation: Formulation::MinResidual,
            max_rank: 10,
            als_sweeps: 10,
            als_stagnation_tol: 1e-6,
            seed: 0,
            max_restarts: 3,
        }
    }
}

/// Separable functions Π_i g_i(μ_i), one flat table block per function.
#[derive(Debug, Clone, Default)]
pub(crate) struct SepBank {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    stride: usize,
    data: Vec<f64>,
}

impl SepBank {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        SepBank {
            sizes: sizes.to_vec(),
            offsets,
            stride: acc,
            data: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, f: impl Fn(usize, usize) -> f64) {
        for (i, &s) in self.sizes.iter().enumerate() {
            for k in 0..s {
                self.data.push(f(i, k));
            }
        }
    }

    #[inline]
    pub(crate) fn axis(&self, term: usize, i: usize) -> &[f64] {
        let start = term * self.stride + self.offsets[i];
        &self.data[start..start + self.sizes[i]]
    }
}

/// Operator part of the correction objective: fixed per operator and formulation.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub(crate) mats: Vec<CscMatrix>,
    pub(crate) g: SepBank,
    pattern: SumPattern,
    ordering: Ordering,
}

impl Quadratic {
    pub(crate) fn new(op: &AffineOperator, formulation: Formulation) -> Result<Self> {
        let sizes = op.grid().sizes();
        let mut g = SepBank::new(&sizes);
        let terms = op.terms();
        let mut mats = Vec::new();
        match formulation {
            Formulation::Galerkin => {
                if !op.is_spd() {
                    return Err(Error::GalerkinNeedsSpd);
                }
                for t in terms {
                    mats.push(t.value.clone());
                    g.push(|i, k| t.factors[i].values()[k]);
                }
            }
            Formulation::MinResidual => {
                for (q, tq) in terms.iter().enumerate() {
                    for tr in &terms[q..] {
                        let prod = tq.value.tr_matmul(&tr.value)?;
                        let m = if std::ptr::eq(tq, tr) {
                            prod.symmetrized()
                        } else {
                            let sum = CscMatrix::linear_combination(&[(1.0, &prod), (1.0, &prod.transpose())])?;
                            sum.symmetrized()
                        };
                        mats.push(m);
                        g.push(|i, k| tq.factors[i].values()[k] * tr.factors[i].values()[k]);
                    }
                }
            }
        }
        let pattern = SumPattern::new(mats.iter())?;
        let ordering = Ordering::rcm(pattern.pattern());
        Ok(Quadratic {
            mats,
            g,
            pattern,
            ordering,
        })
    }
}

/// Residual part of the correction objective; grows by one group of terms per
/// accepted correction.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub(crate) blocks: Vec<DMatrix<f64>>,
    pub(crate) h: SepBank,
}

impl Linear {
    pub(crate) fn new(sizes: &[usize]) -> Self {
        Linear {
            blocks: Vec::new(),
            h: SepBank::new(sizes),
        }
    }

    /// Adds the residual contribution + b χ(μ), where χ is separable.
    pub(crate) fn add_residual_term(
        &mut self,
        op: &AffineOperator,
        formulation: Formulation,
        b: &DMatrix<f64>,
        chi: &dyn Fn(usize, usize) -> f64,
    ) -> Result<()> {
        match formulation {
            Formulation::Galerkin => {
                self.blocks.push(b.clone());
                self.h.push(chi);
            }
            Formulation::MinResidual => {
                for t in op.terms() {
                    self.blocks.push(t.value.tr_mul_block(b)?);
                    self.h.push(|i, k| t.factors[i].values()[k] * chi(i, k));
                }
            }
        }
        Ok(())
    }

    /// Adds −A(μ) (U w(μ)) for an accepted term.
    pub(crate) fn add_tensor_term(&mut self, op: &AffineOperator, formulation: Formulation, term: &RankOne) -> Result<()> {
        for t in op.terms() {
            let b = -t.value.mul_block(&term.block)?;
            let chi = |i: usize, k: usize| t.factors[i].values()[k] * term.factors[i][k];
            self.add_residual_term(op, formulation, &b, &chi)?;
        }
        Ok(())
    }
}

/// Current iterate of the ALS: spatial block and per-axis factors.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsState {
    pub u: DMatrix<f64>,
    pub lambdas: Vec<Vec<f64>>,
}

impl AlsState {
    /// Factors i.i.d. uniform on [−1, 1], scaled to unit RMS; zero block.
    pub fn random(n: usize, k_cols: usize, sizes: &[usize], rng: &mut impl Rng) -> Self {
        let lambdas = sizes
            .iter()
            .map(|&s| {
                let mut v: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let r = rms(&v);
                if r > 0.0 {
                    v.iter_mut().for_each(|x| *x /= r);
                } else {
                    v.iter_mut().for_each(|x| *x = 1.0);
                }
                v
            })
            .collect();
        AlsState {
            u: DMatrix::zeros(n, k_cols),
            lambdas,
        }
    }

    pub fn into_term(self) -> RankOne {
        RankOne {
            block: self.u,
            factors: self.lambdas,
        }
    }
}

pub(crate) fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Debug)]
pub(crate) enum AlsFailure {
    /// Spatial right-hand side vanishes identically: the residual is zero.
    ZeroResidual,
    /// All-zero factor or singular spatial system; a restart may help.
    Degenerate(String),
    Fatal(Error),
}

impl From<Error> for AlsFailure {
    fn from(e: Error) -> Self {
        AlsFailure::Fatal(e)
    }
}

/// The correction objective for a given residual, with cached separable means.
pub struct CorrectionProblem<'a> {
    quad: &'a Quadratic,
    lin: &'a Linear,
    sizes: Vec<usize>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    m2: Vec<f64>,
    m1: Vec<f64>,
}

impl<'a> CorrectionProblem<'a> {
    pub(crate) fn new(quad: &'a Quadratic, lin: &'a Linear, sizes: &[usize]) -> Self {
        let p = sizes.len();
        CorrectionProblem {
            quad,
            lin,
            sizes: sizes.to_vec(),
            alpha: vec![0.0; quad.mats.len()],
            beta: vec![0.0; lin.blocks.len()],
            m2: vec![0.0; quad.mats.len() * p],
            m1: vec![0.0; lin.blocks.len() * p],
        }
    }

    fn p(&self) -> usize {
        self.sizes.len()
    }

    fn refresh_axis_means(&mut self, st: &AlsState, i: usize) {
        let p = self.p();
        let lam = &st.lambdas[i];
        let ni = lam.len() as f64;
        for e in 0..self.quad.mats.len() {
            let g = self.quad.g.axis(e, i);
            self.m2[e * p + i] = g.iter().zip(lam).map(|(g, l)| g * l * l).sum::<f64>() / ni;
        }
        for s in 0..self.lin.blocks.len() {
            let h = self.lin.h.axis(s, i);
            self.m1[s * p + i] = h.iter().zip(lam).map(|(h, l)| h * l).sum::<f64>() / ni;
        }
    }

    fn refresh_spatial_coupling(&mut self, st: &AlsState) -> Result<()> {
        for (e, m) in self.quad.mats.iter().enumerate() {
            let mu = m.mul_block(&st.u)?;
            self.alpha[e] = frob(&st.u, &mu);
        }
        for (s, v) in self.lin.blocks.iter().enumerate() {
            self.beta[s] = frob(&st.u, v);
        }
        Ok(())
    }

    fn loo(m: &[f64], p: usize, term: usize, skip: Option<usize>) -> f64 {
        let row = &m[term * p..(term + 1) * p];
        row.iter()
            .enumerate()
            .filter(|&(j, _)| Some(j) != skip)
            .map(|(_, v)| v)
            .product()
    }

    /// D at the cached state.
    fn cached_objective(&self) -> f64 {
        let p = self.p();
        let quad: f64 = (0..self.alpha.len())
            .map(|e| self.alpha[e] * Self::loo(&self.m2, p, e, None))
            .sum();
        let lin: f64 = (0..self.beta.len())
            .map(|s| self.beta[s] * Self::loo(&self.m1, p, s, None))
            .sum();
        quad - 2.0 * lin
    }

    /// Objective increment D(v) for an arbitrary state.
    pub fn objective(&mut self, st: &AlsState) -> Result<f64> {
        for i in 0..self.p() {
            self.refresh_axis_means(st, i);
        }
        self.refresh_spatial_coupling(st)?;
        Ok(self.cached_objective())
    }

    fn spatial_step(&mut self, st: &mut AlsState) -> std::result::Result<f64, AlsFailure> {
        let p = self.p();
        let c: Vec<f64> = (0..self.quad.mats.len())
            .map(|e| Self::loo(&self.m2, p, e, None))
            .collect();
        let n = st.u.nrows();
        let mut g = DMatrix::<f64>::zeros(n, st.u.ncols());
        for (s, v) in self.lin.blocks.iter().enumerate() {
            let d = Self::loo(&self.m1, p, s, None);
            if d != 0.0 {
                g.zip_apply(v, |o, b| *o += d * b);
            }
        }
        if g.iter().all(|&x| x == 0.0) {
            return Err(AlsFailure::ZeroResidual);
        }
        let h = self.quad.pattern.combine(&c);
        let f = match factorize_with_ordering(&h, FactorKind::Cholesky, self.quad.ordering.clone()) {
            Ok(f) => f,
            Err(Error::NotPositiveDefinite { .. } | Error::StructurallySingular(_)) => {
                return Err(AlsFailure::Degenerate("singular spatial system".into()))
            }
            Err(e) => return Err(AlsFailure::Fatal(e)),
        };
        st.u = f.solve_block(&g)?;
        if st.u.iter().any(|x| !x.is_finite()) {
            return Err(AlsFailure::Degenerate("non-finite spatial block".into()));
        }
        self.refresh_spatial_coupling(st)?;
        Ok(self.cached_objective())
    }

    fn axis_step(&mut self, st: &mut AlsState, i: usize) -> std::result::Result<f64, AlsFailure> {
        let p = self.p();
        let ni = self.sizes[i];
        let mut num = vec![0.0; ni];
        let mut den = vec![0.0; ni];
        for e in 0..self.alpha.len() {
            let w = self.alpha[e] * Self::loo(&self.m2, p, e, Some(i));
            if w != 0.0 {
                for (d, g) in den.iter_mut().zip(self.quad.g.axis(e, i)) {
                    *d += w * g;
                }
            }
        }
        for s in 0..self.beta.len() {
            let w = self.beta[s] * Self::loo(&self.m1, p, s, Some(i));
            if w != 0.0 {
                for (nm, h) in num.iter_mut().zip(self.lin.h.axis(s, i)) {
                    *nm += w * h;
                }
            }
        }
        let dmax = den.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let lam: Vec<f64> = num
            .iter()
            .zip(&den)
            .map(|(&nm, &d)| if d > 1e-300 && d > 1e-14 * dmax { nm / d } else { 0.0 })
            .collect();
        let r = rms(&lam);
        if !(r > 0.0) || !r.is_finite() {
            return Err(AlsFailure::Degenerate(format!("all-zero factor on axis {i}")));
        }
        // Unit-RMS factor; scale moved into the spatial block.
        st.lambdas[i] = lam.iter().map(|x| x / r).collect();
        st.u *= r;
        self.alpha.iter_mut().for_each(|a| *a *= r * r);
        self.beta.iter_mut().for_each(|b| *b *= r);
        self.refresh_axis_means(st, i);
        Ok(self.cached_objective())
    }

    /// One sweep U → λ_1 → … → λ_p. Returns the objective after every half-step.
    pub(crate) fn sweep_detailed(&mut self, st: &mut AlsState) -> std::result::Result<Vec<f64>, AlsFailure> {
        for i in 0..self.p() {
            self.refresh_axis_means(st, i);
        }
        let mut out = Vec::with_capacity(self.p() + 1);
        out.push(self.spatial_step(st)?);
        for i in 0..self.p() {
            out.push(self.axis_step(st, i)?);
        }
        Ok(out)
    }

    /// One ALS sweep; returns the objective increment after the spatial
    /// update and after each axis update.
    pub fn sweep_half_steps(&mut self, st: &mut AlsState) -> Result<Vec<f64>> {
        match self.sweep_detailed(st) {
            Ok(v) => Ok(v),
            Err(AlsFailure::Fatal(e)) => Err(e),
            Err(AlsFailure::ZeroResidual) => Ok(vec![0.0]),
            Err(AlsFailure::Degenerate(reason)) => Err(Error::CorrectionRejected { restarts: 0, reason }),
        }
    }

    /// One ALS sweep; returns the objective increment at the updated state.
    pub fn sweep(&mut self, st: &mut AlsState) -> Result<f64> {
        Ok(*self.sweep_half_steps(st)?.last().expect("sweep has a spatial step"))
    }
}

fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Outcome of one ALS run.
#[derive(Debug, Clone)]
pub struct AlsRun {
    pub term: RankOne,
    pub delta: f64,
    /// Objective increment after each sweep.
    pub sweeps: Vec<f64>,
}

/// Runs ALS from a random start until the sweep budget or stagnation.
pub(crate) fn run_als(
    prob: &mut CorrectionProblem<'_>,
    n: usize,
    k_cols: usize,
    cfg: &GreedyConfig,
    rng: &mut impl Rng,
) -> std::result::Result<AlsRun, AlsFailure> {
    let sizes = prob.sizes.clone();
    let mut st = AlsState::random(n, k_cols, &sizes, rng);
    let mut sweeps = Vec::new();
    let mut prev: Option<f64> = None;
    for _ in 0..cfg.als_sweeps.max(1) {
        let d = *prob.sweep_detailed(&mut st)?.last().expect("non-empty");
        sweeps.push(d);
        if let Some(pv) = prev {
            if (pv - d).abs() <= cfg.als_stagnation_tol * d.abs() {
                break;
            }
        }
        prev = Some(d);
    }
    let delta = *sweeps.last().expect("at least one sweep");
    Ok(AlsRun {
        term: st.into_term(),
        delta,
        sweeps,
    })
}
