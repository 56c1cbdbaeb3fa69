//! Affine parametrized operators A(μ) = Σ_q A_q Π_i θ_{q,i}(μ_i) and right-hand
//! sides f(μ) = Σ_r f_r Π_i φ_{r,i}(μ_i).

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::ParameterGrid;
use super::sparse::{CscMatrix, SumPattern};
use crate::error::{Error, Result};

/// Closed-form univariate coefficient, used for off-grid evaluation.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    Constant { value: f64 },
    /// a + b·μ
    Linear { a: f64, b: f64 },
    /// exp(rate·μ)
    Exp { rate: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ClosedForm {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ClosedForm::Constant { value } => *value,
            ClosedForm::Linear { a, b } => a + b * x,
            ClosedForm::Exp { rate } => (rate * x).exp(),
            ClosedForm::Custom(f) => f(x),
        }
    }
}

/// Custom forms never compare equal.
impl PartialEq for ClosedForm {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ClosedForm::Constant { value: a }, ClosedForm::Constant { value: b }) => a == b,
            (ClosedForm::Linear { a, b }, ClosedForm::Linear { a: c, b: d }) => a == c && b == d,
            (ClosedForm::Exp { rate: a }, ClosedForm::Exp { rate: b }) => a == b,
            _ => false,
        }
    }
}

impl std::fmt::Debug for ClosedForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClosedForm::Constant { value } => write!(f, "Constant({value})"),
            ClosedForm::Linear { a, b } => write!(f, "Linear({a} + {b}·x)"),
            ClosedForm::Exp { rate } => write!(f, "Exp({rate}·x)"),
            ClosedForm::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Coefficient of one term along one axis: a table over the axis grid and an
/// optional closed form.
#[derive(Debug, Clone)]
pub struct AxisFactor {
    table: Vec<f64>,
    closed: Option<ClosedForm>,
}

impl AxisFactor {
    pub fn table(values: Vec<f64>) -> Self {
        AxisFactor {
            table: values,
            closed: None,
        }
    }

    /// Tabulates `form` on `points` and keeps it for off-grid evaluation.
    pub fn closed(form: ClosedForm, points: &[f64]) -> Self {
        AxisFactor {
            table: points.iter().map(|&x| form.eval(x)).collect(),
            closed: Some(form),
        }
    }

    /// Attaches a closed form without retabulating.
    pub fn with_closed_form(mut self, form: ClosedForm) -> Self {
        self.closed = Some(form);
        self
    }

    pub fn ones(len: usize) -> Self {
        AxisFactor::table(vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.table
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed.as_ref()
    }
}

/// One affine term: a value (matrix or vector) and one factor per axis.
#[derive(Debug, Clone)]
pub struct AffineTerm<T> {
    pub value: T,
    pub factors: Vec<AxisFactor>,
}

impl<T> AffineTerm<T> {
    /// Π_i θ_i at a grid multi-index.
    #[inline]
    pub fn coefficient_at(&self, idx: &[usize]) -> f64 {
        self.factors
            .iter()
            .zip(idx)
            .map(|(f, &k)| f.table[k])
            .product()
    }
}

fn check_factors<T>(terms: &[AffineTerm<T>], grid: &ParameterGrid) -> Result<()> {
    for t in terms {
        if t.factors.len() != grid.dim() {
            return Err(Error::AxisCount {
                expected: grid.dim(),
                got: t.factors.len(),
            });
        }
        for (i, f) in t.factors.iter().enumerate() {
            if f.table.len() != grid.axis(i).len() {
                return Err(Error::dim("coefficient table length", grid.axis(i).len(), f.table.len()));
            }
        }
    }
    Ok(())
}

fn coefficient_off_grid<T>(term: &AffineTerm<T>, grid: &ParameterGrid, mu: &[f64]) -> Result<f64> {
    let mut c = 1.0;
    for (axis, (f, &v)) in term.factors.iter().zip(mu).enumerate() {
        let a = grid.axis(axis);
        if let Some(k) = a.index_of(v) {
            c *= f.table[k];
            continue;
        }
        let Some(form) = &f.closed else {
            return Err(Error::OffGrid { axis, value: v });
        };
        let (lo, hi) = a.range();
        if v < lo || v > hi {
            return Err(Error::OutOfRange {
                axis,
                value: v,
                lo,
                hi,
            });
        }
        c *= form.eval(v);
    }
    Ok(c)
}

fn check_mu(grid: &ParameterGrid, mu: &[f64]) -> Result<()> {
    if mu.len() != grid.dim() {
        return Err(Error::AxisCount {
            expected: grid.dim(),
            got: mu.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AffineOperator {
    n: usize,
    grid: ParameterGrid,
    terms: Vec<AffineTerm<CscMatrix>>,
    pattern: SumPattern,
    spd: bool,
}

impl AffineOperator {
    pub fn new(grid: ParameterGrid, terms: Vec<AffineTerm<CscMatrix>>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument("operator needs at least one term".into()));
        };
        let n = first.value.n_rows();
        for t in &terms {
            if !t.value.is_square() {
                return Err(Error::NotSquare {
                    rows: t.value.n_rows(),
                    cols: t.value.n_cols(),
                });
            }
            if t.value.n_rows() != n {
                return Err(Error::dim("term matrix dimension", n, t.value.n_rows()));
            }
        }
        check_factors(&terms, &grid)?;
        let pattern = SumPattern::new(terms.iter().map(|t| &t.value))?;
        Ok(AffineOperator {
            n,
            grid,
            terms,
            pattern,
            spd: false,
        })
    }

    /// Declares A(μ) symmetric positive definite on the grid. Every term must be
    /// flagged symmetric; positivity is the caller's claim.
    pub fn with_spd(mut self, spd: bool) -> Result<Self> {
        if spd && !self.terms.iter().all(|t| t.value.is_symmetric()) {
            return Err(Error::InvalidArgument(
                "an SPD operator needs symmetric term matrices".into(),
            ));
        }
        self.spd = spd;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.grid.dim()
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn is_spd(&self) -> bool {
        self.spd
    }

    pub fn is_symmetric(&self) -> bool {
        self.terms.iter().all(|t| t.value.is_symmetric())
    }

    pub fn terms(&self) -> &[AffineTerm<CscMatrix>] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn pattern(&self) -> &SumPattern {
        &self.pattern
    }

    pub fn coefficients_at(&self, idx: &[usize]) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient_at(idx)).collect()
    }

    /// A(μ) at a grid multi-index.
    pub fn assemble_at(&self, idx: &[usize]) -> Result<CscMatrix> {
        self.grid.check_index(idx)?;
        Ok(self.pattern.combine(&self.coefficients_at(idx)))
    }

    /// A(μ) at parameter values; off-grid values need closed-form factors.
    pub fn assemble(&self, mu: &[f64]) -> Result<CscMatrix> {
        check_mu(&self.grid, mu)?;
        let c = self
            .terms
            .iter()
            .map(|t| coefficient_off_grid(t, &self.grid, mu))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.pattern.combine(&c))
    }

    /// y = A(μ) x without assembling.
    pub fn apply_at(&self, idx: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::dim("vector length", self.n, x.len()));
        }
        self.grid.check_index(idx)?;
        let mut y = vec![0.0; self.n];
        for t in &self.terms {
            let c = t.coefficient_at(idx);
            if c != 0.0 {
                t.value.mul_vec_acc(c, x, &mut y);
            }
        }
        Ok(y)
    }

    /// Y = A(μ) X for a block.
    pub fn apply_block_at(&self, idx: &[usize], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n {
            return Err(Error::dim("block rows", self.n, x.nrows()));
        }
        self.grid.check_index(idx)?;
        let mut y = DMatrix::zeros(self.n, x.ncols());
        for t in &self.terms {
            let c = t.coefficient_at(idx);
            if c != 0.0 {
                t.value.mul_block_acc(c, x, &mut y);
            }
        }
        Ok(y)
    }

    /// The operator μ ↦ A(μ)ᵀ with the same coefficients.
    pub fn transposed(&self) -> AffineOperator {
        if self.is_symmetric() {
            return self.clone();
        }
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|t| AffineTerm {
                value: t.value.transpose(),
                factors: t.factors.clone(),
            })
            .collect();
        let pattern = SumPattern::new(terms.iter().map(|t| &t.value)).expect("shapes already checked");
        AffineOperator {
            n: self.n,
            grid: self.grid.clone(),
            terms,
            pattern,
            spd: self.spd,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AffineRhs {
    n: usize,
    grid: ParameterGrid,
    terms: Vec<AffineTerm<Vec<f64>>>,
}

impl AffineRhs {
    pub fn new(grid: ParameterGrid, terms: Vec<AffineTerm<Vec<f64>>>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument("right-hand side needs at least one term".into()));
        };
        let n = first.value.len();
        for t in &terms {
            if t.value.len() != n {
                return Err(Error::dim("rhs term length", n, t.value.len()));
            }
        }
        check_factors(&terms, &grid)?;
        Ok(AffineRhs { n, grid, terms })
    }

    /// f(μ) = g, independent of μ.
    pub fn constant(grid: ParameterGrid, g: Vec<f64>) -> Result<Self> {
        let factors = grid.axes().iter().map(|a| AxisFactor::ones(a.len())).collect();
        AffineRhs::new(grid, vec![AffineTerm { value: g, factors }])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn terms(&self) -> &[AffineTerm<Vec<f64>>] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn eval_at(&self, idx: &[usize]) -> Result<Vec<f64>> {
        self.grid.check_index(idx)?;
        let mut out = vec![0.0; self.n];
        for t in &self.terms {
            let c = t.coefficient_at(idx);
            for (o, v) in out.iter_mut().zip(&t.value) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    pub fn eval(&self, mu: &[f64]) -> Result<Vec<f64>> {
        check_mu(&self.grid, mu)?;
        let mut out = vec![0.0; self.n];
        for t in &self.terms {
            let c = coefficient_off_grid(t, &self.grid, mu)?;
            for (o, v) in out.iter_mut().zip(&t.value) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}

/// Checks that an operator and right-hand side describe the same problem.
pub fn check_compatible(op: &AffineOperator, rhs: &AffineRhs) -> Result<()> {
    if op.n() != rhs.n() {
        return Err(Error::dim("rhs length", op.n(), rhs.n()));
    }
    if op.grid().sizes() != rhs.grid().sizes() {
        return Err(Error::AxisCount {
            expected: op.p(),
            got: rhs.grid().dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::grid::Axis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axis_grid(n: usize) -> ParameterGrid {
        ParameterGrid::new(vec![Axis::uniform("mu", 0.0, 2.0, n).unwrap()]).unwrap()
    }

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CscMatrix {
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < 0.4 {
                    trip.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        CscMatrix::from_triplets(n, n, &trip).unwrap()
    }

    #[test]
    fn two_term_operator_at_one() {
        let g = axis_grid(3);
        let pts = g.axis(0).points().to_vec();
        let a1 = CscMatrix::from_triplets(2, 2, &[(0, 0, 3.0), (1, 1, 5.0), (0, 1, 1.0)]).unwrap();
        let a2 = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
        let op = AffineOperator::new(
            g,
            vec![
                AffineTerm {
                    value: a1.clone(),
                    factors: vec![AxisFactor::closed(ClosedForm::Constant { value: 1.0 }, &pts)],
                },
                AffineTerm {
                    value: a2.clone(),
                    factors: vec![AxisFactor::closed(ClosedForm::Linear { a: 0.0, b: -1.0 }, &pts)],
                },
            ],
        )
        .unwrap();
        let a = op.assemble(&[1.0]).unwrap().to_dense();
        assert_eq!(a, a1.to_dense() - a2.to_dense());
        // off-grid but in range through the closed form
        let b = op.assemble(&[0.25]).unwrap().to_dense();
        assert_eq!(b, a1.to_dense() - a2.to_dense() * 0.25);
        assert!(matches!(op.assemble(&[3.0]), Err(Error::OutOfRange { .. })));
        assert!(matches!(op.assemble(&[1.0, 1.0]), Err(Error::AxisCount { .. })));
    }

    #[test]
    fn single_unit_term_is_unchanged_and_tables_reject_off_grid() {
        let g = axis_grid(4);
        let a = CscMatrix::identity(3);
        let op = AffineOperator::new(g, vec![AffineTerm { value: a.clone(), factors: vec![AxisFactor::ones(4)] }]).unwrap();
        for idx in 0..4 {
            assert_eq!(op.assemble_at(&[idx]).unwrap().to_dense(), a.to_dense());
        }
        assert!(matches!(op.assemble(&[0.1]), Err(Error::OffGrid { axis: 0, .. })));
    }

    #[test]
    fn random_three_term_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = ParameterGrid::new(vec![
            Axis::uniform("a", -1.0, 1.0, 4).unwrap(),
            Axis::uniform("b", 0.0, 3.0, 3).unwrap(),
        ])
        .unwrap();
        let terms: Vec<_> = (0..3)
            .map(|_| AffineTerm {
                value: random_matrix(5, &mut rng),
                factors: vec![
                    AxisFactor::table((0..4).map(|_| rng.random_range(-2.0..2.0)).collect()),
                    AxisFactor::table((0..3).map(|_| rng.random_range(-2.0..2.0)).collect()),
                ],
            })
            .collect();
        let op = AffineOperator::new(g.clone(), terms.clone()).unwrap();
        let idx = [2, 1];
        let mu = g.point(&idx);
        let mut dense = DMatrix::zeros(5, 5);
        for t in &terms {
            dense += t.value.to_dense() * (t.factors[0].values()[2] * t.factors[1].values()[1]);
        }
        let got = op.assemble(&mu).unwrap().to_dense();
        assert!((got - &dense).abs().max() <= 1e-13);
        let x: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
        let y = op.apply_at(&idx, &x).unwrap();
        let yd = &dense * nalgebra::DVector::from_vec(x);
        for i in 0..5 {
            assert!((y[i] - yd[i]).abs() < 1e-13);
        }
        let t = op.transposed().assemble_at(&idx).unwrap().to_dense();
        assert!((t - dense.transpose()).abs().max() <= 1e-13);
    }

    #[test]
    fn mismatched_terms_are_rejected() {
        let g = axis_grid(2);
        let bad = AffineOperator::new(
            g.clone(),
            vec![
                AffineTerm { value: CscMatrix::identity(2), factors: vec![AxisFactor::ones(2)] },
                AffineTerm { value: CscMatrix::identity(3), factors: vec![AxisFactor::ones(2)] },
            ],
        );
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
        let short = AffineOperator::new(
            g,
            vec![AffineTerm { value: CscMatrix::identity(2), factors: vec![AxisFactor::ones(1)] }],
        );
        assert!(short.is_err());
    }
}
