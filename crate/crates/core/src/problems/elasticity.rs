//! Plane-stress benchmark problems on a clamped rectangle: the time-harmonic bar
//! A(k²) = A₁ − k²A₂ and the lognormal-modulus problem with a product-form
//! affine decomposition over anchor points.

use serde::{Deserialize, Serialize};

use super::fem::{Mesh, MeshSpec};
use super::kl::{kl_modes, Covariance, KlMethod, KlModes};
use super::Problem;
use crate::error::{Error, Result};
use crate::linalg::{AffineOperator, AffineRhs, AffineTerm, Axis, AxisFactor, ClosedForm, CscMatrix, GramPair, ParameterGrid};

/// Bilinear partition of unity over an `nx`×`ny` lattice of anchor points
/// spanning the domain. Anchor j = a·ny + b sits at lattice node (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorLattice {
    pub nx: usize,
    pub ny: usize,
}

impl AnchorLattice {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "anchor lattice {}x{} gives non-positive partition weights; need at least 2x2",
                self.nx, self.ny
            )));
        }
        Ok(())
    }

    pub fn anchor(&self, j: usize, lengths: [f64; 2]) -> [f64; 2] {
        let (a, b) = (j / self.ny, j % self.ny);
        [
            lengths[0] * a as f64 / (self.nx - 1) as f64,
            lengths[1] * b as f64 / (self.ny - 1) as f64,
        ]
    }

    /// Hat-function weight of anchor j at x.
    pub fn weight(&self, j: usize, lengths: [f64; 2], x: [f64; 2]) -> f64 {
        let (a, b) = (j / self.ny, j % self.ny);
        let hat = |v: f64, len: f64, n: usize, k: usize| {
            let h = len / (n - 1) as f64;
            (1.0 - (v - k as f64 * h).abs() / h).max(0.0)
        };
        hat(x[0], lengths[0], self.nx, a) * hat(x[1], lengths[1], self.ny, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YoungField {
    Constant { value: f64 },
    /// E(x; μ) = exp(Σ_i μ_i √σ_i φ_i(x)) interpolated over anchor points.
    SeparableLog {
        covariance: Covariance,
        modes: usize,
        method: KlMethod,
        anchors: AnchorLattice,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticitySpec {
    pub nu: f64,
    pub young: YoungField,
}

impl ElasticitySpec {
    fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(Error::InvalidArgument(format!("Poisson ratio {} not in (0, 0.5)", self.nu)));
        }
        Ok(())
    }
}

/// A(μ) = A₁ − μ A₂ with a fixed right-hand side.
pub fn harmonic_operator(a1: CscMatrix, a2: CscMatrix, f: Vec<f64>, axis: Axis) -> Result<(AffineOperator, AffineRhs)> {
    let pts = axis.points().to_vec();
    let grid = ParameterGrid::new(vec![axis])?;
    let op = AffineOperator::new(
        grid.clone(),
        vec![
            AffineTerm { value: a1, factors: vec![AxisFactor::closed(ClosedForm::Constant { value: 1.0 }, &pts)] },
            AffineTerm { value: a2, factors: vec![AxisFactor::closed(ClosedForm::Linear { a: 0.0, b: -1.0 }, &pts)] },
        ],
    )?;
    let rhs = AffineRhs::constant(grid, f)?;
    Ok((op, rhs))
}

pub fn build_harmonic_bar(mesh: &MeshSpec, spec: &ElasticitySpec, axis: Axis) -> Result<Problem> {
    spec.validate()?;
    let YoungField::Constant { value: e } = spec.young else {
        return Err(Error::InvalidArgument("harmonic problem needs a constant Young's modulus".into()));
    };
    let mesh = Mesh::new(mesh.clone())?;
    let a1 = mesh.stiffness(spec.nu, |_| e, true)?;
    let a2 = mesh.mass(true)?;
    let (op, rhs) = harmonic_operator(a1, a2, mesh.load_vector(true), axis)?;
    let gram = GramPair::new(mesh.h1_gram(true)?)?;
    Ok(Problem {
        name: "harmonic".into(),
        op,
        rhs,
        gram,
        mesh: Some(mesh),
    })
}

/// Operator, field data and the anchor interpolation used to build it.
#[derive(Debug, Clone)]
pub struct HighDimField {
    pub modes: KlModes,
    pub anchors: AnchorLattice,
    pub lengths: [f64; 2],
}

impl HighDimField {
    pub fn exact(&self, mu: &[f64], x: [f64; 2]) -> f64 {
        self.modes.log_field(mu, x).exp()
    }

    /// Σ_j w_j(x) E(x^j; μ).
    pub fn interpolated(&self, mu: &[f64], x: [f64; 2]) -> f64 {
        (0..self.anchors.len())
            .map(|j| self.anchors.weight(j, self.lengths, x) * self.exact(mu, self.anchors.anchor(j, self.lengths)))
            .sum()
    }
}

pub fn build_highdim_elasticity(mesh: &MeshSpec, spec: &ElasticitySpec, axes: Vec<Axis>) -> Result<(Problem, HighDimField)> {
    spec.validate()?;
    let YoungField::SeparableLog { covariance, modes, method, anchors } = spec.young.clone() else {
        return Err(Error::InvalidArgument("high-dimensional problem needs a separable-log Young's field".into()));
    };
    if modes != axes.len() {
        return Err(Error::AxisCount { expected: modes, got: axes.len() });
    }
    anchors.validate()?;
    let mesh = Mesh::new(mesh.clone())?;
    let lengths = mesh.spec().lengths;
    let kl = kl_modes(&covariance, &mesh, modes, method)?;
    let grid = ParameterGrid::new(axes)?;

    let mut terms = Vec::with_capacity(anchors.len());
    for j in 0..anchors.len() {
        let xj = anchors.anchor(j, lengths);
        let value = mesh.stiffness(spec.nu, |x| anchors.weight(j, lengths, x), true)?;
        let factors = grid
            .axes()
            .iter()
            .enumerate()
            .map(|(i, a)| AxisFactor::closed(ClosedForm::Exp { rate: kl.sigma[i].sqrt() * kl.eval(i, xj) }, a.points()))
            .collect();
        terms.push(AffineTerm { value, factors });
    }
    let op = AffineOperator::new(grid.clone(), terms)?.with_spd(true)?;
    let rhs = AffineRhs::constant(grid, mesh.load_vector(true))?;
    let gram = GramPair::new(mesh.h1_gram(true)?)?;
    let field = HighDimField { modes: kl, anchors, lengths };
    Ok((
        Problem {
            name: "highdim".into(),
            op,
            rhs,
            gram,
            mesh: Some(mesh),
        },
        field,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::DirectSolver;
    use crate::linalg::{factorize, FactorKind};

    fn small_highdim(p: usize, method: KlMethod) -> (Problem, HighDimField) {
        let spec = ElasticitySpec {
            nu: 0.3,
            young: YoungField::SeparableLog {
                covariance: Covariance::default(),
                modes: p,
                method,
                anchors: AnchorLattice { nx: 7, ny: 4 },
            },
        };
        let axes = (0..p).map(|i| Axis::normal_quantiles(format!("mu{i}"), 50).unwrap()).collect();
        build_highdim_elasticity(&MeshSpec::cantilever(24, 6, 10.0, 2.0), &spec, axes).unwrap()
    }

    #[test]
    fn one_dof_resonance() {
        let a1 = CscMatrix::from_triplets(1, 1, &[(0, 0, 3.0)]).unwrap().into_symmetric().unwrap();
        let a2 = CscMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]).unwrap().into_symmetric().unwrap();
        let axis = Axis::from_points("k2", vec![0.5, 1.5, 2.0]).unwrap();
        let (op, rhs) = harmonic_operator(a1, a2, vec![1.0], axis).unwrap();
        let solver = DirectSolver::new(&op);
        assert!((solver.solve(&rhs, &[0]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!(matches!(solver.solve(&rhs, &[1]), Err(Error::SingularAt { .. })));
        assert!((op.assemble(&[1.2]).unwrap().get(0, 0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn harmonic_bar_sizes_and_structure() {
        let axis = Axis::uniform("k2", 0.5, 1.2, 500).unwrap();
        let spec = ElasticitySpec { nu: 0.3, young: YoungField::Constant { value: 1.0 } };
        let p = build_harmonic_bar(&MeshSpec::cantilever(49, 14, 10.0, 2.0), &spec, axis).unwrap();
        assert_eq!(p.op.n(), 1470);
        assert_eq!(p.op.grid().len(), Some(500));
        assert!(p.op.is_symmetric());
        let pts = p.op.grid().axis(0).points();
        assert_eq!(pts[0], 0.5);
        assert_eq!(pts[499], 1.2);
        assert!((pts[1] - pts[0] - 0.7 / 499.0).abs() < 1e-15);
        let bad = ElasticitySpec { nu: 0.5, ..spec.clone() };
        assert!(build_harmonic_bar(&MeshSpec::cantilever(4, 2, 1.0, 1.0), &bad, Axis::uniform("k2", 0.5, 1.2, 3).unwrap()).is_err());
        let mut degenerate = MeshSpec::cantilever(4, 2, 1.0, 1.0);
        degenerate.ny = 1;
        assert!(build_harmonic_bar(&degenerate, &spec, Axis::uniform("k2", 0.5, 1.2, 3).unwrap()).is_err());
    }

    #[test]
    fn single_anchor_constant_mode_is_rank_one() {
        // p = 1 with the constant cosine mode: every anchor factor is the same exponential.
        let (p, field) = small_highdim(1, KlMethod::Cosine);
        let rate = field.modes.sigma[0].sqrt() * field.modes.eval(0, [0.0, 0.0]);
        for t in p.op.terms() {
            match t.factors[0].closed_form() {
                Some(ClosedForm::Exp { rate: r }) => assert!((r - rate).abs() < 1e-14),
                other => panic!("unexpected factor {other:?}"),
            }
        }
        let mesh = p.mesh.as_ref().unwrap();
        let k1 = mesh.stiffness(0.3, |_| 1.0, true).unwrap();
        let mu = p.op.grid().point(&[7]);
        let a = p.op.assemble_at(&[7]).unwrap().to_dense();
        let want = k1.to_dense() * (rate * mu[0]).exp();
        assert!((a - &want).amax() <= 1e-12 * want.amax());
    }

    #[test]
    fn highdim_grid_and_spd() {
        let (p, _) = small_highdim(20, KlMethod::Dense);
        assert_eq!(p.op.n_terms(), 28);
        assert!(p.op.is_spd());
        let card = p.op.grid().cardinality();
        assert_eq!(card.exact, Some(50u128.pow(20)));
        assert_eq!(p.op.grid().len(), None);
        for idx in p.op.grid().sample(20, 3) {
            factorize(&p.op.assemble_at(&idx).unwrap(), FactorKind::Cholesky).unwrap();
        }
    }

    #[test]
    fn anchor_interpolation_reproduces_field() {
        let (p, field) = small_highdim(20, KlMethod::Dense);
        let fine: Vec<[f64; 2]> = (0..=100).flat_map(|i| (0..=20).map(move |j| [0.1 * i as f64, 0.1 * j as f64])).collect();
        for idx in p.op.grid().sample(10, 11) {
            let mu = p.op.grid().point(&idx);
            let (mut num, mut den) = (0.0, 0.0);
            for &x in &fine {
                let e = field.exact(&mu, x);
                num += (field.interpolated(&mu, x) - e).powi(2);
                den += e * e;
            }
            assert!((num / den).sqrt() < 0.05, "{}", (num / den).sqrt());
        }
        // The weights form a partition of unity.
        for &x in fine.iter().step_by(37) {
            let s: f64 = (0..28).map(|j| field.anchors.weight(j, field.lengths, x)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
}
