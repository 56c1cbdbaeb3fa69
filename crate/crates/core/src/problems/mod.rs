//! Benchmark problem generators and external problem loading.

pub mod elasticity;
pub mod external;
pub mod fem;
pub mod kl;
pub mod synthetic;

pub use elasticity::{build_harmonic_bar, build_highdim_elasticity, AnchorLattice, ElasticitySpec, HighDimField, YoungField};
pub use external::{export_problem, load_external, Manifest};
pub use fem::{Edge, Mesh, MeshSpec, Traction};
pub use kl::{kl_modes, Covariance, KlMethod, KlModes};
pub use synthetic::{random_affine, SyntheticSpec};

use crate::error::Result;
use crate::linalg::{AffineOperator, AffineRhs, Axis, GramPair};

/// An affine problem with the Gram matrix of its solution norm.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub op: AffineOperator,
    pub rhs: AffineRhs,
    pub gram: GramPair,
    pub mesh: Option<Mesh>,
}

/// Sizes of the two benchmark analogs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSizes {
    pub harmonic_mesh: [usize; 2],
    pub harmonic_points: usize,
    pub k2_range: [f64; 2],
    pub highdim_mesh: [usize; 2],
    pub modes: usize,
    pub quantiles: usize,
    pub anchors: [usize; 2],
    pub lengths: [f64; 2],
    pub kl_method: KlMethod,
}

impl Default for BenchmarkSizes {
    fn default() -> Self {
        BenchmarkSizes {
            harmonic_mesh: [49, 14],
            harmonic_points: 500,
            k2_range: [0.5, 1.2],
            highdim_mesh: [24, 6],
            modes: 20,
            quantiles: 50,
            anchors: [7, 4],
            lengths: [10.0, 2.0],
            kl_method: KlMethod::Dense,
        }
    }
}

/// Cantilever with E = 1, ν = 0.3 and k² on a uniform grid.
pub fn harmonic_default(s: &BenchmarkSizes) -> Result<Problem> {
    let axis = Axis::uniform("k2", s.k2_range[0], s.k2_range[1], s.harmonic_points)?;
    let spec = ElasticitySpec {
        nu: 0.3,
        young: YoungField::Constant { value: 1.0 },
    };
    let mesh = MeshSpec::cantilever(s.harmonic_mesh[0], s.harmonic_mesh[1], s.lengths[0], s.lengths[1]);
    build_harmonic_bar(&mesh, &spec, axis)
}

/// Cantilever with a lognormal modulus (σ₀ = 0.4, l₀ = 4) over normal-quantile axes.
pub fn highdim_default(s: &BenchmarkSizes) -> Result<(Problem, HighDimField)> {
    let spec = ElasticitySpec {
        nu: 0.3,
        young: YoungField::SeparableLog {
            covariance: Covariance::default(),
            modes: s.modes,
            method: s.kl_method,
            anchors: AnchorLattice {
                nx: s.anchors[0],
                ny: s.anchors[1],
            },
        },
    };
    let axes = (0..s.modes)
        .map(|i| Axis::normal_quantiles(format!("mu{}", i + 1), s.quantiles))
        .collect::<Result<Vec<_>>>()?;
    let mesh = MeshSpec::cantilever(s.highdim_mesh[0], s.highdim_mesh[1], s.lengths[0], s.lengths[1]);
    build_highdim_elasticity(&mesh, &spec, axes)
}
