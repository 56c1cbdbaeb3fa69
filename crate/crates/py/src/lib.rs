//! Python module `pyrandpgd`: problems, greedy solves, sketched error estimates
//! and the intertwined certification loop.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use randpgd::certify::{intertwined_solve, true_errors, IncrementMode, IntertwinedConfig, TruthCache};
use randpgd::pgd::io::{read_tensor, write_tensor, TensorMeta};
use randpgd::pgd::{dual_greedy_solve, greedy_solve, run_to_max_rank, CanonicalTensor, Formulation, GreedyConfig};
use randpgd::problems::{self, BenchmarkSizes, SyntheticSpec};
use randpgd::provenance::{hash_bytes, Provenance};
use randpgd::sketch::{fast_estimators, GaussianSketch, SigmaSpec, SizingMode};

fn err(e: randpgd::Error) -> PyErr {
    match e {
        randpgd::Error::InvalidArgument(_) | randpgd::Error::GridIndex { .. } | randpgd::Error::AxisCount { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn formulation(name: &str) -> PyResult<Formulation> {
    match name {
        "min_residual" => Ok(Formulation::MinResidual),
        "galerkin" => Ok(Formulation::Galerkin),
        _ => Err(PyValueError::new_err(format!("unknown formulation `{name}`"))),
    }
}

/// Canonical tensor Σ_m v_m ⊗ λ_m^1 ⊗ ... ⊗ λ_m^p.
#[pyclass(module = "pyrandpgd", frozen)]
struct Tensor {
    inner: CanonicalTensor,
}

#[pymethods]
impl Tensor {
    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes().to_vec()
    }

    /// The solution vector at a grid multi-index.
    fn evaluate(&self, index: Vec<usize>) -> PyResult<Vec<f64>> {
        self.inner.evaluate_vec(&index).map_err(err)
    }

    fn truncated(&self, rank: usize) -> Tensor {
        Tensor { inner: self.inner.truncated(rank) }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let prov = Provenance::new(hash_bytes(b"python"), None);
        write_tensor(path.as_ref(), &self.inner, &TensorMeta::describe(&self.inner, prov)).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Tensor> {
        Ok(Tensor { inner: read_tensor(path.as_ref()).map_err(err)?.0 })
    }

    fn __repr__(&self) -> String {
        format!("Tensor(n={}, sizes={:?}, rank={})", self.inner.n(), self.inner.sizes(), self.inner.rank())
    }
}

/// A parametrized linear problem A(μ)u(μ) = f(μ) on a tensor grid.
#[pyclass(module = "pyrandpgd", frozen)]
struct Problem {
    inner: problems::Problem,
}

#[pymethods]
impl Problem {
    /// Cantilever under harmonic loading, one frequency parameter.
    #[staticmethod]
    #[pyo3(signature = (mesh = (49, 14), points = 500))]
    fn harmonic(mesh: (usize, usize), points: usize) -> PyResult<Problem> {
        let sizes = BenchmarkSizes { harmonic_mesh: [mesh.0, mesh.1], harmonic_points: points, ..Default::default() };
        Ok(Problem { inner: problems::harmonic_default(&sizes).map_err(err)? })
    }

    /// Plane elasticity with a log-normal Young field in `modes` parameters.
    #[staticmethod]
    #[pyo3(signature = (mesh = (24, 6), modes = 20, quantiles = 50))]
    fn highdim(mesh: (usize, usize), modes: usize, quantiles: usize) -> PyResult<Problem> {
        let sizes = BenchmarkSizes { highdim_mesh: [mesh.0, mesh.1], modes, quantiles, ..Default::default() };
        Ok(Problem { inner: problems::highdim_default(&sizes).map_err(err)?.0 })
    }

    #[staticmethod]
    #[pyo3(signature = (n = 30, axis_sizes = vec![8, 6], spd = false, seed = 0))]
    fn synthetic(n: usize, axis_sizes: Vec<usize>, spd: bool, seed: u64) -> PyResult<Problem> {
        let (op, rhs, gram) =
            problems::random_affine(&SyntheticSpec { n, axis_sizes, spd, seed, ..Default::default() }).map_err(err)?;
        Ok(Problem { inner: problems::Problem { name: "synthetic".into(), op, rhs, gram, mesh: None } })
    }

    /// Loads a problem written by `randpgd export`.
    #[staticmethod]
    fn load(manifest: &str) -> PyResult<Problem> {
        Ok(Problem { inner: problems::load_external(manifest.as_ref()).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.op.n()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.op.grid().sizes()
    }

    /// Parameter values at a grid multi-index.
    fn parameters(&self, index: Vec<usize>) -> PyResult<Vec<f64>> {
        self.inner.op.grid().check_index(&index).map_err(err)?;
        Ok(self.inner.op.grid().point(&index))
    }

    /// Direct sparse solve at one grid point.
    fn direct(&self, index: Vec<usize>) -> PyResult<Vec<f64>> {
        let sols = TruthCache::in_memory().solutions(&self.inner.op, &self.inner.rhs, &[index]).map_err(err)?;
        Ok(sols.into_iter().next().unwrap())
    }

    #[pyo3(signature = (rank, seed = 0, formulation = "min_residual"))]
    fn solve(&self, rank: usize, seed: u64, formulation: &str) -> PyResult<Tensor> {
        let cfg = GreedyConfig { max_rank: rank, seed, formulation: self::formulation(formulation)?, ..Default::default() };
        let run = greedy_solve(&self.inner.op, &self.inner.rhs, cfg, run_to_max_rank).map_err(err)?;
        Ok(Tensor { inner: run.tensor })
    }

    /// Relative errors ‖u − ũ‖_X / ‖u‖_X at `points` (default: the whole grid).
    #[pyo3(signature = (tensor, points = None))]
    fn true_errors<'py>(&self, py: Python<'py>, tensor: &Tensor, points: Option<Vec<Vec<usize>>>) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner;
        let pts = points.unwrap_or_else(|| p.op.grid().iter().collect());
        let sols = TruthCache::in_memory().solutions(&p.op, &p.rhs, &pts).map_err(err)?;
        let e = true_errors(&sols, &tensor.inner, &p.gram, &pts).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("per_point", e.per_point)?;
        d.set_item("rms_rel", e.rms_rel)?;
        Ok(d)
    }

    /// Sketched relative error estimates with K samples and a rank-L dual.
    #[pyo3(signature = (tensor, k, l, seed = 0, points = 10_000))]
    fn estimate<'py>(&self, py: Python<'py>, tensor: &Tensor, k: usize, l: usize, seed: u64, points: usize) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner;
        let sigma = SigmaSpec::GramNatural(p.gram.clone()).prepare().map_err(err)?;
        let sk = GaussianSketch::draw(&sigma, k, seed).map_err(err)?;
        let dual_cfg = GreedyConfig { max_rank: l, seed: seed.wrapping_add(1), ..Default::default() };
        let y = dual_greedy_solve(&p.op.transposed(), sk.z_block(), dual_cfg, run_to_max_rank).map_err(err)?.tensor;
        let pts = p.op.grid().evaluation_set(points, seed);
        let b = fast_estimators(&p.op, &p.rhs, &tensor.inner, &y, &sk, &pts).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("points", pts)?;
        d.set_item("delta", b.points.iter().map(|q| q.delta).collect::<Vec<_>>())?;
        d.set_item("delta_rel", b.points.iter().map(|q| q.delta_rel).collect::<Vec<_>>())?;
        d.set_item("rms", b.rms)?;
        d.set_item("rms_rel", b.rms_rel)?;
        Ok(d)
    }

    /// Intertwined construction; returns the primal tensor and a summary.
    #[pyo3(signature = (tol, k = None, m_max = 20, alpha = 2.0, k_lag = 6, l_max = None, increment = "minus", seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn certify<'py>(
        &self,
        py: Python<'py>,
        tol: f64,
        k: Option<usize>,
        m_max: usize,
        alpha: f64,
        k_lag: usize,
        l_max: Option<usize>,
        increment: &str,
        seed: u64,
    ) -> PyResult<(Tensor, Bound<'py, PyDict>)> {
        let increment = match increment {
            "minus" => IncrementMode::Minus,
            "plus" => IncrementMode::Plus,
            _ => return Err(PyValueError::new_err(format!("unknown increment `{increment}`"))),
        };
        let cfg = IntertwinedConfig { tol, k_override: k, m_max, alpha, k_lag, l_max, increment, seed, ..Default::default() };
        let sigma = SigmaSpec::GramNatural(self.inner.gram.clone()).prepare().map_err(err)?;
        let r = intertwined_solve(&self.inner.op, &self.inner.rhs, &sigma, &cfg).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("k", r.k)?;
        d.set_item("estimate", r.estimate)?;
        d.set_item("converged", r.estimate <= tol)?;
        d.set_item("m", r.history.iter().map(|h| h.m).collect::<Vec<_>>())?;
        d.set_item("l", r.history.iter().map(|h| h.l).collect::<Vec<_>>())?;
        d.set_item("estimates", r.history.iter().map(|h| h.estimate).collect::<Vec<_>>())?;
        Ok((Tensor { inner: r.primal }, d))
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, n={}, sizes={:?})", self.inner.name, self.inner.op.n(), self.inner.op.grid().sizes())
    }
}

/// Sketch size K for failure probability `delta`, factor `w` and `cardinality` points.
#[pyfunction]
#[pyo3(signature = (delta, w, cardinality, mode = "absolute"))]
fn sample_size(delta: f64, w: f64, cardinality: f64, mode: &str) -> PyResult<usize> {
    let mode = match mode {
        "absolute" => SizingMode::Absolute,
        "relative" => SizingMode::Relative,
        _ => return Err(PyValueError::new_err(format!("unknown mode `{mode}`"))),
    };
    randpgd::sketch::sample_size(delta, w, cardinality, mode, None).map_err(err)
}

#[pymodule]
fn pyrandpgd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Tensor>()?;
    m.add_function(wrap_pyfunction!(sample_size, m)?)?;
    Ok(())
}
