//! Karhunen–Loève modes of the squared-exponential covariance σ₀·exp(−(‖x−y‖/l₀)²)
//! on a rectangle.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::fem::Mesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub sigma0: f64,
    pub l0: f64,
}

impl Covariance {
    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        self.sigma0 * (-r2 / (self.l0 * self.l0)).exp()
    }
}

impl Default for Covariance {
    fn default() -> Self {
        Covariance { sigma0: 0.4, l0: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlMethod {
    /// Nodal quadrature of the kernel and a dense symmetric eigensolve.
    #[default]
    Dense,
    /// Tensor cosine modes with eigenvalues from the kernel's spectral density.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Nodal values on a structured (nx+1)×(ny+1) grid, column-major.
    Nodal { nx: usize, ny: usize, lengths: [f64; 2], values: Vec<f64> },
    Cosine { a: usize, b: usize, lengths: [f64; 2] },
}

/// Leading eigenpairs (σ_i, φ_i), φ_i normalized in L²(D).
#[derive(Debug, Clone, PartialEq)]
pub struct KlModes {
    pub sigma: Vec<f64>,
    shapes: Vec<Shape>,
    /// ∫ cov(x, x) dx = σ₀·|D|.
    pub trace: f64,
}

fn l2_scale(k: usize, l: f64) -> f64 {
    if k == 0 {
        (1.0 / l).sqrt()
    } else {
        (2.0 / l).sqrt()
    }
}

impl KlModes {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn trace_fraction(&self) -> f64 {
        self.sigma.iter().sum::<f64>() / self.trace
    }

    /// φ_i(x); bilinear interpolation of nodal values for the dense path.
    pub fn eval(&self, i: usize, x: [f64; 2]) -> f64 {
        match &self.shapes[i] {
            Shape::Cosine { a, b, lengths } => {
                let [lx, ly] = *lengths;
                l2_scale(*a, lx)
                    * l2_scale(*b, ly)
                    * (*a as f64 * std::f64::consts::PI * x[0] / lx).cos()
                    * (*b as f64 * std::f64::consts::PI * x[1] / ly).cos()
            }
            Shape::Nodal { nx, ny, lengths, values } => {
                let locate = |v: f64, len: f64, n: usize| {
                    let s = (v / len * n as f64).clamp(0.0, n as f64);
                    let k = (s.floor() as usize).min(n - 1);
                    (k, s - k as f64)
                };
                let (i0, tx) = locate(x[0], lengths[0], *nx);
                let (j0, ty) = locate(x[1], lengths[1], *ny);
                let at = |i: usize, j: usize| values[i * (ny + 1) + j];
                (1.0 - tx) * (1.0 - ty) * at(i0, j0)
                    + tx * (1.0 - ty) * at(i0 + 1, j0)
                    + tx * ty * at(i0 + 1, j0 + 1)
                    + (1.0 - tx) * ty * at(i0, j0 + 1)
            }
        }
    }

    /// log E(x; μ) = Σ_i μ_i √σ_i φ_i(x).
    pub fn log_field(&self, mu: &[f64], x: [f64; 2]) -> f64 {
        mu.iter()
            .enumerate()
            .map(|(i, &m)| m * self.sigma[i].sqrt() * self.eval(i, x))
            .sum()
    }
}

/// Trapezoidal nodal weights of the structured mesh.
fn nodal_weights(mesh: &Mesh) -> Vec<f64> {
    let s = mesh.spec();
    let area = s.lengths[0] * s.lengths[1] / (s.nx * s.ny) as f64;
    let mut w = vec![0.0; mesh.n_nodes()];
    for e in mesh.elements() {
        for n in e {
            w[n] += 0.25 * area;
        }
    }
    w
}

pub fn kl_modes(cov: &Covariance, mesh: &Mesh, p: usize, method: KlMethod) -> Result<KlModes> {
    if !(cov.sigma0 > 0.0 && cov.l0 > 0.0) {
        return Err(Error::InvalidArgument(format!("covariance parameters must be positive: {cov:?}")));
    }
    let s = mesh.spec();
    let trace = cov.sigma0 * s.lengths[0] * s.lengths[1];
    match method {
        KlMethod::Dense => {
            let n = mesh.n_nodes();
            if p > n {
                return Err(Error::InvalidArgument(format!("{p} modes requested from {n} nodes")));
            }
            let w = nodal_weights(mesh);
            let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let x: Vec<[f64; 2]> = (0..n).map(|k| mesh.coords(k)).collect();
            let b = DMatrix::from_fn(n, n, |i, j| sw[i] * cov.eval(x[i], x[j]) * sw[j]);
            let eig = SymmetricEigen::new(b);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let mut sigma = Vec::with_capacity(p);
            let mut shapes = Vec::with_capacity(p);
            for &k in order.iter().take(p) {
                let v = eig.eigenvectors.column(k);
                let mut phi: Vec<f64> = (0..n).map(|i| v[i] / sw[i]).collect();
                // Fix the sign: the entry of largest magnitude is positive.
                let big = phi.iter().copied().fold(0.0f64, |m, t| if t.abs() > m.abs() + 1e-12 { t } else { m });
                if big < 0.0 {
                    phi.iter_mut().for_each(|t| *t = -*t);
                }
                sigma.push(eig.eigenvalues[k].max(0.0));
                shapes.push(Shape::Nodal { nx: s.nx, ny: s.ny, lengths: s.lengths, values: phi });
            }
            Ok(KlModes { sigma, shapes, trace })
        }
        KlMethod::Cosine => {
            let [lx, ly] = s.lengths;
            let pi = std::f64::consts::PI;
            let density = |a: usize, b: usize| {
                let w2 = (a as f64 * pi / lx).powi(2) + (b as f64 * pi / ly).powi(2);
                cov.sigma0 * pi * cov.l0 * cov.l0 * (-cov.l0 * cov.l0 * w2 / 4.0).exp()
            };
            // Modes until the density falls below 1e-16 of its peak; their total is
            // rescaled to the kernel trace.
            let cut = |len: f64| ((len * 12.2 / (pi * cov.l0)).ceil() as usize).max(p);
            let mut cand: Vec<(f64, usize, usize)> = Vec::new();
            for a in 0..=cut(lx) {
                for b in 0..=cut(ly) {
                    cand.push((density(a, b), a, b));
                }
            }
            let total: f64 = cand.iter().map(|c| c.0).sum();
            cand.iter_mut().for_each(|c| c.0 *= trace / total);
            cand.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1 + x.2).cmp(&(y.1 + y.2))).then(x.1.cmp(&y.1)));
            cand.truncate(p);
            Ok(KlModes {
                sigma: cand.iter().map(|c| c.0).collect(),
                shapes: cand.iter().map(|&(_, a, b)| Shape::Cosine { a, b, lengths: s.lengths }).collect(),
                trace,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::fem::MeshSpec;

    fn mesh() -> Mesh {
        Mesh::new(MeshSpec::cantilever(24, 6, 10.0, 2.0)).unwrap()
    }

    #[test]
    fn dense_spectrum_is_ordered_and_captures_trace() {
        let m = mesh();
        let k = kl_modes(&Covariance::default(), &m, 20, KlMethod::Dense).unwrap();
        assert!(k.sigma.iter().all(|&s| s >= 0.0));
        assert!(k.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(k.trace_fraction() >= 0.99, "{}", k.trace_fraction());
        // Normalization in the discrete L² inner product.
        let w = nodal_weights(&m);
        for i in 0..3 {
            let norm: f64 = (0..m.n_nodes()).map(|n| w[n] * k.eval(i, m.coords(n)).powi(2)).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
        assert!(kl_modes(&Covariance::default(), &m, m.n_nodes() + 1, KlMethod::Dense).is_err());
    }

    #[test]
    fn sigma0_scales_eigenvalues() {
        let m = Mesh::new(MeshSpec::cantilever(8, 3, 4.0, 1.0)).unwrap();
        let a = kl_modes(&Covariance { sigma0: 0.4, l0: 2.0 }, &m, 5, KlMethod::Dense).unwrap();
        let b = kl_modes(&Covariance { sigma0: 0.8, l0: 2.0 }, &m, 5, KlMethod::Dense).unwrap();
        for i in 0..5 {
            assert!((b.sigma[i] - 2.0 * a.sigma[i]).abs() < 1e-12 * b.sigma[0]);
            if i < 3 {
                for n in 0..m.n_nodes() {
                    let x = m.coords(n);
                    assert!((a.eval(i, x) - b.eval(i, x)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn cosine_modes_decay_and_leading_mode_is_constant() {
        let m = mesh();
        let k = kl_modes(&Covariance::default(), &m, 20, KlMethod::Cosine).unwrap();
        assert!(k.sigma.windows(2).all(|w| w[0] >= w[1]));
        let c = k.eval(0, [1.0, 0.3]);
        assert!((c - 1.0 / 20f64.sqrt()).abs() < 1e-14);
        assert!((k.eval(0, [7.0, 1.9]) - c).abs() < 1e-14);
        let d = kl_modes(&Covariance::default(), &m, 1, KlMethod::Dense).unwrap();
        assert!((k.sigma[0] / d.sigma[0] - 1.0).abs() < 0.5, "{} vs {}", k.sigma[0], d.sigma[0]);
        assert!(k.trace_fraction() > 0.99 && k.trace_fraction() <= 1.0 + 1e-12);
    }

    #[test]
    fn nodal_interpolation_hits_nodes() {
        let m = Mesh::new(MeshSpec::cantilever(4, 2, 2.0, 1.0)).unwrap();
        let k = kl_modes(&Covariance::default(), &m, 2, KlMethod::Dense).unwrap();
        if let Shape::Nodal { values, .. } = &k.shapes[1] {
            for n in 0..m.n_nodes() {
                assert!((k.eval(1, m.coords(n)) - values[n]).abs() < 1e-14);
            }
        } else {
            panic!("dense path must give nodal modes");
        }
    }
}
