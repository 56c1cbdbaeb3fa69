//! Bilinear quadrilateral plane-stress elements on a structured rectangle.
//!
//! Nodes are numbered column by column: node (i, j) with 0 ≤ i ≤ nx along x and
//! 0 ≤ j ≤ ny along y has index i·(ny+1) + j, and owns DOFs 2·node (x) and
//! 2·node + 1 (y).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traction {
    pub edge: Edge,
    /// Unit direction is not enforced; the force density is `magnitude · direction`.
    pub direction: [f64; 2],
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub lengths: [f64; 2],
    pub clamped: Vec<Edge>,
    pub load: Traction,
}

impl MeshSpec {
    /// Cantilever: left edge clamped, unit downward traction on the right edge.
    pub fn cantilever(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        MeshSpec {
            nx,
            ny,
            lengths: [lx, ly],
            clamped: vec![Edge::Left],
            load: Traction {
                edge: Edge::Right,
                direction: [0.0, -1.0],
                magnitude: 1.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "degenerate mesh: need nx, ny >= 2, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lengths[0] > 0.0 && self.lengths[1] > 0.0) || !self.lengths.iter().all(|l| l.is_finite()) {
            return Err(Error::InvalidArgument(format!("degenerate mesh extents {:?}", self.lengths)));
        }
        if self.clamped.is_empty() {
            return Err(Error::InvalidArgument("at least one clamped edge is required".into()));
        }
        Ok(())
    }
}

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const REF: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

fn shape(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut d = [[0.0; 2]; 4];
    for (a, &(xa, ya)) in REF.iter().enumerate() {
        n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta);
        d[a] = [0.25 * xa * (1.0 + ya * eta), 0.25 * ya * (1.0 + xa * xi)];
    }
    (n, d)
}

/// Values at one quadrature point of one element.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: [f64; 2],
    pub n: [f64; 4],
    /// Physical gradients of the four shape functions.
    pub grad: [[f64; 2]; 4],
    /// Jacobian determinant times the Gauss weight.
    pub weight: f64,
}

/// 2×2 Gauss rule on a quadrilateral with corners `xy` in counterclockwise order.
pub fn quad_points(xy: &[[f64; 2]; 4]) -> Result<[QuadPoint; 4]> {
    let mut out = [QuadPoint {
        x: [0.0; 2],
        n: [0.0; 4],
        grad: [[0.0; 2]; 4],
        weight: 0.0,
    }; 4];
    let mut k = 0;
    for &eta in &GAUSS {
        for &xi in &GAUSS {
            let (n, d) = shape(xi, eta);
            let mut j = [[0.0; 2]; 2];
            let mut x = [0.0; 2];
            for a in 0..4 {
                for r in 0..2 {
                    x[r] += n[a] * xy[a][r];
                    for c in 0..2 {
                        j[r][c] += d[a][c] * xy[a][r];
                    }
                }
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(Error::InvalidArgument(format!("element with non-positive Jacobian {det}")));
            }
            // ∇_x N = J^{-T} ∇_ξ N
            let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
            let mut grad = [[0.0; 2]; 4];
            for a in 0..4 {
                grad[a][0] = inv[0][0] * d[a][0] + inv[1][0] * d[a][1];
                grad[a][1] = inv[0][1] * d[a][0] + inv[1][1] * d[a][1];
            }
            out[k] = QuadPoint { x, n, grad, weight: det };
            k += 1;
        }
    }
    Ok(out)
}

/// Plane-stress elasticity matrix acting on (ε_xx, ε_yy, γ_xy).
pub fn plane_stress(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e / (1.0 - nu * nu);
    [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * 0.5 * (1.0 - nu)]]
}

fn strain_rows(g: &[f64; 2]) -> [[f64; 2]; 3] {
    [[g[0], 0.0], [0.0, g[1]], [g[1], g[0]]]
}

/// Element stiffness (8×8, DOFs ordered node-major) with Young's modulus `e(x)`
/// sampled at the quadrature points.
pub fn element_stiffness(qp: &[QuadPoint; 4], nu: f64, e: impl Fn([f64; 2]) -> f64) -> [[f64; 8]; 8] {
    let mut k = [[0.0; 8]; 8];
    for q in qp {
        let d = plane_stress(e(q.x), nu);
        for a in 0..4 {
            let ba = strain_rows(&q.grad[a]);
            for b in 0..4 {
                let bb = strain_rows(&q.grad[b]);
                for r in 0..2 {
                    for c in 0..2 {
                        let mut s = 0.0;
                        for i in 0..3 {
                            for j in 0..3 {
                                s += ba[i][r] * d[i][j] * bb[j][c];
                            }
                        }
                        k[2 * a + r][2 * b + c] += s * q.weight;
                    }
                }
            }
        }
    }
    k
}

/// Scalar mass and Laplacian element matrices (4×4).
pub fn element_scalar(qp: &[QuadPoint; 4]) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let mut m = [[0.0; 4]; 4];
    let mut l = [[0.0; 4]; 4];
    for q in qp {
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += q.n[a] * q.n[b] * q.weight;
                l[a][b] += (q.grad[a][0] * q.grad[b][0] + q.grad[a][1] * q.grad[b][1]) * q.weight;
            }
        }
    }
    (m, l)
}

/// Structured mesh with its clamped-DOF elimination map.
#[derive(Debug, Clone)]
pub struct Mesh {
    spec: MeshSpec,
    free: Vec<usize>,
    /// Full DOF → free index.
    to_free: Vec<Option<usize>>,
}

impl Mesh {
    pub fn new(spec: MeshSpec) -> Result<Self> {
        spec.validate()?;
        let mut mesh = Mesh {
            spec,
            free: Vec::new(),
            to_free: Vec::new(),
        };
        let mut clamped = vec![false; mesh.n_dofs()];
        for &edge in &mesh.spec.clamped {
            for node in mesh.edge_nodes(edge) {
                clamped[2 * node] = true;
                clamped[2 * node + 1] = true;
            }
        }
        mesh.to_free = vec![None; mesh.n_dofs()];
        for (d, &c) in clamped.iter().enumerate() {
            if !c {
                mesh.to_free[d] = Some(mesh.free.len());
                mesh.free.push(d);
            }
        }
        Ok(mesh)
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn n_nodes(&self) -> usize {
        (self.spec.nx + 1) * (self.spec.ny + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * (self.spec.ny + 1) + j
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = (node / (self.spec.ny + 1), node % (self.spec.ny + 1));
        [
            self.spec.lengths[0] * i as f64 / self.spec.nx as f64,
            self.spec.lengths[1] * j as f64 / self.spec.ny as f64,
        ]
    }

    pub fn edge_nodes(&self, edge: Edge) -> Vec<usize> {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        match edge {
            Edge::Left => (0..=ny).map(|j| self.node(0, j)).collect(),
            Edge::Right => (0..=ny).map(|j| self.node(nx, j)).collect(),
            Edge::Bottom => (0..=nx).map(|i| self.node(i, 0)).collect(),
            Edge::Top => (0..=nx).map(|i| self.node(i, ny)).collect(),
        }
    }

    /// Element (i, j) corner nodes, counterclockwise from the lower left.
    pub fn element_nodes(&self, i: usize, j: usize) -> [usize; 4] {
        [self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1)]
    }

    pub fn elements(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        (0..self.spec.nx).flat_map(move |i| (0..self.spec.ny).map(move |j| self.element_nodes(i, j)))
    }

    fn element_qp(&self, nodes: &[usize; 4]) -> Result<[QuadPoint; 4]> {
        let xy = nodes.map(|n| self.coords(n));
        quad_points(&xy)
    }

    fn scatter(&self, trip: &mut Vec<(usize, usize, f64)>, nodes: &[usize; 4], ke: &[[f64; 8]; 8], free_only: bool) {
        let dofs: Vec<usize> = nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        for (a, &da) in dofs.iter().enumerate() {
            for (b, &db) in dofs.iter().enumerate() {
                if free_only {
                    if let (Some(fa), Some(fb)) = (self.to_free[da], self.to_free[db]) {
                        trip.push((fa, fb, ke[a][b]));
                    }
                } else {
                    trip.push((da, db, ke[a][b]));
                }
            }
        }
    }

    fn assemble(&self, free_only: bool, elem: impl Fn(&[QuadPoint; 4]) -> [[f64; 8]; 8]) -> Result<CscMatrix> {
        let n = if free_only { self.n_free() } else { self.n_dofs() };
        let mut trip = Vec::with_capacity(64 * self.spec.nx * self.spec.ny);
        for nodes in self.elements() {
            let qp = self.element_qp(&nodes)?;
            self.scatter(&mut trip, &nodes, &elem(&qp), free_only);
        }
        let m = CscMatrix::from_triplets(n, n, &trip)?;
        symmetrize(m)
    }

    /// Stiffness with Young's field `e` on free DOFs (or all DOFs).
    pub fn stiffness(&self, nu: f64, e: impl Fn([f64; 2]) -> f64, free_only: bool) -> Result<CscMatrix> {
        if !(nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!("Poisson ratio {nu} not in (0, 0.5)")));
        }
        self.assemble(free_only, |qp| element_stiffness(qp, nu, &e))
    }

    /// Vector mass matrix ∫ ψ_i·ψ_j.
    pub fn mass(&self, free_only: bool) -> Result<CscMatrix> {
        self.assemble(free_only, |qp| expand_scalar(&element_scalar(qp).0))
    }

    /// H¹ Gram ∫ ∇ψ_i:∇ψ_j + ψ_i·ψ_j.
    pub fn h1_gram(&self, free_only: bool) -> Result<CscMatrix> {
        self.assemble(free_only, |qp| {
            let (m, l) = element_scalar(qp);
            let mut s = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    s[a][b] = m[a][b] + l[a][b];
                }
            }
            expand_scalar(&s)
        })
    }

    /// Consistent nodal forces of the edge traction.
    pub fn load_vector(&self, free_only: bool) -> Vec<f64> {
        let t = &self.spec.load;
        let nodes = self.edge_nodes(t.edge);
        let mut f = vec![0.0; self.n_dofs()];
        for w in nodes.windows(2) {
            let (a, b) = (self.coords(w[0]), self.coords(w[1]));
            let h = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            for &n in w {
                for c in 0..2 {
                    f[2 * n + c] += 0.5 * h * t.magnitude * t.direction[c];
                }
            }
        }
        if free_only {
            self.restrict_vec(&f)
        } else {
            f
        }
    }

    pub fn restrict_vec(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Full displacement vector with zeros on clamped DOFs.
    pub fn extend_vec(&self, free: &[f64]) -> Result<Vec<f64>> {
        if free.len() != self.n_free() {
            return Err(Error::dim("free displacement", self.n_free(), free.len()));
        }
        let mut full = vec![0.0; self.n_dofs()];
        for (&d, &v) in self.free.iter().zip(free) {
            full[d] = v;
        }
        Ok(full)
    }

    /// Stresses (σ_xx, σ_yy, σ_xy) at the four Gauss points of element (i, j).
    pub fn element_stress(&self, i: usize, j: usize, nu: f64, e: f64, u_full: &[f64]) -> Result<[[f64; 3]; 4]> {
        let nodes = self.element_nodes(i, j);
        let qp = self.element_qp(&nodes)?;
        let d = plane_stress(e, nu);
        let mut out = [[0.0; 3]; 4];
        for (k, q) in qp.iter().enumerate() {
            let mut eps = [0.0; 3];
            for (a, &n) in nodes.iter().enumerate() {
                let b = strain_rows(&q.grad[a]);
                for r in 0..3 {
                    eps[r] += b[r][0] * u_full[2 * n] + b[r][1] * u_full[2 * n + 1];
                }
            }
            for r in 0..3 {
                out[k][r] = (0..3).map(|c| d[r][c] * eps[c]).sum();
            }
        }
        Ok(out)
    }
}

fn expand_scalar(s: &[[f64; 4]; 4]) -> [[f64; 8]; 8] {
    let mut k = [[0.0; 8]; 8];
    for a in 0..4 {
        for b in 0..4 {
            k[2 * a][2 * b] = s[a][b];
            k[2 * a + 1][2 * b + 1] = s[a][b];
        }
    }
    k
}

/// Averages with the transpose to remove rounding asymmetry, then flags symmetric.
fn symmetrize(m: CscMatrix) -> Result<CscMatrix> {
    let t = m.transpose();
    let trip: Vec<_> = m.iter().map(|(i, j, v)| (i, j, 0.5 * v)).chain(t.iter().map(|(i, j, v)| (i, j, 0.5 * v))).collect();
    CscMatrix::from_triplets(m.n_rows(), m.n_cols(), &trip)?.into_symmetric()
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn unit_element_scalar_matrices() {
        let (m, l) = element_scalar(&quad_points(&UNIT).unwrap());
        let m_ref = [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]];
        let l_ref = [[4.0, -1.0, -2.0, -1.0], [-1.0, 4.0, -1.0, -2.0], [-2.0, -1.0, 4.0, -1.0], [-1.0, -2.0, -1.0, 4.0]];
        for a in 0..4 {
            for b in 0..4 {
                assert!((m[a][b] - m_ref[a][b] / 36.0).abs() < 1e-15);
                assert!((l[a][b] - l_ref[a][b] / 6.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unit_element_stiffness_entries() {
        let nu = 0.3;
        let k = element_stiffness(&quad_points(&UNIT).unwrap(), nu, |_| 1.0);
        let c = 1.0 / (1.0 - nu * nu);
        // K[0][0] = c·(1/3 + (1-ν)/2·1/3) for the unit square.
        assert!((k[0][0] - c * (1.0 / 3.0 + 0.5 * (1.0 - nu) / 3.0)).abs() < 1e-14);
        // K[0][1] = c·(ν/4 + (1-ν)/2·1/4)
        assert!((k[0][1] - c * (nu / 4.0 + 0.5 * (1.0 - nu) / 4.0)).abs() < 1e-14);
        let rigid = [
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 1.0, -1.0, 1.0, -1.0, 0.0],
        ];
        for r in &rigid {
            for row in &k {
                let s: f64 = row.iter().zip(r).map(|(a, b)| a * b).sum();
                assert!(s.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn numbering_and_elimination() {
        let mesh = Mesh::new(MeshSpec::cantilever(3, 2, 3.0, 1.0)).unwrap();
        assert_eq!(mesh.n_nodes(), 12);
        assert_eq!(mesh.node(1, 0), 3);
        assert_eq!(mesh.coords(5), [1.0, 1.0]);
        assert_eq!(mesh.n_free(), 24 - 6);
        assert_eq!(mesh.free_dofs()[0], 6);
        let f = mesh.load_vector(false);
        assert!((f.iter().sum::<f64>() + 1.0).abs() < 1e-15);
        assert!(Mesh::new(MeshSpec::cantilever(1, 2, 1.0, 1.0)).is_err());
    }

    #[test]
    fn patch_test_reproduces_constant_stress() {
        let spec = MeshSpec {
            clamped: vec![Edge::Left, Edge::Right, Edge::Bottom, Edge::Top],
            ..MeshSpec::cantilever(2, 2, 2.0, 2.0)
        };
        let mesh = Mesh::new(spec).unwrap();
        let nu = 0.3;
        let e = 2.5;
        let exact = |x: [f64; 2]| [1e-3 * (2.0 * x[0] + 0.5 * x[1]), 1e-3 * (-0.7 * x[0] + 1.5 * x[1])];
        let k_full = mesh.stiffness(nu, |_| e, false).unwrap().to_dense();
        let mut u = vec![0.0; mesh.n_dofs()];
        for n in 0..mesh.n_nodes() {
            let v = exact(mesh.coords(n));
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        // Solve for the interior node with boundary values prescribed.
        let c = mesh.node(1, 1);
        let ids = [2 * c, 2 * c + 1];
        let mut kii = nalgebra::Matrix2::zeros();
        let mut rhs = nalgebra::Vector2::zeros();
        for (a, &da) in ids.iter().enumerate() {
            for (b, &db) in ids.iter().enumerate() {
                kii[(a, b)] = k_full[(da, db)];
            }
            rhs[a] = -(0..mesh.n_dofs()).filter(|d| !ids.contains(d)).map(|d| k_full[(da, d)] * u[d]).sum::<f64>();
        }
        let sol = kii.lu().solve(&rhs).unwrap();
        let want = exact(mesh.coords(c));
        assert!((sol[0] - want[0]).abs() < 1e-13 && (sol[1] - want[1]).abs() < 1e-13);
        u[ids[0]] = sol[0];
        u[ids[1]] = sol[1];
        let eps = [2e-3, 1.5e-3, 1e-3 * (0.5 - 0.7)];
        let d = plane_stress(e, nu);
        let sigma: Vec<f64> = (0..3).map(|r| (0..3).map(|k| d[r][k] * eps[k]).sum()).collect();
        for i in 0..2 {
            for j in 0..2 {
                for s in mesh.element_stress(i, j, nu, e, &u).unwrap() {
                    for r in 0..3 {
                        assert!((s[r] - sigma[r]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn assembled_matrices_are_symmetric_and_mass_is_pd() {
        let mesh = Mesh::new(MeshSpec::cantilever(4, 3, 2.0, 1.0)).unwrap();
        let k = mesh.stiffness(0.3, |x| 1.0 + x[0], true).unwrap();
        let m = mesh.mass(true).unwrap();
        let g = mesh.h1_gram(true).unwrap();
        for a in [&k, &m, &g] {
            assert!(a.is_symmetric());
            let d = a.to_dense();
            assert!((&d - d.transpose()).amax() < 1e-12);
        }
        assert!(m.to_dense().cholesky().is_some());
        assert!(k.to_dense().cholesky().is_some());
        // Total mass of one component equals the area.
        let mf = mesh.mass(false).unwrap();
        let ones: Vec<f64> = (0..mesh.n_dofs()).map(|d| if d % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let total: f64 = mf.mul_vec(&ones).unwrap().iter().zip(&ones).map(|(a, b)| a * b).sum();
        assert!((total - 2.0).abs() < 1e-13);
    }
}
