use crate::mesh::{ElementFunction, Mesh, Point};

use super::{FemSystem, SpaceKind};

/// A scalar finite element function given by its free coefficients.
#[derive(Clone, Copy)]
pub struct FeFunction<'a> {
    pub mesh: &'a Mesh,
    pub system: &'a FemSystem,
    pub coeffs: &'a [f64],
}

impl<'a> FeFunction<'a> {
    pub fn new(mesh: &'a Mesh, system: &'a FemSystem, coeffs: &'a [f64]) -> Self {
        assert_eq!(coeffs.len(), system.n_u(), "coefficient vector does not match the space");
        Self { mesh, system, coeffs }
    }

    /// Value on triangle `t` at barycentric coordinates `bary`.
    pub fn eval_bary(&self, t: usize, bary: [f64; 3]) -> f64 {
        let dofs = self.system.local_u_dofs(self.mesh, t);
        let c = |k: usize| dofs[k].map_or(0.0, |d| self.coeffs[d]);
        match self.system.kind() {
            SpaceKind::P1 => (0..3).map(|k| c(k) * bary[k]).sum(),
            SpaceKind::P1nc => (0..3).map(|k| c(k) * (1.0 - 2.0 * bary[k])).sum(),
            SpaceKind::Rt0P0 => c(0),
        }
    }

    pub fn eval_at(&self, t: usize, p: Point) -> f64 {
        self.eval_bary(t, self.mesh.barycentric(t, p))
    }
}

impl ElementFunction for FeFunction<'_> {
    fn eval(&self, _mesh: &Mesh, triangle: usize, p: Point) -> f64 {
        self.eval_at(triangle, p)
    }
}

/// An RT0 vector field given by its edge fluxes.
#[derive(Clone, Copy)]
pub struct FluxFunction<'a> {
    pub mesh: &'a Mesh,
    pub coeffs: &'a [f64],
}

impl<'a> FluxFunction<'a> {
    pub fn new(mesh: &'a Mesh, coeffs: &'a [f64]) -> Self {
        assert_eq!(coeffs.len(), mesh.num_edges(), "flux vector does not match the edge count");
        Self { mesh, coeffs }
    }

    pub fn eval_at(&self, t: usize, p: Point) -> Point {
        let pts = self.mesh.triangle_points(t);
        let edges = self.mesh.triangle_edges(t);
        let inv = 1.0 / (2.0 * self.mesh.area(t));
        let mut v = [0.0; 2];
        for k in 0..3 {
            let c = self.coeffs[edges[k]] * self.mesh.edge_sign(t, k) * inv;
            v[0] += c * (p[0] - pts[k][0]);
            v[1] += c * (p[1] - pts[k][1]);
        }
        v
    }
}
