//! Finite element spaces on uniform meshes, selected by [`SpaceKind`].
//!
//! Element matrices come from closed-form integrals on each affine triangle. Homogeneous
//! Dirichlet conditions are imposed by eliminating boundary vertex (P1) or boundary edge (P1nc)
//! unknowns; the mixed pair carries the condition naturally and keeps every unknown.
//!
//! RT0 basis function of edge `e` restricted to triangle `K` is `s (x - p) / (2|K|)`, where `p`
//! is the vertex opposite `e` and `s = ±1` compares the global edge normal with the outward
//! normal of `K`. It has unit flux across `e`, so the divergence block has entries `±1`.

mod elliptic;
mod eval;
mod norms;
mod projection;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{CsrMatrix, TripletBuilder};

pub use elliptic::{solve_elliptic, EllipticSolution};
pub use eval::{FeFunction, FluxFunction};
pub use norms::{flux_l2_error, l2_error, ErrorNorms, FluxReference, Reference};
pub use projection::{
    disk_region_rule, load_vector, nonlinear_load, project_l2, project_l2_unconstrained, CUT_CELL_MAX_DEPTH,
    CUT_CELL_TOLERANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    /// Conforming continuous piecewise linears.
    P1,
    /// Crouzeix–Raviart elements, continuous at edge midpoints.
    P1nc,
    /// Lowest-order Raviart–Thomas fluxes paired with piecewise constant scalars.
    #[serde(rename = "rt0")]
    Rt0P0,
}

impl SpaceKind {
    /// Expected L² convergence order of the scalar variable.
    pub fn gamma(&self) -> u32 {
        match self {
            SpaceKind::P1 | SpaceKind::P1nc => 2,
            SpaceKind::Rt0P0 => 1,
        }
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, SpaceKind::Rt0P0)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::P1 => "p1",
            SpaceKind::P1nc => "p1nc",
            SpaceKind::Rt0P0 => "rt0",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p1" => Ok(SpaceKind::P1),
            "p1nc" => Ok(SpaceKind::P1nc),
            "rt0" => Ok(SpaceKind::Rt0P0),
            _ => Err(Error::InvalidConfig(format!("unknown finite element '{s}' (expected p1, p1nc or rt0)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    pub dof_count_u: usize,
    /// Zero for the primal spaces.
    pub dof_count_flux: usize,
    pub gamma: u32,
    /// Geometric location of each scalar unknown: vertices, edge midpoints or centroids.
    pub u_anchors: Vec<Point>,
    /// Edge midpoints of the flux unknowns (mixed only).
    pub flux_anchors: Vec<Point>,
}

/// Assembled operators of one space on one mesh.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub descriptor: SpaceDescriptor,
    /// Scalar mass matrix on the free unknowns.
    pub mass: CsrMatrix,
    /// Primal spaces only.
    pub stiffness: Option<CsrMatrix>,
    /// `B[t, e] = ∫_t ∇·w_e`, triangles by edges (mixed only).
    pub div_block: Option<CsrMatrix>,
    /// `∫ w_e · w_f` (mixed only).
    pub flux_mass: Option<CsrMatrix>,
    /// Mesh entity (vertex, edge or triangle) carrying each free unknown.
    pub entity_of_dof: Vec<usize>,
    /// Inverse of `entity_of_dof`; `None` for eliminated Dirichlet entities.
    pub dof_of_entity: Vec<Option<usize>>,
}

impl FemSystem {
    pub fn kind(&self) -> SpaceKind {
        self.descriptor.kind
    }

    pub fn n_u(&self) -> usize {
        self.descriptor.dof_count_u
    }

    pub fn n_flux(&self) -> usize {
        self.descriptor.dof_count_flux
    }

    /// Free unknowns of the scalar variable on triangle `t`, with the local basis index.
    /// P1 and P1nc use three local functions (by vertex or opposite edge), P0 one.
    pub(crate) fn local_u_dofs(&self, mesh: &Mesh, t: usize) -> [Option<usize>; 3] {
        match self.kind() {
            SpaceKind::P1 => mesh.triangles()[t].map(|v| self.dof_of_entity[v]),
            SpaceKind::P1nc => mesh.triangle_edges(t).map(|e| self.dof_of_entity[e]),
            SpaceKind::Rt0P0 => [Some(t), None, None],
        }
    }

    /// Scatters free coefficients onto all mesh entities (zero on Dirichlet entities).
    pub fn expand(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.dof_of_entity.len()];
        for (d, &ent) in self.entity_of_dof.iter().enumerate() {
            full[ent] = coeffs[d];
        }
        full
    }

    /// Restricts entity values to the free unknowns.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.entity_of_dof.iter().map(|&ent| full[ent]).collect()
    }
}

/// Full P1 mass and stiffness matrices over all vertices, before Dirichlet elimination.
pub fn p1_full_matrices(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let n = mesh.num_vertices();
    let mut mass = TripletBuilder::with_capacity(n, n, 9 * mesh.num_triangles());
    let mut stiff = TripletBuilder::with_capacity(n, n, 9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles()[t];
        let (m, k) = p1_element(mesh, t);
        for a in 0..3 {
            for b in 0..3 {
                mass.push(tri[a], tri[b], m[a][b]);
                stiff.push(tri[a], tri[b], k[a][b]);
            }
        }
    }
    (mass.build(), stiff.build())
}

/// Full Crouzeix–Raviart mass and stiffness matrices over all edges.
pub fn p1nc_full_matrices(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let n = mesh.num_edges();
    let mut mass = TripletBuilder::with_capacity(n, n, 3 * mesh.num_triangles());
    let mut stiff = TripletBuilder::with_capacity(n, n, 9 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let edges = mesh.triangle_edges(t);
        let area = mesh.area(t);
        let (_, k) = p1_element(mesh, t);
        for a in 0..3 {
            // the midpoint rule is exact and the basis is nodal at the midpoints
            mass.push(edges[a], edges[a], area / 3.0);
            for b in 0..3 {
                // ∇(1 - 2λ_a) = -2∇λ_a
                stiff.push(edges[a], edges[b], 4.0 * k[a][b]);
            }
        }
    }
    (mass.build(), stiff.build())
}

fn p1_element(mesh: &Mesh, t: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = mesh.area(t);
    let grads = mesh.barycentric_gradients(t);
    let mut m = [[0.0; 3]; 3];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = if a == b { area / 6.0 } else { area / 12.0 };
            k[a][b] = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
        }
    }
    (m, k)
}

/// RT0 local flux mass matrix `∫_K w_a · w_b` in local edge order (signs included).
pub(crate) fn rt0_element_mass(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let area = mesh.area(t);
    let p = mesh.triangle_points(t);
    let signs: [f64; 3] = std::array::from_fn(|k| mesh.edge_sign(t, k));
    let rule = crate::quadrature::quadrature(2).expect("degree 2 rule exists");
    let mut m = [[0.0; 3]; 3];
    for (bary, w) in rule.iter() {
        let x = mesh.map_point(t, *bary);
        let vals: [Point; 3] = std::array::from_fn(|k| {
            let s = signs[k] / (2.0 * area);
            [s * (x[0] - p[k][0]), s * (x[1] - p[k][1])]
        });
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += w * area * (vals[a][0] * vals[b][0] + vals[a][1] * vals[b][1]);
            }
        }
    }
    m
}

/// Assembles the operators of `kind` on `mesh`.
pub fn assemble(mesh: &Mesh, kind: SpaceKind) -> FemSystem {
    match kind {
        SpaceKind::P1 => {
            let (mass, stiff) = p1_full_matrices(mesh);
            let free: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary_vertex(v)).collect();
            let anchors = free.iter().map(|&v| mesh.vertices()[v]).collect();
            primal_system(kind, mesh.num_vertices(), free, anchors, &mass, &stiff)
        }
        SpaceKind::P1nc => {
            let (mass, stiff) = p1nc_full_matrices(mesh);
            let free: Vec<usize> = (0..mesh.num_edges()).filter(|&e| !mesh.edges()[e].boundary).collect();
            let anchors = free.iter().map(|&e| mesh.edge_midpoint(e)).collect();
            primal_system(kind, mesh.num_edges(), free, anchors, &mass, &stiff)
        }
        SpaceKind::Rt0P0 => assemble_mixed(mesh),
    }
}

fn primal_system(
    kind: SpaceKind,
    n_entities: usize,
    free: Vec<usize>,
    u_anchors: Vec<Point>,
    mass: &CsrMatrix,
    stiff: &CsrMatrix,
) -> FemSystem {
    let mut dof_of_entity = vec![None; n_entities];
    for (d, &ent) in free.iter().enumerate() {
        dof_of_entity[ent] = Some(d);
    }
    FemSystem {
        descriptor: SpaceDescriptor {
            kind,
            dof_count_u: free.len(),
            dof_count_flux: 0,
            gamma: kind.gamma(),
            u_anchors,
            flux_anchors: Vec::new(),
        },
        mass: mass.select(&free, &free),
        stiffness: Some(stiff.select(&free, &free)),
        div_block: None,
        flux_mass: None,
        entity_of_dof: free,
        dof_of_entity,
    }
}

fn assemble_mixed(mesh: &Mesh) -> FemSystem {
    let nt = mesh.num_triangles();
    let ne = mesh.num_edges();
    let areas: Vec<f64> = (0..nt).map(|t| mesh.area(t)).collect();
    let mut div = TripletBuilder::with_capacity(nt, ne, 3 * nt);
    let mut flux = TripletBuilder::with_capacity(ne, ne, 9 * nt);
    for t in 0..nt {
        let edges = mesh.triangle_edges(t);
        let m = rt0_element_mass(mesh, t);
        for a in 0..3 {
            div.push(t, edges[a], mesh.edge_sign(t, a));
            for b in 0..3 {
                flux.push(edges[a], edges[b], m[a][b]);
            }
        }
    }
    FemSystem {
        descriptor: SpaceDescriptor {
            kind: SpaceKind::Rt0P0,
            dof_count_u: nt,
            dof_count_flux: ne,
            gamma: 1,
            u_anchors: (0..nt).map(|t| mesh.centroid(t)).collect(),
            flux_anchors: (0..ne).map(|e| mesh.edge_midpoint(e)).collect(),
        },
        mass: CsrMatrix::diagonal(&areas),
        stiffness: None,
        div_block: Some(div.build()),
        flux_mass: Some(flux.build()),
        entity_of_dof: (0..nt).collect(),
        dof_of_entity: (0..nt).map(Some).collect(),
    }
}

/// RT0 interpolant of a vector field: the normal flux across each edge (global normals),
/// computed with a 2-point Gauss rule on the edge.
pub fn rt0_interpolate(mesh: &Mesh, field: impl Fn(Point) -> Point) -> Vec<f64> {
    let g = 0.5 / 3f64.sqrt();
    (0..mesh.num_edges())
        .map(|e| {
            let edge = &mesh.edges()[e];
            let [a, b] = edge.vertices.map(|v| mesh.vertices()[v]);
            let len = mesh.edge_length(e);
            [0.5 - g, 0.5 + g]
                .iter()
                .map(|&s| {
                    let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let v = field(p);
                    0.5 * len * (v[0] * edge.normal[0] + v[1] * edge.normal[1])
                })
                .sum()
        })
        .collect()
}
