//! Uniform right-triangle meshes of the unit square.
//!
//! Cell `(i, j)` covers `[i/M, (i+1)/M] x [j/M, (j+1)/M]` and is split along the diagonal
//! from `(i/M, j/M)` to `((i+1)/M, (j+1)/M)`. Triangle `2(jM + i)` is the lower-right half,
//! triangle `2(jM + i) + 1` the upper-left half. Vertex `(i, j)` has index `j(M+1) + i`.
//!
//! Local edge `k` of a triangle is the edge opposite its local vertex `k`. Every edge carries
//! a global unit normal pointing out of its lower-index adjacent triangle, which for boundary
//! edges is the outward normal of the domain.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, lower vertex index first.
    pub vertices: [usize; 2],
    /// Adjacent triangles in increasing index order; the second entry is `None` on the boundary.
    pub triangles: [Option<usize>; 2],
    pub normal: Point,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    m: usize,
    level: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    triangle_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    boundary_vertex: Vec<bool>,
    parent: Option<Vec<usize>>,
}

/// Builds the uniform triangulation with `m` subdivisions per side.
pub fn build_uniform_mesh(m: usize) -> Result<Mesh> {
    if m == 0 {
        return Err(Error::InvalidConfig("mesh parameter M must be at least 1".into()));
    }
    Ok(Mesh::uniform(m, 0))
}

/// Uniform refinement: parameter `2M`, same diagonal convention, with the fine-to-coarse
/// triangle map recorded.
pub fn refine(mesh: &Mesh) -> Mesh {
    let mut fine = Mesh::uniform(2 * mesh.m, mesh.level + 1);
    let parent = (0..fine.num_triangles())
        .map(|t| mesh.locate(fine.centroid(t)).expect("centroid of a fine triangle lies in the unit square"))
        .collect();
    fine.parent = Some(parent);
    fine
}

impl Mesh {
    fn uniform(m: usize, level: usize) -> Mesh {
        let n = m + 1;
        let vid = |i: usize, j: usize| j * n + i;
        let mut vertices = Vec::with_capacity(n * n);
        let mut boundary_vertex = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([i as f64 / m as f64, j as f64 / m as f64]);
                boundary_vertex.push(i == 0 || j == 0 || i == m || j == m);
            }
        }
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * m * m + 2 * m);
        let mut edges: Vec<Edge> = Vec::with_capacity(3 * m * m + 2 * m);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: [Some(t), None],
                        normal: [0.0, 0.0],
                        boundary: true,
                    });
                    edges.len() - 1
                });
                if edges[e].triangles[0] != Some(t) {
                    edges[e].triangles[1] = Some(t);
                    edges[e].boundary = false;
                }
                *slot = e;
            }
            triangle_edges.push(local);
        }

        for (e, edge) in edges.iter_mut().enumerate() {
            let owner = edge.triangles[0].expect("every edge has an owner");
            let k = triangle_edges[owner].iter().position(|&x| x == e).expect("edge belongs to its owner");
            let opposite = vertices[triangles[owner][k]];
            let [a, b] = edge.vertices.map(|v| vertices[v]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let mut normal = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            if normal[0] * (a[0] - opposite[0]) + normal[1] * (a[1] - opposite[1]) < 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            edge.normal = normal;
        }

        Mesh { m, level, vertices, triangles, triangle_edges, edges, boundary_vertex, parent: None }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge indices of triangle `t`; entry `k` is opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Fine-to-coarse triangle map, present on meshes produced by [`refine`].
    pub fn parent_map(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices.map(|v| self.vertices[v]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices.map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// `+1` if the global normal of local edge `k` points out of triangle `t`, `-1` otherwise.
    pub fn edge_sign(&self, t: usize, k: usize) -> f64 {
        let e = self.triangle_edges[t][k];
        if self.edges[e].triangles[0] == Some(t) {
            1.0
        } else {
            -1.0
        }
    }

    /// Maps barycentric coordinates on triangle `t` to a physical point.
    pub fn map_point(&self, t: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0], bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1]]
    }

    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Gradients of the three barycentric coordinate functions on triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Point; 3] {
        let p = self.triangle_points(t);
        let two_area = 2.0 * self.signed_area(t);
        std::array::from_fn(|k| {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area]
        })
    }

    /// Index of the triangle containing `p`, by direct cell arithmetic.
    ///
    /// Points on shared edges or vertices resolve to the lowest-index incident triangle.
    pub fn locate(&self, p: Point) -> Result<usize> {
        let [x, y] = p;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::PointOutsideDomain { x, y });
        }
        let m = self.m as f64;
        let cell = |s: f64| -> (usize, f64) {
            let scaled = s * m;
            let idx = (scaled.ceil() as isize - 1).clamp(0, self.m as isize - 1) as usize;
            (idx, scaled - idx as f64)
        };
        let (i, xi) = cell(x);
        let (j, eta) = cell(y);
        let k = if xi >= eta { 0 } else { 1 };
        Ok(2 * (j * self.m + i) + k)
    }

    /// Locates `p` and evaluates a piecewise polynomial on the containing triangle.
    pub fn locate_and_evaluate<F: ElementFunction + ?Sized>(&self, p: Point, f: &F) -> Result<f64> {
        let t = self.locate(p)?;
        Ok(f.eval(self, t, p))
    }

    /// True when `fine` is a uniform refinement (by an integer factor) of `self`.
    pub fn nests_into(&self, fine: &Mesh) -> bool {
        fine.m >= self.m && fine.m.is_multiple_of(self.m)
    }

    /// Plain-text dump: `M`, then `v`, `t` and `e` records.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "M {}", self.m).unwrap();
        for v in &self.vertices {
            writeln!(out, "v {} {}", v[0], v[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "t {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for e in &self.edges {
            let second = e.triangles[1].map_or(-1, |t| t as i64);
            writeln!(
                out,
                "e {} {} {} {} {}",
                e.vertices[0],
                e.vertices[1],
                e.triangles[0].unwrap(),
                second,
                u8::from(e.boundary)
            )
            .unwrap();
        }
        out
    }
}

/// A function given by local polynomial data on each triangle.
pub trait ElementFunction {
    fn eval(&self, mesh: &Mesh, triangle: usize, p: Point) -> f64;
}

/// Piecewise constant data, one value per triangle.
pub struct PiecewiseConstant<'a>(pub &'a [f64]);

impl ElementFunction for PiecewiseConstant<'_> {
    fn eval(&self, _mesh: &Mesh, triangle: usize, _p: Point) -> f64 {
        self.0[triangle]
    }
}

/// Piecewise affine data given by vertex values of each triangle (possibly discontinuous).
pub struct PiecewiseAffine<'a>(pub &'a [[f64; 3]]);

impl ElementFunction for PiecewiseAffine<'_> {
    fn eval(&self, mesh: &Mesh, triangle: usize, p: Point) -> f64 {
        let l = mesh.barycentric(triangle, p);
        let v = self.0[triangle];
        l[0] * v[0] + l[1] * v[1] + l[2] * v[2]
    }
}

impl<F: Fn(usize, Point) -> f64> ElementFunction for F {
    fn eval(&self, _mesh: &Mesh, triangle: usize, p: Point) -> f64 {
        self(triangle, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_closed_forms() {
        for m in [1usize, 2, 4, 8, 16, 32, 64] {
            let mesh = build_uniform_mesh(m).unwrap();
            assert_eq!(mesh.num_vertices(), (m + 1) * (m + 1));
            assert_eq!(mesh.num_triangles(), 2 * m * m);
            assert_eq!(mesh.num_edges(), 3 * m * m + 2 * m);
            let h = 1.0 / m as f64;
            for t in 0..mesh.num_triangles() {
                assert!((mesh.signed_area(t) - h * h / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn small_meshes() {
        let m1 = build_uniform_mesh(1).unwrap();
        assert_eq!((m1.num_vertices(), m1.num_triangles(), m1.num_edges()), (4, 2, 5));
        let m2 = build_uniform_mesh(2).unwrap();
        assert_eq!((m2.num_vertices(), m2.num_triangles(), m2.num_edges()), (9, 8, 16));
        let m8 = build_uniform_mesh(8).unwrap();
        assert_eq!(m8.h(), 0.125);
        assert!((0..m8.num_triangles()).all(|t| m8.area(t) == 0.0078125));
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(build_uniform_mesh(0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn edge_adjacency_and_normals() {
        let mesh = build_uniform_mesh(4).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let [a, b] = edge.vertices.map(|v| mesh.vertices()[v]);
            let on_side =
                (a[0] == b[0] && (a[0] == 0.0 || a[0] == 1.0)) || (a[1] == b[1] && (a[1] == 0.0 || a[1] == 1.0));
            assert_eq!(edge.boundary, on_side, "edge {e}");
            assert_eq!(edge.triangles[1].is_none(), edge.boundary);
            if let [Some(t0), Some(t1)] = edge.triangles {
                assert!(t0 < t1);
            }
            let n = edge.normal;
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-15);
            // normal points away from the owner's centroid
            let c = mesh.centroid(edge.triangles[0].unwrap());
            let mid = mesh.edge_midpoint(e);
            assert!(n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]) > 0.0);
        }
        // each triangle's local edge k is opposite local vertex k
        for t in 0..mesh.num_triangles() {
            for k in 0..3 {
                let e = &mesh.edges()[mesh.triangle_edges(t)[k]];
                assert!(!e.vertices.contains(&mesh.triangles()[t][k]));
            }
        }
    }

    #[test]
    fn refinement_is_nested() {
        let coarse = build_uniform_mesh(1).unwrap();
        let fine = refine(&coarse);
        let direct = build_uniform_mesh(2).unwrap();
        assert_eq!(fine.triangles(), direct.triangles());
        assert_eq!(fine.edges(), direct.edges());
        assert_eq!(fine.level(), 1);

        let coarse = build_uniform_mesh(4).unwrap();
        let fine = refine(&coarse);
        for (i, v) in coarse.vertices().iter().enumerate() {
            assert!(fine.vertices().contains(v), "vertex {i}");
        }
        let parent = fine.parent_map().unwrap();
        for t in 0..coarse.num_triangles() {
            let children: Vec<usize> = (0..fine.num_triangles()).filter(|&f| parent[f] == t).collect();
            assert_eq!(children.len(), 4);
            let sum: f64 = children.iter().map(|&f| fine.area(f)).sum();
            assert!((sum - coarse.area(t)).abs() < 1e-16);
            for &f in &children {
                for p in fine.triangle_points(f) {
                    let l = coarse.barycentric(t, p);
                    assert!(l.iter().all(|&x| x > -1e-14));
                }
            }
        }
    }

    #[test]
    fn locate_ties_resolve_to_lowest_index() {
        let mesh = build_uniform_mesh(2).unwrap();
        let t = mesh.locate([0.5, 0.5]).unwrap();
        assert_eq!(t, 0);
        assert!(matches!(mesh.locate([1.1, 0.5]), Err(Error::PointOutsideDomain { .. })));
        assert!(mesh.locate([-0.0, 1.0]).is_ok());
    }

    #[test]
    fn locate_matches_brute_force_on_grid_points() {
        for m in [1usize, 2, 3, 5] {
            let mesh = build_uniform_mesh(m).unwrap();
            let k = 4 * m;
            for a in 0..=k {
                for b in 0..=k {
                    let p = [a as f64 / k as f64, b as f64 / k as f64];
                    let brute = (0..mesh.num_triangles())
                        .find(|&t| mesh.barycentric(t, p).iter().all(|&l| l >= -1e-12))
                        .unwrap();
                    assert_eq!(mesh.locate(p).unwrap(), brute, "m={m} p={p:?}");
                }
            }
        }
    }

    #[test]
    fn evaluates_local_data() {
        let mesh = build_uniform_mesh(4).unwrap();
        let affine: Vec<[f64; 3]> =
            (0..mesh.num_triangles()).map(|t| mesh.triangle_points(t).map(|p| p[0] + p[1])).collect();
        let v = mesh.locate_and_evaluate([0.3, 0.7], &PiecewiseAffine(&affine)).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        let consts: Vec<f64> = (0..mesh.num_triangles()).map(|t| t as f64 * 0.5).collect();
        for t in 0..mesh.num_triangles() {
            let c = mesh.centroid(t);
            assert_eq!(mesh.locate_and_evaluate(c, &PiecewiseConstant(&consts)).unwrap(), consts[t]);
        }
    }

    #[test]
    fn dump_format() {
        let mesh = build_uniform_mesh(1).unwrap();
        let text = mesh.dump();
        let expected = "M 1\nv 0 0\nv 1 0\nv 0 1\nv 1 1\nt 0 1 3\nt 0 3 2\n\
                        e 1 3 0 -1 1\ne 0 3 0 1 0\ne 0 1 0 -1 1\ne 2 3 1 -1 1\ne 0 2 1 -1 1\n";
        assert_eq!(text, expected);
    }
}
