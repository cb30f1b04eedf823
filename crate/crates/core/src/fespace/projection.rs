//! Load vectors for initial data and for the semilinear source term.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::problem::{InitialData, Nonlinearity};
use crate::quadrature::{gauss_legendre, quadrature, QuadratureRule};
use crate::sparse::CholeskyFactor;

use super::{FeFunction, FemSystem, SpaceKind};

/// Maximum subdivision depth for triangles cut by the quarter-circle arc.
pub const CUT_CELL_MAX_DEPTH: usize = 6;
/// Accepted change in covered area between two subdivision levels, per mesh triangle.
pub const CUT_CELL_TOLERANCE: f64 = 1e-6;

fn basis_values(kind: SpaceKind, bary: [f64; 3]) -> [f64; 3] {
    match kind {
        SpaceKind::P1 => bary,
        SpaceKind::P1nc => bary.map(|l| 1.0 - 2.0 * l),
        SpaceKind::Rt0P0 => [1.0, 0.0, 0.0],
    }
}

fn entity_indices(mesh: &Mesh, kind: SpaceKind, t: usize) -> [usize; 3] {
    match kind {
        SpaceKind::P1 => mesh.triangles()[t],
        SpaceKind::P1nc => mesh.triangle_edges(t),
        SpaceKind::Rt0P0 => [t, t, t],
    }
}

fn entity_count(mesh: &Mesh, kind: SpaceKind) -> usize {
    match kind {
        SpaceKind::P1 => mesh.num_vertices(),
        SpaceKind::P1nc => mesh.num_edges(),
        SpaceKind::Rt0P0 => mesh.num_triangles(),
    }
}

fn local_count(kind: SpaceKind) -> usize {
    if kind == SpaceKind::Rt0P0 {
        1
    } else {
        3
    }
}

/// `∫ u0 φ_i` for every mesh entity of the space (before Dirichlet elimination).
fn entity_load(mesh: &Mesh, kind: SpaceKind, data: &InitialData) -> Result<Vec<f64>> {
    if !data.is_quarter_disk() {
        return function_load(mesh, kind, &|p| data.eval(p));
    }
    let rule = quadrature(6)?;
    let mut load = vec![0.0; entity_count(mesh, kind)];
    let mut points: Vec<(Point, f64)> = Vec::new();
    for t in 0..mesh.num_triangles() {
        points.clear();
        // the indicator is 1 on the region, so only geometry enters
        disk_region_rule_into(mesh, t, &rule, &mut points)?;
        let ents = entity_indices(mesh, kind, t);
        for &(p, w) in &points {
            let phi = basis_values(kind, mesh.barycentric(t, p));
            for k in 0..local_count(kind) {
                load[ents[k]] += w * phi[k];
            }
        }
    }
    Ok(load)
}

/// `∫ f φ_i` for a smooth `f`, per mesh entity, with the degree-6 rule.
pub(crate) fn function_load(mesh: &Mesh, kind: SpaceKind, f: &dyn Fn(Point) -> f64) -> Result<Vec<f64>> {
    let rule = quadrature(6)?;
    let mut load = vec![0.0; entity_count(mesh, kind)];
    for t in 0..mesh.num_triangles() {
        let area = mesh.area(t);
        let ents = entity_indices(mesh, kind, t);
        for (b, w) in rule.iter() {
            let value = f(mesh.map_point(t, *b)) * w * area;
            let phi = basis_values(kind, *b);
            for k in 0..local_count(kind) {
                load[ents[k]] += value * phi[k];
            }
        }
    }
    Ok(load)
}

/// `∫ u0 φ_i` for the free unknowns of `system`.
pub fn load_vector(mesh: &Mesh, system: &FemSystem, data: &InitialData) -> Result<Vec<f64>> {
    Ok(system.restrict(&entity_load(mesh, system.kind(), data)?))
}

/// Orthogonal L² projection onto the space of `system` (Dirichlet-constrained for P1/P1nc).
pub fn project_l2(mesh: &Mesh, system: &FemSystem, data: &InitialData) -> Result<Vec<f64>> {
    let mut c = load_vector(mesh, system, data)?;
    if system.kind() == SpaceKind::Rt0P0 {
        for (t, v) in c.iter_mut().enumerate() {
            *v /= mesh.area(t);
        }
    } else {
        CholeskyFactor::new(&system.mass)?.solve_in_place(&mut c);
    }
    Ok(c)
}

/// L² projection onto the unconstrained space, one coefficient per mesh entity.
pub fn project_l2_unconstrained(mesh: &Mesh, kind: SpaceKind, data: &InitialData) -> Result<Vec<f64>> {
    let mut c = entity_load(mesh, kind, data)?;
    match kind {
        SpaceKind::P1 => CholeskyFactor::new(&super::p1_full_matrices(mesh).0)?.solve_in_place(&mut c),
        SpaceKind::P1nc => CholeskyFactor::new(&super::p1nc_full_matrices(mesh).0)?.solve_in_place(&mut c),
        SpaceKind::Rt0P0 => {
            for (t, v) in c.iter_mut().enumerate() {
                *v /= mesh.area(t);
            }
        }
    }
    Ok(c)
}

/// `∫ f(u_h) φ_i` with the 3-point edge-midpoint rule.
pub fn nonlinear_load(mesh: &Mesh, system: &FemSystem, f: &Nonlinearity, coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != system.n_u() {
        return Err(Error::DimensionMismatch { expected: system.n_u(), got: coeffs.len() });
    }
    let u = FeFunction::new(mesh, system, coeffs);
    let kind = system.kind();
    let mut out = vec![0.0; system.n_u()];
    const MIDPOINTS: [[f64; 3]; 3] = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
    for t in 0..mesh.num_triangles() {
        let w = mesh.area(t) / 3.0;
        let dofs = system.local_u_dofs(mesh, t);
        for bary in MIDPOINTS {
            let uq = u.eval_bary(t, bary);
            let fq = f.eval(uq);
            if !fq.is_finite() {
                return Err(Error::NonFiniteSource { u: uq });
            }
            let phi = basis_values(kind, bary);
            for k in 0..local_count(kind) {
                if let Some(d) = dofs[k] {
                    out[d] += w * fq * phi[k];
                }
            }
        }
    }
    Ok(out)
}

/// Quadrature points and absolute weights for `∫_{K ∩ D} g`, `D` the quarter disk `x²+y² ≤ 1`.
pub fn disk_region_rule(mesh: &Mesh, t: usize) -> Result<Vec<(Point, f64)>> {
    let mut out = Vec::new();
    disk_region_rule_into(mesh, t, &quadrature(6)?, &mut out)?;
    Ok(out)
}

fn disk_region_rule_into(mesh: &Mesh, t: usize, rule: &QuadratureRule, out: &mut Vec<(Point, f64)>) -> Result<()> {
    let tri = mesh.triangle_points(t);
    subdivide(tri, 0, CUT_CELL_TOLERANCE, rule, out).map_err(|depth| Error::QuadratureFailure {
        triangle: t,
        depth,
        tol: CUT_CELL_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coverage {
    Inside,
    Outside,
    Cut,
}

fn classify(tri: &[Point; 3]) -> Coverage {
    if tri.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0) {
        Coverage::Inside
    } else if distance_to_origin(tri) >= 1.0 {
        Coverage::Outside
    } else {
        Coverage::Cut
    }
}

fn distance_to_origin(tri: &[Point; 3]) -> f64 {
    let cross = |a: Point, b: Point| a[0] * b[1] - a[1] * b[0];
    let signs: Vec<f64> = (0..3).map(|k| cross(tri[k], tri[(k + 1) % 3])).collect();
    if signs.iter().all(|&s| s >= 0.0) || signs.iter().all(|&s| s <= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|k| {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let d = [b[0] - a[0], b[1] - a[1]];
            let s = (-(a[0] * d[0] + a[1] * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
            (a[0] + s * d[0]).hypot(a[1] + s * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}

fn triangle_area(tri: &[Point; 3]) -> f64 {
    0.5 * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1])).abs()
}

/// `tri ∩ D` as a convex polygon plus, when the arc crosses the boundary of `tri` exactly twice,
/// the circular segment cut off by the chord between the crossings. Crossings are exact
/// edge/circle intersections.
struct CutPiece {
    polygon: Vec<Point>,
    chord: Option<(Point, Point)>,
}

fn cut_piece(tri: &[Point; 3]) -> CutPiece {
    let inside = |p: Point| p[0] * p[0] + p[1] * p[1] <= 1.0;
    let mut polygon = Vec::with_capacity(5);
    let mut crossings = Vec::with_capacity(2);
    for k in 0..3 {
        let (a, b) = (tri[k], tri[(k + 1) % 3]);
        if inside(a) {
            polygon.push(a);
        }
        if inside(a) != inside(b) {
            let (p, q) = if inside(a) { (a, b) } else { (b, a) };
            // |p + s (q - p)|² = 1 with p inside, q outside; root in [0, 1]
            let d = [q[0] - p[0], q[1] - p[1]];
            let qa = d[0] * d[0] + d[1] * d[1];
            let qb = p[0] * d[0] + p[1] * d[1];
            let qc = p[0] * p[0] + p[1] * p[1] - 1.0;
            let denom = qb + (qb * qb - qa * qc).sqrt();
            let s = if qc >= 0.0 || denom <= 0.0 { 0.0 } else { (-qc / denom).clamp(0.0, 1.0) };
            let x = [p[0] + s * d[0], p[1] + s * d[1]];
            polygon.push(x);
            crossings.push(x);
        }
    }
    let chord = (crossings.len() == 2).then(|| (crossings[0], crossings[1]));
    CutPiece { polygon, chord }
}

fn fan(poly: &[Point]) -> impl Iterator<Item = [Point; 3]> + '_ {
    (1..poly.len().saturating_sub(1)).map(move |k| [poly[0], poly[k], poly[k + 1]])
}

/// Angles bounding the arc between the chord ends, and the half-angle of the segment.
fn arc_angles(p: Point, q: Point) -> (f64, f64, f64) {
    let (a, b) = (p[1].atan2(p[0]), q[1].atan2(q[0]));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (lo, hi, 0.5 * (hi - lo))
}

fn segment_area(p: Point, q: Point) -> f64 {
    let (_, _, half) = arc_angles(p, q);
    // (θ - sin θ) / 2 with θ the central angle, written to avoid cancellation for small θ
    let theta = 2.0 * half;
    if theta < 1e-3 {
        let t3 = theta * theta * theta;
        t3 / 12.0 * (1.0 - theta * theta / 20.0 + theta.powi(4) / 840.0)
    } else {
        0.5 * (theta - theta.sin())
    }
}

/// Polar tensor rule on the circular segment: angle between the chord ends, radius from the
/// chord to the arc.
fn push_segment(p: Point, q: Point, out: &mut Vec<(Point, f64)>) {
    let (lo, hi, half) = arc_angles(p, q);
    let mid = 0.5 * (lo + hi);
    let dist = half.cos();
    let (tn, tw) = gauss_legendre(8);
    let (rn, rw) = gauss_legendre(4);
    for (s, ws) in tn.iter().zip(&tw) {
        let theta = lo + s * (hi - lo);
        let r0 = (dist / (theta - mid).cos()).min(1.0);
        let (sin, cos) = theta.sin_cos();
        for (u, wu) in rn.iter().zip(&rw) {
            let r = r0 + u * (1.0 - r0);
            out.push(([r * cos, r * sin], ws * (hi - lo) * wu * (1.0 - r0) * r));
        }
    }
}

fn region_area(tri: &[Point; 3]) -> f64 {
    match classify(tri) {
        Coverage::Inside => triangle_area(tri),
        Coverage::Outside => 0.0,
        Coverage::Cut => {
            let piece = cut_piece(tri);
            let poly: f64 = fan(&piece.polygon).map(|t| triangle_area(&t)).sum();
            poly + piece.chord.map_or(0.0, |(p, q)| segment_area(p, q))
        }
    }
}

fn push_rule(tri: &[Point; 3], rule: &QuadratureRule, out: &mut Vec<(Point, f64)>) {
    let area = triangle_area(tri);
    for (b, w) in rule.iter() {
        let p = [
            b[0] * tri[0][0] + b[1] * tri[1][0] + b[2] * tri[2][0],
            b[0] * tri[0][1] + b[1] * tri[1][1] + b[2] * tri[2][1],
        ];
        out.push((p, w * area));
    }
}

fn push_region(tri: &[Point; 3], rule: &QuadratureRule, out: &mut Vec<(Point, f64)>) {
    match classify(tri) {
        Coverage::Inside => push_rule(tri, rule, out),
        Coverage::Outside => {}
        Coverage::Cut => {
            let piece = cut_piece(tri);
            for t in fan(&piece.polygon) {
                push_rule(&t, rule, out);
            }
            if let Some((p, q)) = piece.chord {
                push_segment(p, q, out);
            }
        }
    }
}

fn split(tri: &[Point; 3]) -> [[Point; 3]; 4] {
    let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let [a, b, c] = *tri;
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

/// Recursive subdivision; the error carries the depth at which the tolerance was missed.
fn subdivide(
    tri: [Point; 3],
    depth: usize,
    tol: f64,
    rule: &QuadratureRule,
    out: &mut Vec<(Point, f64)>,
) -> std::result::Result<(), usize> {
    match classify(&tri) {
        Coverage::Inside => push_rule(&tri, rule, out),
        Coverage::Outside => {}
        Coverage::Cut => {
            let children = split(&tri);
            // the piece model fails when the arc crosses one edge twice; the children then
            // disagree with the parent and the piece is split further
            let coarse = region_area(&tri);
            let fine: f64 = children.iter().map(region_area).sum();
            if (coarse - fine).abs() <= tol {
                push_region(&tri, rule, out);
            } else if depth == CUT_CELL_MAX_DEPTH {
                return Err(depth);
            } else {
                for child in children {
                    subdivide(child, depth + 1, 0.5 * tol, rule, out)?;
                }
            }
        }
    }
    Ok(())
}
