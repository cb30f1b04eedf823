//! Error norms, including comparison against a solution on a nested refinement.
//!
//! Integrals run over the finer mesh with the degree-4 rule; each fine triangle lies inside one
//! coarse triangle, found by locating its centroid.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::quadrature;

use super::{FeFunction, FluxFunction};

pub enum Reference<'a> {
    Discrete(FeFunction<'a>),
    Exact(&'a dyn Fn(Point) -> f64),
}

pub enum FluxReference<'a> {
    Discrete(FluxFunction<'a>),
    Exact(&'a dyn Fn(Point) -> Point),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    /// Largest pointwise difference over the quadrature points (diagnostic only).
    pub linf: f64,
}

fn coarse_triangles(coarse: &Mesh, fine: &Mesh) -> Result<Vec<usize>> {
    if !coarse.nests_into(fine) {
        return Err(Error::NotNested { coarse: coarse.m(), fine: fine.m() });
    }
    if coarse.m() == fine.m() {
        return Ok((0..fine.num_triangles()).collect());
    }
    (0..fine.num_triangles()).map(|t| coarse.locate(fine.centroid(t))).collect()
}

/// `‖u_h - u_ref‖_{L²}` and the pointwise maximum at quadrature points.
pub fn l2_error(approx: &FeFunction, reference: Reference) -> Result<ErrorNorms> {
    let rule = quadrature(4)?;
    let mut sum = 0.0;
    let mut linf: f64 = 0.0;
    match reference {
        Reference::Discrete(fine) => {
            let map = coarse_triangles(approx.mesh, fine.mesh)?;
            let same = approx.mesh.m() == fine.mesh.m();
            for (tf, &tc) in map.iter().enumerate() {
                let area = fine.mesh.area(tf);
                for (b, w) in rule.iter() {
                    let coarse =
                        if same { approx.eval_bary(tc, *b) } else { approx.eval_at(tc, fine.mesh.map_point(tf, *b)) };
                    let d = coarse - fine.eval_bary(tf, *b);
                    sum += w * area * d * d;
                    linf = linf.max(d.abs());
                }
            }
        }
        Reference::Exact(f) => {
            let mesh = approx.mesh;
            for t in 0..mesh.num_triangles() {
                let area = mesh.area(t);
                for (b, w) in rule.iter() {
                    let d = approx.eval_bary(t, *b) - f(mesh.map_point(t, *b));
                    sum += w * area * d * d;
                    linf = linf.max(d.abs());
                }
            }
        }
    }
    Ok(ErrorNorms { l2: sum.sqrt(), linf })
}

/// `‖σ_h - σ_ref‖_{L²}` for RT0 fields.
pub fn flux_l2_error(approx: &FluxFunction, reference: FluxReference) -> Result<f64> {
    let rule = quadrature(4)?;
    let mut sum = 0.0;
    let mut accumulate = |a: Point, b: Point, w: f64| {
        sum += w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
    };
    match reference {
        FluxReference::Discrete(fine) => {
            let map = coarse_triangles(approx.mesh, fine.mesh)?;
            for (tf, &tc) in map.iter().enumerate() {
                let area = fine.mesh.area(tf);
                for (b, w) in rule.iter() {
                    let p = fine.mesh.map_point(tf, *b);
                    accumulate(approx.eval_at(tc, p), fine.eval_at(tf, p), w * area);
                }
            }
        }
        FluxReference::Exact(f) => {
            let mesh = approx.mesh;
            for t in 0..mesh.num_triangles() {
                let area = mesh.area(t);
                for (b, w) in rule.iter() {
                    let p = mesh.map_point(t, *b);
                    accumulate(approx.eval_at(t, p), f(p), w * area);
                }
            }
        }
    }
    Ok(sum.sqrt())
}
