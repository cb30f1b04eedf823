//! Discrete elliptic solves for `-Δu = f` with homogeneous Dirichlet data.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::sparse::{CholeskyFactor, LuFactor, TripletBuilder};

use super::projection::function_load;
use super::{FemSystem, SpaceKind};

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub u: Vec<f64>,
    /// Edge fluxes of `σ = ∇u` (mixed only).
    pub flux: Option<Vec<f64>>,
}

/// Solves the Galerkin (primal) or mixed (RT0/P0) problem for the source `f`.
pub fn solve_elliptic(mesh: &Mesh, system: &FemSystem, source: &dyn Fn(Point) -> f64) -> Result<EllipticSolution> {
    let load = system.restrict(&function_load(mesh, system.kind(), source)?);
    match system.kind() {
        SpaceKind::P1 | SpaceKind::P1nc => {
            let k = system
                .stiffness
                .as_ref()
                .ok_or_else(|| Error::LinearSolver("primal system without stiffness".into()))?;
            let mut u = load;
            CholeskyFactor::new(k)?.solve_in_place(&mut u);
            Ok(EllipticSolution { u, flux: None })
        }
        SpaceKind::Rt0P0 => {
            let (a, b) = match (&system.flux_mass, &system.div_block) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::LinearSolver("mixed system without flux blocks".into())),
            };
            let ne = system.n_flux();
            let nt = system.n_u();
            // [[A, Bᵀ], [B, 0]] (σ, u) = (0, -F)
            let mut saddle = TripletBuilder::with_capacity(ne + nt, ne + nt, a.nnz() + 2 * b.nnz());
            for (i, j, v) in a.triplets() {
                saddle.push(i, j, v);
            }
            for (t, e, v) in b.triplets() {
                saddle.push(ne + t, e, v);
                saddle.push(e, ne + t, v);
            }
            let mut x = vec![0.0; ne + nt];
            for (t, f) in load.iter().enumerate() {
                x[ne + t] = -f;
            }
            LuFactor::new(&saddle.build())?.solve_in_place(&mut x)?;
            let u = x.split_off(ne);
            Ok(EllipticSolution { u, flux: Some(x) })
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fespace::{assemble, flux_l2_error, l2_error, FeFunction, FluxFunction, FluxReference, Reference};
    use crate::mesh::build_uniform_mesh;
    use crate::sparse::{dot, norm};
    use rand::{Rng, SeedableRng};

    fn exact(p: Point) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin()
    }

    fn exact_grad(p: Point) -> Point {
        [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()]
    }

    fn source(p: Point) -> f64 {
        2.0 * PI * PI * exact(p)
    }

    fn rates(errors: &[f64]) -> Vec<f64> {
        errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    #[test]
    fn primal_rates_are_second_order() {
        for kind in [SpaceKind::P1, SpaceKind::P1nc] {
            let errors: Vec<f64> = [8, 16, 32, 64]
                .iter()
                .map(|&m| {
                    let mesh = build_uniform_mesh(m).unwrap();
                    let sys = assemble(&mesh, kind);
                    let sol = solve_elliptic(&mesh, &sys, &source).unwrap();
                    l2_error(&FeFunction::new(&mesh, &sys, &sol.u), Reference::Exact(&exact)).unwrap().l2
                })
                .collect();
            for r in rates(&errors) {
                assert!((r - 2.0).abs() <= 0.1, "{kind}: {errors:?}");
            }
        }
    }

    #[test]
    fn mixed_rates_are_first_order() {
        let mut eu = Vec::new();
        let mut es = Vec::new();
        for m in [8, 16, 32, 64] {
            let mesh = build_uniform_mesh(m).unwrap();
            let sys = assemble(&mesh, SpaceKind::Rt0P0);
            let sol = solve_elliptic(&mesh, &sys, &source).unwrap();
            eu.push(l2_error(&FeFunction::new(&mesh, &sys, &sol.u), Reference::Exact(&exact)).unwrap().l2);
            let sigma = sol.flux.unwrap();
            es.push(flux_l2_error(&FluxFunction::new(&mesh, &sigma), FluxReference::Exact(&exact_grad)).unwrap());
        }
        for r in rates(&eu).into_iter().chain(rates(&es)) {
            assert!((r - 1.0).abs() <= 0.1, "{eu:?} {es:?}");
        }
    }

    #[test]
    fn mixed_divergence_matches_source_per_triangle() {
        let mesh = build_uniform_mesh(16).unwrap();
        let sys = assemble(&mesh, SpaceKind::Rt0P0);
        let sol = solve_elliptic(&mesh, &sys, &source).unwrap();
        let div = sys.div_block.as_ref().unwrap().mul_vec(sol.flux.as_ref().unwrap());
        let load = function_load(&mesh, SpaceKind::Rt0P0, &source).unwrap();
        let worst = div.iter().zip(&load).map(|(d, f)| (d + f).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn discrete_solution_operator_is_self_adjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for kind in [SpaceKind::P1, SpaceKind::P1nc] {
            let mesh = build_uniform_mesh(12).unwrap();
            let sys = assemble(&mesh, kind);
            let chol = CholeskyFactor::new(sys.stiffness.as_ref().unwrap()).unwrap();
            let n = sys.n_u();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut uf = sys.mass.mul_vec(&f);
            chol.solve_in_place(&mut uf);
            let mut ug = sys.mass.mul_vec(&g);
            chol.solve_in_place(&mut ug);
            let lhs = dot(&sys.mass.mul_vec(&uf), &g);
            let rhs = dot(&f, &sys.mass.mul_vec(&ug));
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{kind}");
            // positive semidefinite: (T f, f) ≥ 0
            assert!(dot(&sys.mass.mul_vec(&uf), &f) > 0.0);
            assert!(norm(&uf).is_finite());
        }
    }
}
