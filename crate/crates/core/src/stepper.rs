//! Fully discrete time stepping.
//!
//! With `c = τ^{-α}` and `s_k = Σ_{j≤k} b_j`, step `n` of the primal scheme solves
//!
//! `(c b_0 M + K) Uⁿ = c M (s_{n-1} U⁰ - Σ_{j=1}^{n-1} b_{n-j} U^j) + F(Uⁿ)`,
//!
//! which is the backward Euler convolution quadrature applied to `Uⁿ - U⁰`. The mixed scheme
//! replaces `K Uⁿ` by `-B Σⁿ` with `A Σⁿ + Bᵀ Uⁿ = 0`. Because the P0 mass matrix is diagonal,
//! the mixed system is reduced to an SPD Schur complement in the flux.
//!
//! The implicit source `F(Uⁿ)` is resolved by Picard iteration started from `U^{n-1}`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cq::{self, CqWeights};
use crate::error::{Error, Result};
use crate::fespace::{assemble, nonlinear_load, project_l2, FemSystem, SpaceKind};
use crate::mesh::{build_uniform_mesh, Mesh};
use crate::problem::{Nonlinearity, ProblemCase};
use crate::sparse::{conjugate_gradient, norm, CholeskyFactor, CsrMatrix};

/// Linear solver used inside each fixed-point iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolverKind {
    /// Sparse Cholesky, factorized once per run.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients, warm-started from the previous step.
    Cg,
}

const CG_TOLERANCE: f64 = 1e-12;
/// Consecutive growing updates that count as divergence.
const GROWTH_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub final_time: f64,
    pub steps: usize,
    pub mesh: usize,
    pub space: SpaceKind,
    pub case: ProblemCase,
    /// Defaults to the source term of `case`.
    pub source: Nonlinearity,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    /// Evaluate the source at `U^{n-1}` instead of iterating.
    pub linearized: bool,
    pub solver: LinearSolverKind,
}

impl RunConfig {
    pub fn new(space: SpaceKind, case: ProblemCase, mesh: usize, steps: usize) -> Self {
        RunConfig {
            alpha: 0.5,
            final_time: 0.1,
            steps,
            mesh,
            space,
            case,
            source: case.nonlinearity(),
            fp_tol: 1e-10,
            fp_max_iters: 50,
            linearized: false,
            solver: LinearSolverKind::Direct,
        }
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps.max(1) as f64
    }

    /// `τ^α L`, the heuristic contraction guard.
    pub fn guard(&self) -> f64 {
        self.tau().powf(self.alpha) * self.source.lipschitz()
    }

    pub fn validate(&self) -> Result<()> {
        cq::validate_alpha(self.alpha)?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return bad(format!("final time must be positive, got {}", self.final_time));
        }
        if self.mesh == 0 {
            return bad("mesh parameter M must be at least 1".into());
        }
        if !(self.fp_tol > 0.0) {
            return bad(format!("fixed-point tolerance must be positive, got {}", self.fp_tol));
        }
        if self.fp_max_iters == 0 {
            return bad("at least one fixed-point iteration is required".into());
        }
        Ok(())
    }
}

/// Evolving solution of one run.
#[derive(Debug, Clone)]
pub struct RunState {
    /// `U⁰..Uⁿ`
    pub history: Vec<Vec<f64>>,
    /// `Σ¹..Σⁿ` (mixed only).
    pub flux: Vec<Vec<f64>>,
    /// Fixed-point iterations of steps `1..=n`.
    pub fp_iterations: Vec<usize>,
}

impl RunState {
    pub fn step(&self) -> usize {
        self.history.len() - 1
    }

    pub fn current(&self) -> &[f64] {
        self.history.last().expect("history holds at least U⁰")
    }

    pub fn current_flux(&self) -> Option<&[f64]> {
        self.flux.last().map(Vec::as_slice)
    }
}

/// Diagnostics of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    /// `‖U^{n,k+1} - U^{n,k}‖` per iteration.
    pub updates: Vec<f64>,
    /// `‖A Σⁿ + Bᵀ Uⁿ‖` (mixed only).
    pub constraint_residual: Option<f64>,
}

impl StepReport {
    /// Successive update ratios `‖δ^{k+1}‖ / ‖δ^k‖`.
    pub fn update_ratios(&self) -> Vec<f64> {
        self.updates.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

enum Operator {
    Primal {
        matrix: CsrMatrix,
        factor: Option<CholeskyFactor>,
    },
    Mixed {
        /// `A + Bᵀ D⁻¹ B` with `D = c b_0 M0`.
        schur: CsrMatrix,
        factor: Option<CholeskyFactor>,
        d_inv: Vec<f64>,
    },
}

/// Time stepper for one space on one mesh.
pub struct Stepper<'a> {
    mesh: &'a Mesh,
    system: &'a FemSystem,
    config: RunConfig,
    weights: CqWeights,
    sums: Vec<f64>,
    operator: Operator,
}

impl<'a> Stepper<'a> {
    pub fn new(mesh: &'a Mesh, system: &'a FemSystem, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        if mesh.m() != config.mesh || system.kind() != config.space {
            return Err(Error::InvalidConfig("mesh or space does not match the run configuration".into()));
        }
        let weights = cq::weights(config.alpha, config.steps, config.tau())?;
        let sums = weights.partial_sums();
        let shift = weights.scale() * weights.b(0);
        let direct = config.solver == LinearSolverKind::Direct;
        let operator = match system.kind() {
            SpaceKind::P1 | SpaceKind::P1nc => {
                let k = system.stiffness.as_ref().expect("primal systems carry a stiffness matrix");
                let matrix = k.linear_combination(1.0, &system.mass, shift);
                let factor = if direct { Some(CholeskyFactor::new(&matrix)?) } else { None };
                Operator::Primal { matrix, factor }
            }
            SpaceKind::Rt0P0 => {
                let a = system.flux_mass.as_ref().expect("mixed systems carry a flux mass");
                let b = system.div_block.as_ref().expect("mixed systems carry a divergence block");
                let d_inv: Vec<f64> = system.mass.diag().iter().map(|m| 1.0 / (shift * m)).collect();
                let schur = a.linear_combination(1.0, &b.weighted_gram(&d_inv), 1.0);
                let factor = if direct { Some(CholeskyFactor::new(&schur)?) } else { None };
                Operator::Mixed { schur, factor, d_inv }
            }
        };
        let guard = config.guard();
        if guard >= 1.0 {
            log::warn!("tau^alpha * L = {guard:.3} >= 1: the fixed-point iteration may not contract");
        }
        Ok(Stepper { mesh, system, config: config.clone(), weights, sums, operator })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn weights(&self) -> &CqWeights {
        &self.weights
    }

    /// `U⁰ = P_h u0` for the configured case.
    pub fn initial_state(&self) -> Result<RunState> {
        let u0 = project_l2(self.mesh, self.system, &self.config.case.initial_data())?;
        self.state_from(u0)
    }

    /// Starts from given coefficients.
    pub fn state_from(&self, u0: Vec<f64>) -> Result<RunState> {
        if u0.len() != self.system.n_u() {
            return Err(Error::DimensionMismatch { expected: self.system.n_u(), got: u0.len() });
        }
        let mut history = Vec::with_capacity(self.config.steps + 1);
        history.push(u0);
        Ok(RunState { history, flux: Vec::new(), fp_iterations: Vec::new() })
    }

    /// History part of the right-hand side of step `n = state.step() + 1`.
    fn history_rhs(&self, state: &RunState) -> Vec<f64> {
        let n = state.step() + 1;
        let mut h: Vec<f64> = state.history[0].iter().map(|x| self.sums[n - 1] * x).collect();
        for j in 1..n {
            let b = self.weights.b(n - j);
            for (hi, uj) in h.iter_mut().zip(&state.history[j]) {
                *hi -= b * uj;
            }
        }
        let mut rhs = self.system.mass.mul_vec(&h);
        let c = self.weights.scale();
        rhs.iter_mut().for_each(|r| *r *= c);
        rhs
    }

    /// Solves the step operator for right-hand side `g`; returns `(U, Σ)`.
    fn linear_solve(
        &self,
        g: &[f64],
        guess: &[f64],
        flux_guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        match &self.operator {
            Operator::Primal { matrix, factor } => {
                let mut u = match factor {
                    Some(f) => {
                        let mut u = g.to_vec();
                        f.solve_in_place(&mut u);
                        u
                    }
                    None => {
                        let mut u = guess.to_vec();
                        conjugate_gradient(matrix, g, &mut u, CG_TOLERANCE, 10 * g.len() + 100)?;
                        u
                    }
                };
                check_finite(&mut u)?;
                Ok((u, None))
            }
            Operator::Mixed { schur, factor, d_inv } => {
                let b = self.system.div_block.as_ref().expect("mixed systems carry a divergence block");
                let scaled: Vec<f64> = g.iter().zip(d_inv).map(|(g, d)| -g * d).collect();
                let rhs = b.mul_transpose_vec(&scaled);
                let mut sigma = match factor {
                    Some(f) => {
                        let mut s = rhs;
                        f.solve_in_place(&mut s);
                        s
                    }
                    None => {
                        let mut s = flux_guess.map_or_else(|| vec![0.0; rhs.len()], <[f64]>::to_vec);
                        conjugate_gradient(schur, &rhs, &mut s, CG_TOLERANCE, 10 * rhs.len() + 100)?;
                        s
                    }
                };
                check_finite(&mut sigma)?;
                let bs = b.mul_vec(&sigma);
                let u = g.iter().zip(&bs).zip(d_inv).map(|((g, bs), d)| d * (g + bs)).collect();
                Ok((u, Some(sigma)))
            }
        }
    }

    fn source_load(&self, u: &[f64]) -> Result<Vec<f64>> {
        nonlinear_load(self.mesh, self.system, &self.config.source, u)
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &mut RunState) -> Result<StepReport> {
        let n = state.step() + 1;
        if n > self.config.steps {
            return Err(Error::InvalidConfig(format!("step {n} exceeds the configured {} steps", self.config.steps)));
        }
        let base = self.history_rhs(state);
        let with_source = |f: Vec<f64>| -> Vec<f64> { base.iter().zip(f).map(|(b, f)| b + f).collect() };
        let prev = state.current().to_vec();
        let prev_flux = state.current_flux().map(<[f64]>::to_vec);

        let single = self.config.source.is_constant() || self.config.linearized;
        let mut updates = Vec::new();
        let (u, sigma) = if single {
            let g = with_source(self.source_load(&prev)?);
            self.linear_solve(&g, &prev, prev_flux.as_deref())?
        } else {
            let mut u = prev;
            let mut sigma = prev_flux;
            let mut growth = 0;
            let mut converged = false;
            let mut last_rel = f64::INFINITY;
            for k in 1..=self.config.fp_max_iters {
                let g = with_source(self.source_load(&u)?);
                let (next, next_sigma) = self.linear_solve(&g, &u, sigma.as_deref())?;
                let delta: f64 = norm(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
                let scale = norm(&next);
                last_rel = if scale > 0.0 { delta / scale } else { delta };
                if updates.last().is_some_and(|&d| delta > d) {
                    growth += 1;
                } else {
                    growth = 0;
                }
                updates.push(delta);
                u = next;
                sigma = next_sigma;
                if last_rel <= self.config.fp_tol {
                    converged = true;
                    break;
                }
                if growth >= GROWTH_LIMIT {
                    return Err(Error::FixedPointDivergence {
                        step: n,
                        iterations: k,
                        last_update: last_rel,
                        guard: self.config.guard(),
                        reason: "update grew for 3 consecutive iterations",
                    });
                }
            }
            if !converged {
                return Err(Error::FixedPointDivergence {
                    step: n,
                    iterations: self.config.fp_max_iters,
                    last_update: last_rel,
                    guard: self.config.guard(),
                    reason: "maximum number of iterations reached",
                });
            }
            (u, sigma)
        };

        let iterations = updates.len().max(1);
        let constraint_residual = sigma.as_ref().map(|s| self.constraint_residual(&u, s));
        state.history.push(u);
        if let Some(s) = sigma {
            state.flux.push(s);
        }
        state.fp_iterations.push(iterations);
        Ok(StepReport { iterations, updates, constraint_residual })
    }

    /// `‖A Σ + Bᵀ U‖`
    pub fn constraint_residual(&self, u: &[f64], sigma: &[f64]) -> f64 {
        match (&self.system.flux_mass, &self.system.div_block) {
            (Some(a), Some(b)) => {
                let mut r = a.mul_vec(sigma);
                for (ri, bu) in r.iter_mut().zip(b.mul_transpose_vec(u)) {
                    *ri += bu;
                }
                norm(&r)
            }
            _ => 0.0,
        }
    }

    /// Runs all remaining steps, returning the per-step reports.
    pub fn run(&self, state: &mut RunState) -> Result<Vec<StepReport>> {
        let mut reports = Vec::with_capacity(self.config.steps);
        while state.step() < self.config.steps {
            reports.push(self.step(state)?);
        }
        Ok(reports)
    }
}

fn check_finite(v: &mut [f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::LinearSolver("non-finite solution of the step system".into()))
    }
}

/// Final solution of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub mesh: Mesh,
    pub system: FemSystem,
    pub u: Vec<f64>,
    pub flux: Option<Vec<f64>>,
    pub fp_iters_max: usize,
    pub max_constraint_residual: Option<f64>,
    pub wall_seconds: f64,
}

/// Sets up the discrete problem from `config` and runs every step.
pub fn solve(config: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    config.validate()?;
    let mesh = build_uniform_mesh(config.mesh)?;
    let system = assemble(&mesh, config.space);
    let (u, flux, fp_iters_max, max_constraint_residual) = {
        let stepper = Stepper::new(&mesh, &system, config)?;
        let mut state = stepper.initial_state()?;
        let reports = stepper.run(&mut state)?;
        let fp = state.fp_iterations.iter().copied().max().unwrap_or(0);
        let res = reports.iter().filter_map(|r| r.constraint_residual).reduce(f64::max);
        let flux = state.flux.pop();
        let u = state.history.pop().expect("history holds at least U⁰");
        (u, flux, fp, res)
    };
    Ok(RunOutcome {
        mesh,
        system,
        u,
        flux,
        fp_iters_max,
        max_constraint_residual,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_single_mode;
    use crate::problem::InitialData;
    use crate::sparse::{dot, LuFactor, TripletBuilder};

    fn setup(kind: SpaceKind, m: usize) -> (Mesh, FemSystem) {
        let mesh = build_uniform_mesh(m).unwrap();
        let sys = assemble(&mesh, kind);
        (mesh, sys)
    }

    fn l2(sys: &FemSystem, u: &[f64]) -> f64 {
        dot(u, &sys.mass.mul_vec(u)).sqrt()
    }

    #[test]
    fn zero_steps_return_projection() {
        let cfg = RunConfig::new(SpaceKind::P1, ProblemCase::A, 4, 0);
        let out = solve(&cfg).unwrap();
        let expected = project_l2(&out.mesh, &out.system, &InitialData::CaseA).unwrap();
        assert_eq!(out.u, expected);
        assert_eq!(out.fp_iters_max, 0);
    }

    #[test]
    fn constants_are_preserved_without_diffusion() {
        for kind in [SpaceKind::P1, SpaceKind::P1nc] {
            let (mesh, mut sys) = setup(kind, 4);
            let n = sys.n_u();
            sys.stiffness = Some(CsrMatrix::zeros(n, n));
            let mut cfg = RunConfig::new(kind, ProblemCase::Linear, 4, 40);
            cfg.alpha = 0.3;
            let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
            let u0: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).sin()).collect();
            let mut state = stepper.state_from(u0.clone()).unwrap();
            stepper.run(&mut state).unwrap();
            for u in &state.history {
                let dev = u.iter().zip(&u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(dev <= 1e-13, "{kind}: {dev:e}");
            }
        }
    }

    /// Classical backward Euler for `M u' + K u = F(u)` with Picard iteration.
    fn classical_primal(
        sys: &FemSystem,
        mesh: &Mesh,
        source: Nonlinearity,
        u0: &[f64],
        tau: f64,
        steps: usize,
    ) -> Vec<Vec<f64>> {
        let k = sys.stiffness.as_ref().unwrap();
        let op = k.linear_combination(1.0, &sys.mass, 1.0 / tau);
        let lu = LuFactor::new(&op).unwrap();
        let mut out = vec![u0.to_vec()];
        for _ in 0..steps {
            let prev = out.last().unwrap().clone();
            let base: Vec<f64> = sys.mass.mul_vec(&prev).iter().map(|x| x / tau).collect();
            let mut u = prev;
            for _ in 0..100 {
                let f = nonlinear_load(mesh, sys, &source, &u).unwrap();
                let mut next: Vec<f64> = base.iter().zip(&f).map(|(a, b)| a + b).collect();
                lu.solve_in_place(&mut next).unwrap();
                let d = norm(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
                u = next;
                if d <= 1e-15 * norm(&u) {
                    break;
                }
            }
            out.push(u);
        }
        out
    }

    /// Classical backward Euler for the mixed system, solving the full saddle matrix.
    fn classical_mixed(
        sys: &FemSystem,
        mesh: &Mesh,
        source: Nonlinearity,
        u0: &[f64],
        tau: f64,
        steps: usize,
    ) -> Vec<Vec<f64>> {
        let a = sys.flux_mass.as_ref().unwrap();
        let b = sys.div_block.as_ref().unwrap();
        let (ne, nt) = (sys.n_flux(), sys.n_u());
        let mut t = TripletBuilder::new(ne + nt, ne + nt);
        for (i, j, v) in a.triplets() {
            t.push(i, j, v);
        }
        for (i, j, v) in b.triplets() {
            t.push(j, ne + i, v);
            t.push(ne + i, j, -v);
        }
        for (i, j, v) in sys.mass.triplets() {
            t.push(ne + i, ne + j, v / tau);
        }
        let lu = LuFactor::new(&t.build()).unwrap();
        let mut out = vec![u0.to_vec()];
        for _ in 0..steps {
            let prev = out.last().unwrap().clone();
            let base: Vec<f64> = sys.mass.mul_vec(&prev).iter().map(|x| x / tau).collect();
            let mut u = prev;
            for _ in 0..100 {
                let f = nonlinear_load(mesh, sys, &source, &u).unwrap();
                let mut x = vec![0.0; ne];
                x.extend(base.iter().zip(&f).map(|(a, b)| a + b));
                lu.solve_in_place(&mut x).unwrap();
                let next = x.split_off(ne);
                let d = norm(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
                u = next;
                if d <= 1e-15 * norm(&u) {
                    break;
                }
            }
            out.push(u);
        }
        out
    }

    #[test]
    fn first_order_reduces_to_backward_euler() {
        for kind in [SpaceKind::P1, SpaceKind::P1nc, SpaceKind::Rt0P0] {
            for source in [Nonlinearity::Zero, Nonlinearity::SqrtOnePlusSquare] {
                let (mesh, sys) = setup(kind, 6);
                let mut cfg = RunConfig::new(kind, ProblemCase::A, 6, 20);
                cfg.alpha = 1.0;
                cfg.source = source;
                cfg.fp_tol = 1e-15;
                let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
                let mut state = stepper.initial_state().unwrap();
                stepper.run(&mut state).unwrap();
                let u0 = state.history[0].clone();
                let reference = if kind.is_mixed() {
                    classical_mixed(&sys, &mesh, source, &u0, cfg.tau(), cfg.steps)
                } else {
                    classical_primal(&sys, &mesh, source, &u0, cfg.tau(), cfg.steps)
                };
                for (a, b) in state.history.iter().zip(&reference) {
                    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    assert!(diff <= 1e-12, "{kind} {source:?}: {diff:e}");
                }
            }
        }
    }

    /// Smallest generalized eigenpair of `(K, M)` by inverse iteration.
    fn lowest_mode(sys: &FemSystem, start: Vec<f64>) -> (f64, Vec<f64>) {
        let chol = CholeskyFactor::new(sys.stiffness.as_ref().unwrap()).unwrap();
        let mut v = start;
        for _ in 0..80 {
            let mut w = sys.mass.mul_vec(&v);
            chol.solve_in_place(&mut w);
            let s = l2(sys, &w);
            v = w.iter().map(|x| x / s).collect();
        }
        let k = sys.stiffness.as_ref().unwrap();
        (dot(&v, &k.mul_vec(&v)), v)
    }

    #[test]
    fn eigenmode_tracks_scalar_solution() {
        for kind in [SpaceKind::P1, SpaceKind::P1nc] {
            let (mesh, sys) = setup(kind, 8);
            let start = project_l2(&mesh, &sys, &InitialData::Sine { k: 1, l: 1 }).unwrap();
            let (lambda, v) = lowest_mode(&sys, start);
            assert!((lambda - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1.0);
            let mut cfg = RunConfig::new(kind, ProblemCase::Linear, 8, 64);
            cfg.alpha = 0.6;
            let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
            let mut state = stepper.state_from(v.clone()).unwrap();
            stepper.run(&mut state).unwrap();
            let scalar = cq::scalar_fode_solve(0.6, lambda, 1.0, cfg.final_time, cfg.steps).unwrap();
            for (u, a) in state.history.iter().zip(&scalar) {
                let dev = u.iter().zip(&v).map(|(x, y)| (x - a * y).abs()).fold(0.0, f64::max);
                assert!(dev <= 1e-8, "{kind}: {dev:e}");
            }
            assert!(l2(&sys, state.current()) <= l2(&sys, &state.history[0]));
        }
    }

    #[test]
    fn mixed_constraint_holds_every_step() {
        for case in [ProblemCase::A, ProblemCase::B] {
            let mut cfg = RunConfig::new(SpaceKind::Rt0P0, case, 8, 32);
            cfg.alpha = 0.5;
            let (mesh, sys) = setup(SpaceKind::Rt0P0, 8);
            let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
            let mut state = stepper.initial_state().unwrap();
            for r in stepper.run(&mut state).unwrap() {
                assert!(r.constraint_residual.unwrap() <= 1e-10);
            }
            assert_eq!(state.flux.len(), 32);
        }
    }

    #[test]
    fn linear_scheme_is_dissipative() {
        for kind in [SpaceKind::P1, SpaceKind::P1nc, SpaceKind::Rt0P0] {
            let cfg = RunConfig::new(kind, ProblemCase::Linear, 8, 64);
            let (mesh, sys) = setup(kind, 8);
            let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
            let mut state = stepper.initial_state().unwrap();
            stepper.run(&mut state).unwrap();
            let norms: Vec<f64> = state.history.iter().map(|u| l2(&sys, u)).collect();
            for w in norms.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "{kind}");
            }
        }
    }

    #[test]
    fn fixed_point_contracts_under_guard() {
        for kind in [SpaceKind::P1, SpaceKind::Rt0P0] {
            let mut cfg = RunConfig::new(kind, ProblemCase::B, 8, 16);
            cfg.final_time = 1.0;
            cfg.source = Nonlinearity::Identity;
            assert!(cfg.guard() <= 0.5);
            let (mesh, sys) = setup(kind, 8);
            let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
            let mut state = stepper.initial_state().unwrap();
            for r in stepper.run(&mut state).unwrap() {
                assert!(r.iterations <= 25);
                assert!(r.update_ratios().iter().all(|&q| q < 1.0), "{:?}", r.updates);
            }
        }
    }

    #[test]
    fn divergence_is_detected() {
        let mut cfg = RunConfig::new(SpaceKind::P1, ProblemCase::A, 4, 2);
        cfg.final_time = 10.0;
        cfg.source = Nonlinearity::Custom { f: |u| 400.0 * u, lipschitz: 400.0 };
        let err = solve(&cfg).unwrap_err();
        match err {
            Error::FixedPointDivergence { step, guard, .. } => {
                assert_eq!(step, 1);
                assert!(guard > 1.0);
            }
            other => panic!("unexpected {other}"),
        }
        cfg.source = Nonlinearity::SqrtOnePlusSquare;
        cfg.fp_max_iters = 1;
        cfg.fp_tol = 1e-300;
        assert!(matches!(solve(&cfg), Err(Error::FixedPointDivergence { iterations: 1, .. })));
    }

    #[test]
    fn conjugate_gradients_agree_with_direct() {
        for kind in [SpaceKind::P1, SpaceKind::Rt0P0] {
            let mut cfg = RunConfig::new(kind, ProblemCase::A, 8, 8);
            let direct = solve(&cfg).unwrap();
            cfg.solver = LinearSolverKind::Cg;
            let cg = solve(&cfg).unwrap();
            let diff = direct.u.iter().zip(&cg.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-10, "{kind}: {diff:e}");
        }
    }

    #[test]
    fn linearized_variant_is_close() {
        let mut cfg = RunConfig::new(SpaceKind::P1, ProblemCase::A, 8, 64);
        let full = solve(&cfg).unwrap();
        cfg.linearized = true;
        let lin = solve(&cfg).unwrap();
        assert_eq!(lin.fp_iters_max, 1);
        let diff = full.u.iter().zip(&lin.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff > 0.0 && diff < 1e-3, "{diff:e}");
    }

    #[test]
    fn temporal_rate_is_first_order() {
        let (mesh, sys) = setup(SpaceKind::P1, 8);
        let start = project_l2(&mesh, &sys, &InitialData::Sine { k: 1, l: 1 }).unwrap();
        let (lambda, v) = lowest_mode(&sys, start);
        let exact = crate::oracle::mittag_leffler_neg(0.5, lambda * 0.1f64.sqrt()).unwrap();
        let errors: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&n| {
                let cfg = RunConfig::new(SpaceKind::P1, ProblemCase::Linear, 8, n);
                let stepper = Stepper::new(&mesh, &sys, &cfg).unwrap();
                let mut state = stepper.state_from(v.clone()).unwrap();
                stepper.run(&mut state).unwrap();
                let amp = dot(state.current(), &sys.mass.mul_vec(&v));
                (amp - exact).abs()
            })
            .collect();
        for w in errors.windows(2) {
            let r = (w[0] / w[1]).log2();
            assert!((r - 1.0).abs() <= 0.15, "{errors:?}");
        }
        // the continuous mode amplitude is a sanity bound on the discrete one
        let cont = exact_single_mode(0.5, 1, 1, 0.1).unwrap();
        assert!((cont - exact).abs() < 1e-2);
    }

    #[test]
    fn solve_stays_bounded() {
        for kind in [SpaceKind::P1, SpaceKind::P1nc, SpaceKind::Rt0P0] {
            for case in [ProblemCase::A, ProblemCase::B] {
                let out = solve(&RunConfig::new(kind, case, 8, 32)).unwrap();
                assert!(out.u.iter().all(|x| x.is_finite()));
                let u0 = project_l2(&out.mesh, &out.system, &case.initial_data()).unwrap();
                // f(0) = 1 on the unit square has unit norm
                assert!(l2(&out.system, &out.u) <= 2.0 * (l2(&out.system, &u0) + 1.0));
            }
        }
    }

    #[test]
    fn invalid_configurations_rejected() {
        let mut cfg = RunConfig::new(SpaceKind::P1, ProblemCase::A, 4, 4);
        cfg.alpha = 1.5;
        assert!(matches!(solve(&cfg), Err(Error::InvalidConfig(_))));
        cfg.alpha = 0.5;
        cfg.mesh = 0;
        assert!(matches!(solve(&cfg), Err(Error::InvalidConfig(_))));
    }
}
