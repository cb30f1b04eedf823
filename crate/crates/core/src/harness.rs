//! Convergence studies against nested-mesh reference solutions or the Mittag–Leffler oracle,
//! and the reports they produce.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cq;
use crate::error::{Error, Result};
use crate::fespace::{flux_l2_error, l2_error, FeFunction, FluxFunction, FluxReference, Reference, SpaceKind};
use crate::oracle;
use crate::problem::ProblemCase;
use crate::stepper::{self, LinearSolverKind, RunConfig, RunOutcome};

pub const CSV_HEADER: &str = "fem,case,alpha,M,N,err_u_l2,rate_u,err_flux_l2,rate_flux,err_u_linf,fp_iters_max,wall_s";

/// A spatial convergence study: one run per ladder entry, compared with one reference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub alpha: f64,
    pub final_time: f64,
    pub space: SpaceKind,
    pub case: ProblemCase,
    pub ladder: Vec<usize>,
    /// Time steps of every ladder run.
    pub steps: usize,
    pub ref_mesh: usize,
    pub ref_steps: usize,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub linearized: bool,
    pub solver: LinearSolverKind,
}

pub const DEFAULT_LADDER: [usize; 4] = [8, 16, 32, 64];
pub const DEFAULT_STEPS: usize = 512;

impl StudyPlan {
    /// Defaults: `α = 0.5`, `T = 0.1`, ladder `{8, 16, 32, 64}`, `N = 512`, reference on the
    /// default reference protocol.
    pub fn new(space: SpaceKind, case: ProblemCase) -> Self {
        let ladder = DEFAULT_LADDER.to_vec();
        let steps = DEFAULT_STEPS;
        StudyPlan {
            alpha: 0.5,
            final_time: 0.1,
            space,
            case,
            ref_mesh: default_ref_mesh(&ladder),
            ref_steps: default_ref_steps(steps),
            ladder,
            steps,
            fp_tol: 1e-10,
            fp_max_iters: 50,
            linearized: false,
            solver: LinearSolverKind::Direct,
        }
    }

    pub fn run_config(&self, mesh: usize, steps: usize) -> RunConfig {
        let mut cfg = RunConfig::new(self.space, self.case, mesh, steps);
        cfg.alpha = self.alpha;
        cfg.final_time = self.final_time;
        cfg.fp_tol = self.fp_tol;
        cfg.fp_max_iters = self.fp_max_iters;
        cfg.linearized = self.linearized;
        cfg.solver = self.solver;
        cfg
    }

    pub fn reference_config(&self) -> RunConfig {
        self.run_config(self.ref_mesh, self.ref_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "mesh ladder must be strictly increasing, got {:?}",
                self.ladder
            )));
        }
        if let Some(&bad) = self.ladder.iter().find(|&&m| m == 0 || !self.ref_mesh.is_multiple_of(m)) {
            return Err(Error::InvalidConfig(format!(
                "ladder mesh {bad} does not divide the reference mesh {}; choose --ref-mesh as a multiple of every ladder entry",
                self.ref_mesh
            )));
        }
        self.reference_config().validate()
    }
}

/// Reference mesh used when none is given: four times the finest ladder mesh.
pub fn default_ref_mesh(ladder: &[usize]) -> usize {
    4 * ladder.iter().copied().max().unwrap_or(2)
}

/// Reference time steps used when none are given: the ladder's own step count, so that the
/// temporal error cancels in the comparison.
pub fn default_ref_steps(steps: usize) -> usize {
    steps
}

/// One line of a report. `None` fields are left blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub err_u_l2: Option<f64>,
    pub rate_u: Option<f64>,
    pub err_flux_l2: Option<f64>,
    pub rate_flux: Option<f64>,
    pub err_u_linf: Option<f64>,
    pub fp_iters_max: Option<usize>,
    pub wall_s: Option<f64>,
    /// Failure message of a run that did not complete.
    pub failure: Option<String>,
}

impl ReportRow {
    fn pending(m: Option<usize>, n: usize) -> Self {
        ReportRow {
            m,
            n,
            err_u_l2: None,
            rate_u: None,
            err_flux_l2: None,
            rate_flux: None,
            err_u_linf: None,
            fp_iters_max: None,
            wall_s: None,
            failure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    /// `p1`, `p1nc`, `rt0`, or `scalar` for temporal studies.
    pub fem: String,
    pub case: String,
    pub alpha: f64,
    pub final_time: f64,
    /// Reference run as `(M, N)`; absent for oracle comparisons.
    pub reference: Option<(usize, usize)>,
    pub version: String,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    pub fn u_errors(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.err_u_l2).collect()
    }

    pub fn u_rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_u).collect()
    }

    pub fn flux_rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_flux).collect()
    }

    /// Copy with the wall-clock column cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.wall_s = None);
        r
    }
}

fn log2_ratio(coarse: Option<f64>, fine: Option<f64>) -> Option<f64> {
    match (coarse, fine) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
        _ => None,
    }
}

fn fill_rates(rows: &mut [ReportRow]) {
    for i in 1..rows.len() {
        rows[i].rate_u = log2_ratio(rows[i - 1].err_u_l2, rows[i].err_u_l2);
        rows[i].rate_flux = log2_ratio(rows[i - 1].err_flux_l2, rows[i].err_flux_l2);
    }
}

fn compare(run: &RunOutcome, reference: &RunOutcome, row: &mut ReportRow) -> Result<()> {
    let u = FeFunction::new(&run.mesh, &run.system, &run.u);
    let r = FeFunction::new(&reference.mesh, &reference.system, &reference.u);
    let e = l2_error(&u, Reference::Discrete(r))?;
    row.err_u_l2 = Some(e.l2);
    row.err_u_linf = Some(e.linf);
    if let (Some(s), Some(sr)) = (&run.flux, &reference.flux) {
        row.err_flux_l2 = Some(flux_l2_error(
            &FluxFunction::new(&run.mesh, s),
            FluxReference::Discrete(FluxFunction::new(&reference.mesh, sr)),
        )?);
    }
    Ok(())
}

/// Runs the reference and every ladder entry, sequentially and in ladder order.
pub fn run_study(plan: &StudyPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let mut rows: Vec<ReportRow> = plan.ladder.iter().map(|&m| ReportRow::pending(Some(m), plan.steps)).collect();
    log::info!("reference run: {} case {} M={} N={}", plan.space, plan.case, plan.ref_mesh, plan.ref_steps);
    match stepper::solve(&plan.reference_config()) {
        Ok(reference) => {
            log::info!("reference finished in {:.1} s", reference.wall_seconds);
            for row in rows.iter_mut() {
                let m = row.m.expect("spatial rows carry a mesh size");
                log::info!("run M={m} N={}", plan.steps);
                let outcome = stepper::solve(&plan.run_config(m, plan.steps))
                    .and_then(|run| compare(&run, &reference, row).map(|_| run));
                match outcome {
                    Ok(run) => {
                        row.fp_iters_max = Some(run.fp_iters_max);
                        row.wall_s = Some(run.wall_seconds);
                        log::info!(
                            "M={m}: L2 error {:.3e} ({:.1} s)",
                            row.err_u_l2.unwrap_or(f64::NAN),
                            run.wall_seconds
                        );
                    }
                    Err(e) => {
                        log::error!("run M={m} failed: {e}");
                        row.failure = Some(e.to_string());
                    }
                }
            }
        }
        Err(e) => {
            log::error!("reference run failed: {e}");
            for row in rows.iter_mut() {
                row.failure = Some(format!("reference run failed: {e}"));
            }
        }
    }
    fill_rates(&mut rows);
    let complete = rows.iter().all(|r| r.failure.is_none());
    Ok(ConvergenceReport {
        metadata: ReportMetadata {
            fem: plan.space.to_string(),
            case: plan.case.to_string(),
            alpha: plan.alpha,
            final_time: plan.final_time,
            reference: Some((plan.ref_mesh, plan.ref_steps)),
            version: env!("CARGO_PKG_VERSION").to_string(),
            complete,
        },
        rows,
    })
}

/// Error of the scalar scheme for `∂_t^α u + λu = 0`, `u(0) = 1`, at `t = T` against
/// `E_α(-λ T^α)`, for each step count of the ladder.
pub fn run_temporal_study(alpha: f64, lambda: f64, final_time: f64, ladder: &[usize]) -> Result<ConvergenceReport> {
    cq::validate_alpha(alpha)?;
    if ladder.windows(2).any(|w| w[0] >= w[1]) || ladder.first() == Some(&0) {
        return Err(Error::InvalidConfig(format!(
            "step ladder must be positive and strictly increasing, got {ladder:?}"
        )));
    }
    let exact = oracle::mittag_leffler_neg(alpha, lambda * final_time.powf(alpha))?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let start = Instant::now();
        let mut row = ReportRow::pending(None, n);
        match cq::scalar_fode_solve(alpha, lambda, 1.0, final_time, n) {
            Ok(u) => {
                let err = (u[n] - exact).abs();
                row.err_u_l2 = Some(err);
                row.err_u_linf = Some(err);
                row.wall_s = Some(start.elapsed().as_secs_f64());
            }
            Err(e) => row.failure = Some(e.to_string()),
        }
        rows.push(row);
    }
    // rates keyed to doubling N
    fill_rates(&mut rows);
    let complete = rows.iter().all(|r| r.failure.is_none());
    Ok(ConvergenceReport {
        metadata: ReportMetadata {
            fem: "scalar".into(),
            case: format!("lambda={lambda}"),
            alpha,
            final_time,
            reference: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            complete,
        },
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Markdown => "markdown",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format '{s}' (expected csv, markdown or json)"))),
        }
    }
}

fn cell<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn to_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let md = &report.metadata;
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            md.fem,
            md.case,
            md.alpha,
            cell(r.m),
            r.n,
            cell(r.err_u_l2),
            cell(r.rate_u),
            cell(r.err_flux_l2),
            cell(r.rate_flux),
            cell(r.err_u_linf),
            cell(r.fp_iters_max),
            cell(r.wall_s.map(|w| format!("{w:.3}"))),
        );
    }
    out
}

pub fn to_markdown(report: &ConvergenceReport) -> String {
    let md = &report.metadata;
    let mut out = format!("### {} / case {} / alpha = {} / T = {}\n\n", md.fem, md.case, md.alpha, md.final_time);
    if let Some((m, n)) = md.reference {
        let _ = writeln!(out, "Reference solution: M = {m}, N = {n}.\n");
    }
    let has_flux = report.rows.iter().any(|r| r.err_flux_l2.is_some());
    let spatial = report.rows.iter().any(|r| r.m.is_some());
    let key = if spatial { "M" } else { "N" };
    out.push_str(&format!("| {key} | L2 error | Rate |"));
    if has_flux {
        out.push_str(" flux L2 error | Rate |");
    }
    out.push('\n');
    out.push_str(if has_flux { "|---|---|---|---|---|\n" } else { "|---|---|---|\n" });
    let sci = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2e}"));
    let rate = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.2}"));
    for r in &report.rows {
        let k = if spatial { cell(r.m) } else { r.n.to_string() };
        let _ = write!(out, "| {k} | {} | {} |", sci(r.err_u_l2), rate(r.rate_u));
        if has_flux {
            let _ = write!(out, " {} | {} |", sci(r.err_flux_l2), rate(r.rate_flux));
        }
        out.push('\n');
    }
    for r in report.rows.iter().filter(|r| r.failure.is_some()) {
        let _ = writeln!(
            out,
            "\nFailed ({key} = {}): {}",
            if spatial { cell(r.m) } else { r.n.to_string() },
            r.failure.as_deref().unwrap_or("")
        );
    }
    if !md.complete {
        out.push_str("\n**Incomplete study.**\n");
    }
    out
}

pub fn render(report: &ConvergenceReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => to_csv(report),
        Format::Markdown => to_markdown(report),
        Format::Json => serde_json::to_string_pretty(report)? + "\n",
    })
}

/// Writes the report to `path`.
pub fn emit(report: &ConvergenceReport, format: Format, path: &Path) -> Result<()> {
    fs::write(path, render(report, format)?)?;
    Ok(())
}

/// Full configuration of every run of a study, reference first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub plan: StudyPlan,
    pub reference: RunConfig,
    pub runs: Vec<RunConfig>,
}

pub fn manifest(plan: &StudyPlan) -> StudyManifest {
    StudyManifest {
        plan: plan.clone(),
        reference: plan.reference_config(),
        runs: plan.ladder.iter().map(|&m| plan.run_config(m, plan.steps)).collect(),
    }
}

pub fn write_manifest(plan: &StudyPlan, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&manifest(plan))? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(space: SpaceKind, case: ProblemCase) -> StudyPlan {
        let mut plan = StudyPlan::new(space, case);
        plan.ladder = vec![2, 4, 8];
        plan.steps = 16;
        plan.ref_mesh = 16;
        plan.ref_steps = 16;
        plan
    }

    #[test]
    fn defaults_follow_table_setup() {
        let plan = StudyPlan::new(SpaceKind::P1, ProblemCase::A);
        assert_eq!(plan.ladder, vec![8, 16, 32, 64]);
        assert_eq!((plan.alpha, plan.final_time, plan.steps), (0.5, 0.1, 512));
        plan.validate().unwrap();
    }

    #[test]
    fn ladder_must_nest_into_reference() {
        let mut plan = small_plan(SpaceKind::P1, ProblemCase::A);
        plan.ref_mesh = 12;
        assert!(matches!(plan.validate(), Err(Error::InvalidConfig(_))));
        plan.ref_mesh = 16;
        plan.ladder = vec![4, 2];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn study_is_deterministic_and_errors_decrease() {
        let plan = small_plan(SpaceKind::Rt0P0, ProblemCase::B);
        let a = run_study(&plan).unwrap();
        let b = run_study(&plan).unwrap();
        assert_eq!(a.without_timings(), b.without_timings());
        assert!(a.metadata.complete);
        assert_eq!(a.rows[0].rate_u, None);
        let errs: Vec<f64> = a.u_errors().into_iter().map(Option::unwrap).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs[2] > 0.0);
        assert!(a.rows.iter().all(|r| r.err_flux_l2.is_some()));
    }

    #[test]
    fn reference_against_itself_is_exact() {
        let plan = small_plan(SpaceKind::P1nc, ProblemCase::A);
        let reference = stepper::solve(&plan.reference_config()).unwrap();
        let mut row = ReportRow::pending(Some(16), 16);
        compare(&reference, &reference, &mut row).unwrap();
        assert_eq!(row.err_u_l2, Some(0.0));
    }

    #[test]
    fn failed_runs_are_flagged() {
        let mut plan = small_plan(SpaceKind::P1, ProblemCase::A);
        plan.fp_max_iters = 1;
        plan.fp_tol = 1e-300;
        let report = run_study(&plan).unwrap();
        assert!(!report.metadata.complete);
        assert!(report.rows.iter().all(|r| r.failure.is_some() && r.err_u_l2.is_none()));
        assert!(to_markdown(&report).contains("Incomplete"));
    }

    #[test]
    fn temporal_study_rates() {
        for alpha in [0.5, 1.0] {
            let report = run_temporal_study(alpha, 1.0, 1.0, &[64, 128, 256, 512]).unwrap();
            let rates = report.u_rates();
            assert_eq!(rates.len(), 3);
            for r in rates {
                assert!((r - 1.0).abs() <= 0.1, "alpha={alpha}: {r}");
            }
        }
    }

    #[test]
    fn csv_layout() {
        let mut report = run_temporal_study(0.5, 1.0, 1.0, &[]).unwrap();
        assert_eq!(to_csv(&report), format!("{CSV_HEADER}\n"));
        report = run_temporal_study(0.5, 1.0, 1.0, &[8]).unwrap();
        let csv = to_csv(&report);
        let line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 12);
        assert_eq!(&fields[..5], &["scalar", "lambda=1", "0.5", "", "8"]);
        assert_eq!(fields[6], "");
        assert_eq!(fields[7], "");
    }

    #[test]
    fn json_round_trip() {
        let report = run_study(&small_plan(SpaceKind::Rt0P0, ProblemCase::A)).unwrap();
        let text = render(&report, Format::Json).unwrap();
        let back: ConvergenceReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn emit_writes_files_and_reports_bad_paths() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_temporal_study(0.5, 1.0, 1.0, &[8, 16]).unwrap();
        for format in [Format::Csv, Format::Markdown, Format::Json] {
            let path = dir.path().join(format!("r.{format}"));
            emit(&report, format, &path).unwrap();
            assert_eq!(fs::read_to_string(&path).unwrap(), render(&report, format).unwrap());
        }
        let bad = dir.path().join("missing").join("r.csv");
        assert!(matches!(emit(&report, Format::Csv, &bad), Err(Error::Io(_))));
        let plan = small_plan(SpaceKind::P1, ProblemCase::A);
        let path = dir.path().join("manifest.json");
        write_manifest(&plan, &path).unwrap();
        let m: StudyManifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(m.runs.len(), 3);
        assert_eq!(m.reference.mesh, 16);
    }
}
