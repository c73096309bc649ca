//! Builds problem instances from a config, solves them and writes the results.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use ttkrylov_core::diagnostics::{verify_bounds, BoundOptions, BoundReport};
use ttkrylov_core::operators::*;
use ttkrylov_core::solver::{estimate_l2_norm_composed, tt_right_gmres, GmresOutcome, RoundingPolicy, StoppingCriterion};
use ttkrylov_core::{tt_norm, tt_scale, tt_to_dense, TTOperator, TTVector, TtError};

use crate::config::{ConfigError, Experiment, ExperimentConfig, Format};
use crate::emit;

pub const DENSE_BUDGET_VAR: &str = "TTKRYLOV_DENSE_BUDGET";
pub const DEFAULT_DENSE_BUDGET: usize = 1_000_000;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Core(TtError),
    Io(PathBuf, io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<TtError> for RunError {
    fn from(e: TtError) -> Self {
        RunError::Core(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Reads the dense budget from the environment.
pub fn dense_budget_from_env() -> Result<usize, ConfigError> {
    match std::env::var(DENSE_BUDGET_VAR) {
        Err(_) => Ok(DEFAULT_DENSE_BUDGET),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| ConfigError { field: DENSE_BUDGET_VAR.into(), message: format!("`{v}` is not a non-negative integer") }),
    }
}

/// One solver run of an experiment.
#[derive(Debug, Clone)]
pub struct SolveRun {
    pub label: String,
    pub outcome: GmresOutcome,
    pub preconditioned: bool,
    pub report: Option<BoundReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q: usize,
    pub tau: f64,
    pub max_rank: usize,
    pub ranks: Vec<usize>,
    pub opnorm_am: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<SolveRun>,
    pub sweep: Vec<SweepRow>,
    pub phases: Vec<Phase>,
}

impl ExperimentOutput {
    pub fn run(&self, label: &str) -> Option<&SolveRun> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn converged(&self) -> bool {
        self.runs.iter().all(|r| r.outcome.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub converged: bool,
    pub iterations: usize,
    pub breakdown: bool,
    pub stagnated: bool,
    pub final_eta_b: Option<f64>,
    pub final_eta_ab: Option<f64>,
    pub estimated_opnorm: f64,
    pub estimated_prec_opnorm: Option<f64>,
    pub bound_violations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub tt_core_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<String>,
    pub phases: Vec<Phase>,
    pub runs: Vec<RunSummary>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl RunManifest {
    /// Exit status rule: relaxed-compare is expected not to converge; prec-sweep does not solve.
    pub fn success(&self) -> bool {
        self.converged || matches!(self.config.experiment, Experiment::RelaxedCompare | Experiment::PrecSweep)
    }
}

struct Clock {
    phases: Vec<Phase>,
    last: Instant,
}

impl Clock {
    fn new() -> Self {
        Clock { phases: Vec::new(), last: Instant::now() }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.phases.push(Phase { name: name.into(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }
}

fn unit_grid(n: usize) -> Result<Grid1D, TtError> {
    Grid1D::new(n, 0.0, 1.0)
}

fn sym_grid(n: usize) -> Result<Grid1D, TtError> {
    Grid1D::new(n, -1.0, 1.0)
}

fn preconditioner(cfg: &ExperimentConfig, g: &Grid1D) -> Result<Option<TTOperator>, TtError> {
    if !cfg.precondition {
        return Ok(None);
    }
    let q = cfg.q.expect("validated");
    inv_laplacian_preconditioner(cfg.d, g, q, cfg.tau).map(Some)
}

fn normalised(inst: ProblemInstance) -> ProblemInstance {
    let nb = tt_norm(&inst.rhs);
    ProblemInstance { rhs: tt_scale(&inst.rhs, 1.0 / nb), ..inst }
}

fn attach(inst: ProblemInstance, m: Option<TTOperator>) -> Result<ProblemInstance, TtError> {
    match m {
        Some(m) => inst.with_preconditioner(m),
        None => Ok(inst),
    }
}

fn solve(cfg: &ExperimentConfig, label: &str, inst: &ProblemInstance, bounds: Option<bool>) -> Result<SolveRun, TtError> {
    let mut g = cfg.gmres();
    g.keep_iterates = bounds.is_some();
    let m = inst.preconditioner.as_ref();
    let outcome = tt_right_gmres(&inst.operator, m, &inst.rhs, None, &g)?;
    let report = match bounds {
        Some(same_operator) if !outcome.iterates.is_empty() => {
            let iters: Vec<usize> = outcome.trace.iter().filter(|r| !r.true_residual.is_nan()).map(|r| r.iter).collect();
            let opn = outcome.estimated_prec_opnorm.unwrap_or(outcome.estimated_opnorm);
            let opts = BoundOptions { same_operator, samples: cfg.norm_samples, seed: cfg.seed, inverse_norm: None };
            Some(verify_bounds(&inst.operator, m, &inst.rhs, &outcome.iterates, &iters, opn, &opts)?)
        }
        _ => None,
    };
    Ok(SolveRun { label: label.into(), outcome, preconditioned: m.is_some(), report })
}

/// Builds and solves every run of the experiment; no file output.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    cfg.validate()?;
    let mut clock = Clock::new();
    let mut runs = Vec::new();
    let mut sweep = Vec::new();
    let bounds = |same: bool| if cfg.bounds { Some(same) } else { None };
    let p = cfg.p.unwrap_or(1);
    match cfg.experiment {
        Experiment::Poisson => {
            let g = unit_grid(cfg.n)?;
            let inst = attach(poisson_problem(&g)?, preconditioner(cfg, &g)?)?;
            clock.lap("build");
            runs.push(solve(cfg, "poisson", &inst, None)?);
            clock.lap("solve");
        }
        Experiment::Convdiff => {
            let g = sym_grid(cfg.n)?;
            let inst = attach(convection_diffusion_problem(&g)?, preconditioner(cfg, &g)?)?;
            clock.lap("build");
            runs.push(solve(cfg, "convdiff", &inst, None)?);
            clock.lap("solve");
        }
        Experiment::ParamConvdiff | Experiment::HeatParam => {
            let g = sym_grid(cfg.n)?;
            let inst = if cfg.experiment == Experiment::ParamConvdiff {
                parametric_convdiff_problem(&g, &ParamSet::log(1.0, 10.0, p)?)?
            } else {
                heat_param_problem(&g, &ParamSet::uniform(0.0, 10.0, p)?)?
            };
            let m = match preconditioner(cfg, &g)? {
                Some(m) => Some(prepend_identity(p, &m)?),
                None => None,
            };
            let inst = attach(inst, m)?;
            clock.lap("build");
            runs.push(solve(cfg, cfg.experiment.name(), &inst, bounds(false))?);
            clock.lap("solve+diagnostics");
        }
        Experiment::MultiRhsPoisson | Experiment::MultiRhsConvdiff => {
            let base = if cfg.experiment == Experiment::MultiRhsPoisson {
                let g = unit_grid(cfg.n)?;
                attach(normalised(poisson_problem(&g)?), preconditioner(cfg, &g)?)?
            } else {
                let g = sym_grid(cfg.n)?;
                attach(normalised(convection_diffusion_problem(&g)?), preconditioner(cfg, &g)?)?
            };
            let inst = multi_rhs_problem(&base, p, cfg.rank_cap, cfg.seed)?;
            clock.lap("build");
            runs.push(solve(cfg, cfg.experiment.name(), &inst, bounds(true))?);
            clock.lap("solve+diagnostics");
        }
        Experiment::EigenRhs => {
            let g = unit_grid(cfg.n)?;
            let a = tt_neg_laplacian(cfg.d, &g)?;
            let triples = distinct_eigen_triples(&g, cfg.j + 1);
            if triples.len() < cfg.j + 1 {
                return Err(ConfigError {
                    field: "j".into(),
                    message: format!("only {} distinct eigenvalues on this grid", triples.len()),
                }
                .into());
            }
            let fast = laplacian_eigen_rhs(&g, &triples[..1])?;
            let slow = laplacian_eigen_rhs(&g, &triples[1..])?;
            let aio = ProblemInstance::new(prepend_identity(2, &a)?, all_in_one_rhs(&[fast.clone(), slow.clone()])?, "all-in-one")?;
            let fast = ProblemInstance::new(a.clone(), fast, "fast")?;
            let slow = ProblemInstance::new(a, slow, "slow")?;
            clock.lap("build");
            runs.push(solve(cfg, "fast", &fast, None)?);
            runs.push(solve(cfg, "slow", &slow, None)?);
            runs.push(solve(cfg, "all-in-one", &aio, bounds(true))?);
            clock.lap("solve+diagnostics");
        }
        Experiment::PrecSweep => {
            let g = unit_grid(cfg.n)?;
            let a = tt_neg_laplacian(cfg.d, &g)?;
            clock.lap("build");
            for &tau in &cfg.taus {
                for &q in &cfg.qs {
                    let m = inv_laplacian_preconditioner(cfg.d, &g, q, tau)?;
                    let opnorm_am = estimate_l2_norm_composed(&a, &m, cfg.norm_samples, cfg.seed)?;
                    sweep.push(SweepRow { q, tau, max_rank: m.max_rank(), ranks: m.ranks(), opnorm_am });
                }
            }
            clock.lap("sweep");
        }
        Experiment::RelaxedCompare => {
            let g = sym_grid(cfg.n)?;
            let q = cfg.q.expect("validated");
            let inst = convection_diffusion_problem(&g)?.with_preconditioner(inv_laplacian_preconditioner(cfg.d, &g, q, cfg.tau)?)?;
            clock.lap("build");
            let mut constant = cfg.clone();
            constant.rounding_policy = crate::config::Policy::Constant;
            runs.push(solve(&constant, "constant", &inst, None)?);
            let mut relaxed = cfg.gmres();
            relaxed.rounding_policy = RoundingPolicy::Relaxed;
            relaxed.stopping_criterion = StoppingCriterion::EtaTildeB;
            let outcome = tt_right_gmres(&inst.operator, inst.preconditioner.as_ref(), &inst.rhs, None, &relaxed)?;
            runs.push(SolveRun { label: "relaxed".into(), outcome, preconditioned: true, report: None });
            clock.lap("solve");
        }
    }
    Ok(ExperimentOutput { runs, sweep, phases: clock.phases })
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn write_file(path: &Path, text: &str, files: &mut Vec<String>) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RunError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, text).map_err(|e| RunError::Io(path.to_path_buf(), e))?;
    files.push(path.display().to_string());
    Ok(())
}

fn dense_csv(x: &TTVector, budget: usize) -> Result<String, TtError> {
    let t = tt_to_dense(x, budget)?;
    let mut s = String::from("value\n");
    for v in &t.data {
        s.push_str(&emit::fmt17(*v));
        s.push('\n');
    }
    Ok(s)
}

/// Writes traces, bound reports, sweep tables and the manifest of `out`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    dir: Option<&Path>,
    budget: usize,
    started: f64,
    warnings: Vec<String>,
) -> Result<RunManifest, RunError> {
    let t0 = Instant::now();
    let prefix = match dir {
        Some(d) => d.join(cfg.prefix()),
        None => PathBuf::from(cfg.prefix()),
    };
    let at = |suffix: &str| PathBuf::from(format!("{}{suffix}", prefix.display()));
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut files = Vec::new();
    for run in &out.runs {
        let tr = &run.outcome.trace;
        // single-run experiments drop the redundant label
        let tag = if run.label == cfg.experiment.name() { String::new() } else { format!("{}_", run.label) };
        match cfg.format {
            Format::Csv => {
                write_file(&at(&format!("{tag}trace.csv")), &emit::trace_csv(tr), &mut files)?;
                if let Some(rep) = &run.report {
                    write_file(&at(&format!("{tag}bounds.csv")), &emit::bounds_csv(tr, rep), &mut files)?;
                }
            }
            Format::Json => {
                let text = emit::trace_json(&run.label, tr, run.report.as_ref());
                write_file(&at(&format!("{tag}trace.json")), &text, &mut files)?;
            }
        }
        if cfg.dense_export {
            write_file(&at(&format!("{tag}solution.csv")), &dense_csv(&run.outcome.solution, budget)?, &mut files)?;
        }
    }
    if !out.sweep.is_empty() {
        let text = match cfg.format {
            Format::Csv => emit::sweep_csv(&out.sweep),
            Format::Json => emit::sweep_json(&out.sweep),
        };
        write_file(&at(&format!("sweep.{ext}")), &text, &mut files)?;
    }
    let manifest_path = at("manifest.json");
    files.push(manifest_path.display().to_string());
    let mut phases = out.phases.clone();
    phases.push(Phase { name: "write".into(), seconds: t0.elapsed().as_secs_f64() });
    let runs = out
        .runs
        .iter()
        .map(|r| {
            let last = r.outcome.trace.iter().rev().find(|x| !x.eta_b.is_nan());
            RunSummary {
                label: r.label.clone(),
                converged: r.outcome.converged,
                iterations: r.outcome.iterations,
                breakdown: r.outcome.breakdown,
                stagnated: r.outcome.stagnated,
                final_eta_b: last.map(|x| x.eta_b),
                final_eta_ab: last.map(|x| if r.preconditioned { x.eta_amb } else { x.eta_ab }),
                estimated_opnorm: r.outcome.estimated_opnorm,
                estimated_prec_opnorm: r.outcome.estimated_prec_opnorm,
                bound_violations: r.report.as_ref().map(|rep| rep.violations.len()),
            }
        })
        .collect();
    let manifest = RunManifest {
        config: cfg.clone(),
        tt_core_version: ttkrylov_core::VERSION.into(),
        started_unix: started,
        finished_unix: unix_now(),
        files,
        phases,
        runs,
        converged: out.converged(),
        warnings,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    let mut sink = Vec::new();
    write_file(&manifest_path, &text, &mut sink)?;
    Ok(manifest)
}

/// Validates, solves, writes every file; the manifest lists them all.
pub fn run_experiment(cfg: &ExperimentConfig, dir: Option<&Path>, budget: usize) -> Result<RunManifest, RunError> {
    let started = unix_now();
    let warnings = cfg.warnings();
    let out = execute(cfg)?;
    write_outputs(cfg, &out, dir, budget, started, warnings)
}
