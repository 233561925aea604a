//! Run orchestration for the command-line front end: resolve a problem, run
//! the flow, write `trajectory.csv` / `trajectory.json` and `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsParams, PrimalDualState};
use crate::error::{Error, Result};
use crate::network::{simulate, NetworkRun, NetworkSpec, NetworkState};
use crate::ode::{
    continuation, estimate_rate, solve, IntegratorConfig, Method, RateEstimate, RateReference, Sample, Solution,
    StopReason, Trajectory, DEFAULT_WINDOW,
};
use crate::problem::{verify_gradients, ProblemSpec, ResidualReport};
use crate::prox::SmoothingParam;
use crate::registry::{self, ProblemInstance};
use crate::schema::parse_problem_file;
use crate::Vector;

/// Environment variable that takes precedence over `--out`.
pub const OUT_ENV: &str = "PALFLOW_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Centralized,
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

/// How a network run treats the given transformed multipliers `w'_i(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualInit {
    /// Remove the agent mean, which no stacked multiplier can produce and the
    /// flow never changes.
    Projected,
    /// Integrate from the values exactly as given.
    AsGiven,
}

fn parse_choice<T: Copy>(s: &str, what: &str, options: &[(&str, T)]) -> std::result::Result<T, String> {
    options.iter().find(|(name, _)| name.eq_ignore_ascii_case(s)).map(|&(_, v)| v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|o| o.0).collect();
        format!("unknown {what} {s:?}; expected one of {}", names.join(", "))
    })
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_choice(s, "mode", &[("centralized", Mode::Centralized), ("distributed", Mode::Distributed)])
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_choice(s, "format", &[("csv", Format::Csv), ("json", Format::Json), ("both", Format::Both)])
    }
}

impl FromStr for DualInit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_choice(s, "dual init", &[("projected", DualInit::Projected), ("as-given", DualInit::AsGiven)])
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_choice(s, "method", &[("rk4", Method::Rk4Fixed), ("rk45", Method::Rk45Adaptive)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Registry name or path to a JSON problem file.
    pub problem: String,
    pub mu: f64,
    /// One weight for every inequality, or one per inequality. `None` uses
    /// the problem's own weights, else 1.
    pub eta: Option<Vec<f64>>,
    pub dt: f64,
    /// `None` uses the problem's default horizon.
    pub t_end: Option<f64>,
    pub kkt_tol: f64,
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub mu_schedule: Option<Vec<f64>>,
    pub out_dir: PathBuf,
    pub format: Format,
    /// `None` runs the problem in its native mode.
    pub mode: Option<Mode>,
    pub record_every: usize,
    pub dual_init: DualInit,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ic = IntegratorConfig::default();
        RunConfig {
            problem: String::new(),
            mu: 0.1,
            eta: None,
            dt: ic.dt,
            t_end: None,
            kkt_tol: 1e-6,
            method: ic.method,
            abs_tol: ic.abs_tol,
            rel_tol: ic.rel_tol,
            mu_schedule: None,
            out_dir: PathBuf::from("palflow-out"),
            format: Format::Csv,
            mode: None,
            record_every: 100,
            dual_init: DualInit::Projected,
        }
    }
}

impl RunConfig {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method,
            dt: self.dt,
            t_end: self.t_end.unwrap_or(registry::DEFAULT_HORIZON),
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            record_every: self.record_every,
        }
    }

    /// The μ values to run, in order.
    pub fn schedule(&self) -> Vec<f64> {
        self.mu_schedule.clone().unwrap_or_else(|| vec![self.mu])
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator().validate()?;
        SmoothingParam::new(self.mu)?;
        if !(self.kkt_tol > 0.0) {
            return Err(Error::Parameter(format!("kkt_tol must be > 0, got {}", self.kkt_tol)));
        }
        if let Some(eta) = &self.eta {
            if eta.is_empty() || eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                return Err(Error::Parameter(format!("eta must be a nonempty list of positive numbers, got {eta:?}")));
            }
        }
        Ok(())
    }
}

/// `PALFLOW_OUT` if set and nonempty, else the command-line value.
pub fn resolve_out_dir(cli: Option<PathBuf>) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cli.unwrap_or_else(|| RunConfig::default().out_dir),
    }
}

/// Looks `name` up in the registry, falling back to a file path.
pub fn resolve_problem(name: &str) -> Result<ProblemInstance> {
    if registry::NAMES.contains(&name) {
        return registry::load(name);
    }
    let path = Path::new(name);
    if path.is_file() {
        return parse_problem_file(path);
    }
    registry::load(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub mu: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub kkt_total: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub nu: Vec<f64>,
    /// `w`, or the stacked `w'` of all agents in a network run.
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub mode: Mode,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_kkt: ResidualReport,
    /// The solution, or the agent average in a network run.
    pub x_star: Vec<f64>,
    /// Per-agent copies in a network run.
    pub agent_x: Option<Vec<Vec<f64>>>,
    pub consensus_error: Option<f64>,
    pub multipliers: Multipliers,
    pub rate_estimate: Option<RateEstimate>,
    pub rounds: Vec<RoundSummary>,
    pub steps: usize,
    pub clamp_events: usize,
    /// Smallest inequality multiplier over the run; `None` without inequalities.
    pub min_multiplier: Option<f64>,
    pub wall_time_s: f64,
    pub config: RunConfig,
}

impl RunSummary {
    /// 0 converged, 3 numerical fault, 4 horizon reached first.
    pub fn exit_code(&self) -> i32 {
        match (self.converged, self.stop_reason) {
            (true, _) => 0,
            (false, StopReason::NonFinite) => 3,
            (false, _) => 4,
        }
    }
}

/// Tabular trajectory shared by the CSV and JSON writers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        out
    }
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub table: Table,
}

fn eta_for(cfg: &RunConfig, r: usize, own: Option<&Vector>) -> Result<Vector> {
    match (&cfg.eta, own) {
        (Some(e), _) if e.len() == 1 => Ok(Vector::from_element(r, e[0])),
        (Some(e), _) if e.len() == r => Ok(Vector::from_column_slice(e)),
        (Some(e), _) => {
            Err(Error::Parameter(format!("eta has {} entries; give one value or one per inequality ({r})", e.len())))
        }
        (None, Some(own)) if own.len() == r => Ok(own.clone()),
        _ => Ok(Vector::from_element(r, 1.0)),
    }
}

fn named(prefix: &str, name: &str, count: usize) -> impl Iterator<Item = String> {
    let prefix = prefix.to_string();
    let name = name.to_string();
    (1..=count).map(move |k| format!("{prefix}{name}{k}"))
}

/// Runs one configuration and returns the summary plus the trajectory table,
/// without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let mut cfg = cfg.clone();
    cfg.t_end.get_or_insert_with(|| registry::default_horizon(&cfg.problem));
    let cfg = &cfg;
    cfg.validate()?;
    let instance = resolve_problem(&cfg.problem)?;
    solve_instance(instance, cfg)
}

/// Runs an already resolved problem. `cfg.problem` is only echoed.
pub fn solve_instance(instance: ProblemInstance, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let mode = cfg.mode.unwrap_or(if instance.is_distributed() { Mode::Distributed } else { Mode::Centralized });
    let mut out = match (instance, mode) {
        (ProblemInstance::Central { spec, state0, eta }, Mode::Centralized) => {
            run_central(cfg, &spec, state0.as_ref(), eta.as_ref())?
        }
        (ProblemInstance::Central { .. }, Mode::Distributed) => {
            return Err(Error::Parameter(format!(
                "{} is a centralized problem; distributed mode needs a network problem",
                cfg.problem
            )))
        }
        (ProblemInstance::Distributed { net, eta, .. }, Mode::Centralized) => {
            let spec = net.aggregate_problem()?;
            run_central(cfg, &spec, None, eta.as_ref())?
        }
        (ProblemInstance::Distributed { net, state0, eta }, Mode::Distributed) => {
            let mut state0 = state0;
            if cfg.dual_init == DualInit::Projected {
                state0.project_dual_to_range();
            }
            run_network(cfg, &net, &state0, eta.as_ref())?
        }
    };
    out.summary.wall_time_s = started.elapsed().as_secs_f64();
    Ok(out)
}

fn run_central(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    state0: Option<&PrimalDualState>,
    own_eta: Option<&Vector>,
) -> Result<RunOutput> {
    let params = DynamicsParams::new(SmoothingParam::new(cfg.mu)?, eta_for(cfg, spec.r(), own_eta)?)?;
    let icfg = cfg.integrator();
    let rounds: Vec<Solution> = match &cfg.mu_schedule {
        Some(schedule) => continuation(spec, schedule, &params, &icfg, cfg.kkt_tol, state0)?.rounds,
        None => vec![solve(spec, &params, &icfg, cfg.kkt_tol, state0)?],
    };
    let last = rounds.last().expect("at least one round");

    let mut columns = vec!["t".to_string()];
    columns.extend(named("", "x", spec.n()));
    columns.extend(named("", "lambda", spec.r()));
    columns.extend(named("", "nu", spec.s()));
    columns.extend(named("", "w", spec.m()));
    columns.push("kkt_total".into());
    let mut rows = Vec::new();
    let mut offset = 0.0;
    for (k, sol) in rounds.iter().enumerate() {
        for (j, s) in sol.trajectory.samples.iter().enumerate() {
            if k > 0 && j == 0 {
                continue; // same state as the previous round's last sample
            }
            let mut row = vec![offset + s.t];
            row.extend(s.state.to_flat());
            row.push(s.kkt_total);
            rows.push(row);
        }
        offset += sol.t_final;
    }

    let summary = RunSummary {
        problem: cfg.problem.clone(),
        mode: Mode::Centralized,
        converged: last.converged,
        stop_reason: last.stop_reason,
        final_kkt: last.residual,
        x_star: last.x_star.iter().cloned().collect(),
        agent_x: None,
        consensus_error: None,
        multipliers: Multipliers {
            lambda: last.multipliers.lambda.iter().cloned().collect(),
            nu: last.multipliers.nu.iter().cloned().collect(),
            w: last.multipliers.w.iter().cloned().collect(),
        },
        rate_estimate: last.rate_estimate,
        rounds: rounds
            .iter()
            .map(|s| RoundSummary {
                mu: s.mu.get(),
                converged: s.converged,
                stop_reason: s.stop_reason,
                kkt_total: s.residual.total,
                t_final: s.t_final,
            })
            .collect(),
        steps: rounds.iter().map(|s| s.trajectory.steps).sum(),
        clamp_events: rounds.iter().map(|s| s.trajectory.clamp_events).sum(),
        min_multiplier: (spec.r() > 0)
            .then(|| rounds.iter().map(|s| s.trajectory.min_multiplier).fold(f64::INFINITY, f64::min)),
        wall_time_s: 0.0,
        config: cfg.clone(),
    };
    Ok(RunOutput { summary, table: Table { columns, rows } })
}

/// Network runs viewed as stacked-state trajectories, for rate fitting.
fn stacked_trajectory(run: &NetworkRun) -> Trajectory {
    Trajectory::from_samples(
        run.samples
            .iter()
            .map(|s| Sample {
                t: s.t,
                state: stacked_state(&s.state),
                kkt_total: s.kkt_total,
                lyapunov: None,
                field_norm: f64::NAN,
            })
            .collect(),
    )
}

fn stacked_state(s: &NetworkState) -> PrimalDualState {
    PrimalDualState { x: s.stacked_x(), lambda: s.stacked_lambda(), nu: s.stacked_nu(), w: s.stacked_w(), t: 0.0 }
}

/// Runs the distributed flow once per μ of the schedule, warm-starting each
/// round from the previous final state and splitting `t_end` evenly.
pub fn run_network_rounds(
    net: &NetworkSpec,
    state0: &NetworkState,
    schedule: &[f64],
    eta: Vector,
    icfg: &IntegratorConfig,
    kkt_tol: f64,
) -> Result<Vec<(f64, NetworkRun)>> {
    if schedule.is_empty() {
        return Err(Error::Parameter("mu schedule is empty".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter(format!("mu schedule must be strictly decreasing, got {schedule:?}")));
    }
    let round_cfg = IntegratorConfig { t_end: icfg.t_end / schedule.len() as f64, ..icfg.clone() };
    let mut rounds: Vec<(f64, NetworkRun)> = Vec::new();
    let mut start = state0.clone();
    for &mu in schedule {
        let params = DynamicsParams::new(SmoothingParam::new(mu)?, eta.clone())?;
        let run = simulate(net, &start, &params, &round_cfg, kkt_tol)?;
        start = run.last().state.clone();
        rounds.push((mu, run));
    }
    Ok(rounds)
}

fn run_network(
    cfg: &RunConfig,
    net: &NetworkSpec,
    state0: &NetworkState,
    own_eta: Option<&Vector>,
) -> Result<RunOutput> {
    let eta = eta_for(cfg, net.r(), own_eta)?;
    let rounds = run_network_rounds(net, state0, &cfg.schedule(), eta, &cfg.integrator(), cfg.kkt_tol)?;
    let (_, last) = rounds.last().expect("at least one round");
    let final_state = &last.last().state;

    let na = net.num_agents();
    let mut columns = vec!["t".to_string()];
    for i in 0..na {
        columns.extend(named(&format!("a{}.", i + 1), "x", net.n()));
    }
    for i in 0..na {
        columns.extend(named(&format!("a{}.", i + 1), "lambda", net.lambda_block(i).len()));
    }
    for i in 0..na {
        columns.extend(named(&format!("a{}.", i + 1), "nu", net.nu_block(i).len()));
    }
    for i in 0..na {
        columns.extend(named(&format!("a{}.", i + 1), "w", net.n()));
    }
    columns.push("kkt_total".into());
    columns.push("consensus_error".into());
    let mut rows = Vec::new();
    let mut offset = 0.0;
    for (k, (_, run)) in rounds.iter().enumerate() {
        for (j, s) in run.samples.iter().enumerate() {
            if k > 0 && j == 0 {
                continue;
            }
            let mut row = vec![offset + s.t];
            row.extend(s.state.to_flat());
            row.push(s.kkt_total);
            row.push(s.consensus_error);
            rows.push(row);
        }
        offset += run.last().t;
    }

    let traj = stacked_trajectory(last);
    let rate_estimate = match net.known_optimum() {
        Some(x) => {
            let stacked = Vector::from_iterator(x.len() * na, (0..na).flat_map(|_| x.iter().cloned()));
            estimate_rate(&traj, &RateReference::Primal(stacked), DEFAULT_WINDOW).ok()
        }
        None => {
            let window = (DEFAULT_WINDOW.0, DEFAULT_WINDOW.1.min(0.95));
            estimate_rate(&traj, &RateReference::State(traj.last().state.clone()), window).ok()
        }
    };
    let mean = final_state.x.iter().fold(Vector::zeros(net.n()), |acc, x| acc + x) / na as f64;
    let summary = RunSummary {
        problem: cfg.problem.clone(),
        mode: Mode::Distributed,
        converged: last.converged,
        stop_reason: last.stop_reason,
        final_kkt: last.residual,
        x_star: mean.iter().cloned().collect(),
        agent_x: Some(final_state.x.iter().map(|x| x.iter().cloned().collect()).collect()),
        consensus_error: Some(final_state.consensus_error()),
        multipliers: Multipliers {
            lambda: final_state.stacked_lambda().iter().cloned().collect(),
            nu: final_state.stacked_nu().iter().cloned().collect(),
            w: final_state.stacked_w().iter().cloned().collect(),
        },
        rate_estimate,
        rounds: rounds
            .iter()
            .map(|(mu, run)| RoundSummary {
                mu: *mu,
                converged: run.converged,
                stop_reason: run.stop_reason,
                kkt_total: run.residual.total,
                t_final: run.last().t,
            })
            .collect(),
        steps: rounds.iter().map(|(_, r)| r.steps).sum(),
        clamp_events: rounds.iter().map(|(_, r)| r.clamp_events).sum(),
        min_multiplier: (net.r() > 0)
            .then(|| rounds.iter().map(|(_, r)| r.min_multiplier).fold(f64::INFINITY, f64::min)),
        wall_time_s: 0.0,
        config: cfg.clone(),
    };
    Ok(RunOutput { summary, table: Table { columns, rows } })
}

/// Writes the configured outputs into `cfg.out_dir`.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutput) -> Result<()> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        f.write_all(bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    };
    if matches!(cfg.format, Format::Csv | Format::Both) {
        write("trajectory.csv", out.table.to_csv().as_bytes())?;
    }
    if matches!(cfg.format, Format::Json | Format::Both) {
        let json = serde_json::to_vec(&out.table).map_err(|e| Error::Io(e.to_string()))?;
        write("trajectory.json", &json)?;
    }
    let summary = serde_json::to_vec_pretty(&out.summary).map_err(|e| Error::Io(e.to_string()))?;
    write("summary.json", &summary)
}

/// Executes and writes outputs; returns the summary and the exit code.
pub fn run(cfg: &RunConfig) -> Result<(RunSummary, i32)> {
    let out = execute(cfg)?;
    write_outputs(cfg, &out)?;
    let code = out.summary.exit_code();
    Ok((out.summary, code))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub problem: String,
    pub distributed: bool,
    pub n: usize,
    pub inequalities: usize,
    pub equalities: usize,
    pub points_checked: usize,
    pub max_gradient_error: f64,
    pub passed: bool,
}

/// Gradient tolerance used by `validate`.
pub const GRADIENT_TOL: f64 = 1e-6;

/// Parses a problem and checks every supplied gradient against central
/// differences at a fixed set of probe points.
pub fn validate_problem(problem: &str) -> Result<ValidationReport> {
    let instance = resolve_problem(problem)?;
    let (spec, distributed) = match &instance {
        ProblemInstance::Central { spec, .. } => (spec.clone(), false),
        ProblemInstance::Distributed { net, .. } => (net.stacked_problem()?, true),
    };
    let n = spec.n();
    let probes: Vec<Vector> = (0..6)
        .map(|k| Vector::from_fn(n, |i, _| (((i * 7 + k * 13) % 11) as f64 - 5.0) * 0.3 + 0.1 * k as f64))
        .collect();
    let mut worst: f64 = 0.0;
    for x in &probes {
        worst = worst.max(verify_gradients(&spec, x)?);
    }
    Ok(ValidationReport {
        problem: problem.to_string(),
        distributed,
        n,
        inequalities: spec.r(),
        equalities: spec.s(),
        points_checked: probes.len(),
        max_gradient_error: worst,
        passed: worst <= GRADIENT_TOL,
    })
}
