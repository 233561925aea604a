//! Time integration of the primal-dual flow, convergence detection, rate
//! estimation and μ-continuation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::{lyapunov_value, vector_field, DynamicsParams, PrimalDualState, StateLayout};
use crate::error::{Error, Result};
use crate::problem::{kkt_residual, KktPoint, ProblemSpec, ResidualReport};
use crate::prox::SmoothingParam;
use crate::Vector;

/// Multipliers in `[−NEG_TOL, 0)` after a step are roundoff and get clamped to 0.
/// Anything below `−NEG_TOL` is an integrator fault.
pub const NEG_TOL: f64 = 1e-12;

/// Smallest step the adaptive integrator will take.
pub const MIN_STEP: f64 = 1e-14;

/// Default rate-fit window as fractions of the trajectory's time span.
pub const DEFAULT_WINDOW: (f64, f64) = (0.3, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4Fixed,
    /// Dormand–Prince 5(4) with error control.
    Rk45Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step, or initial step for the adaptive method.
    pub dt: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Keep every `record_every`-th accepted step (the final state is always kept).
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed,
            dt: 1e-3,
            t_end: 100.0,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        IntegratorConfig { dt, t_end, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("abs_tol", self.abs_tol)?;
        positive("rel_tol", self.rel_tol)?;
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// An autonomous flow `ż = F(z)` on a flat state vector.
#[allow(clippy::len_without_is_empty)]
pub trait FlowSystem {
    fn len(&self) -> usize;

    /// Indices of multipliers that must stay nonnegative.
    fn nonnegative(&self) -> Range<usize>;

    fn derivative(&self, z: &[f64], dz: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    KktTol,
    TimeLimit,
    NonFinite,
}

/// Returned by step observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub t: f64,
    pub z: Vec<f64>,
    pub steps: usize,
    /// `true` when the observer asked to stop.
    pub stopped: bool,
    pub non_finite: bool,
    /// Entries in `[−NEG_TOL, 0)` that were reset to 0.
    pub clamp_events: usize,
    /// Smallest multiplier seen at any accepted step, before clamping.
    pub min_multiplier: f64,
}

/// Integrates `sys` from `z0` over `[0, cfg.t_end]`.
///
/// `observe(t, z, step)` runs on the initial condition (step 0) and after
/// every accepted step; returning [`Control::Stop`] ends the run.
pub fn run_flow<S: FlowSystem>(
    sys: &S,
    z0: &[f64],
    cfg: &IntegratorConfig,
    mut observe: impl FnMut(f64, &[f64], usize) -> Result<Control>,
) -> Result<FlowOutcome> {
    cfg.validate()?;
    if z0.len() != sys.len() {
        return Err(Error::Dimension { context: "initial state".into(), expected: sys.len(), got: z0.len() });
    }
    let mut out = FlowOutcome {
        t: 0.0,
        z: z0.to_vec(),
        steps: 0,
        stopped: false,
        non_finite: false,
        clamp_events: 0,
        min_multiplier: f64::INFINITY,
    };
    for i in sys.nonnegative() {
        out.min_multiplier = out.min_multiplier.min(z0[i]);
    }
    if observe(0.0, z0, 0)? == Control::Stop {
        out.stopped = true;
        return Ok(out);
    }
    let mut stepper = Stepper::new(sys.len());
    let mut h = cfg.dt;
    let t_end = cfg.t_end;
    let fixed_steps = (t_end / cfg.dt).round() as usize;

    loop {
        let (t_new, accepted) = match cfg.method {
            Method::Rk4Fixed => {
                if out.steps >= fixed_steps.max(1) {
                    break;
                }
                let k = out.steps + 1;
                // exact grid times so long runs do not drift
                let t_next = if k == fixed_steps.max(1) { t_end } else { k as f64 * cfg.dt };
                stepper.rk4(sys, &out.z, t_next - out.t)?;
                (t_next, true)
            }
            Method::Rk45Adaptive => {
                if out.t >= t_end {
                    break;
                }
                let step = h.min(t_end - out.t);
                let err = stepper.dopri5(sys, &out.z, step, cfg.abs_tol, cfg.rel_tol)?;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !err.is_finite() {
                    h = step * 0.2;
                    if h < MIN_STEP {
                        return Err(Error::Integration {
                            t: out.t,
                            reason: "step size underflow on non-finite error estimate".into(),
                        });
                    }
                    continue;
                }
                if err <= 1.0 {
                    h = step * factor;
                    let t_next = if step == t_end - out.t { t_end } else { out.t + step };
                    (t_next, true)
                } else {
                    h = step * factor;
                    if h < MIN_STEP {
                        return Err(Error::Integration {
                            t: out.t,
                            reason: format!("adaptive step underflow (dt = {h:e})"),
                        });
                    }
                    (out.t, false)
                }
            }
        };
        if !accepted {
            continue;
        }
        let next = stepper.result();
        if next.iter().any(|c| !c.is_finite()) {
            out.non_finite = true;
            break;
        }
        out.z.copy_from_slice(next);
        out.t = t_new;
        out.steps += 1;
        for i in sys.nonnegative() {
            let l = out.z[i];
            out.min_multiplier = out.min_multiplier.min(l);
            if l < -NEG_TOL {
                return Err(Error::Integration {
                    t: out.t,
                    reason: format!("multiplier z[{i}] = {l:e} fell below -{NEG_TOL:e}"),
                });
            }
            if l < 0.0 {
                out.z[i] = 0.0;
                out.clamp_events += 1;
            }
        }
        if observe(out.t, &out.z, out.steps)? == Control::Stop {
            out.stopped = true;
            break;
        }
    }
    Ok(out)
}

struct Stepper {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
}

// Dormand–Prince coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Stepper {
    fn new(n: usize) -> Self {
        Stepper { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n], next: vec![0.0; n] }
    }

    fn result(&self) -> &[f64] {
        &self.next
    }

    fn stage<S: FlowSystem>(&mut self, sys: &S, z: &[f64], h: f64, coeffs: &[(usize, f64)], into: usize) -> Result<()> {
        for i in 0..z.len() {
            let mut acc = z[i];
            for &(j, a) in coeffs {
                acc += h * a * self.k[j][i];
            }
            self.tmp[i] = acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k[into]);
        sys.derivative(tmp, k)
    }

    fn rk4<S: FlowSystem>(&mut self, sys: &S, z: &[f64], h: f64) -> Result<()> {
        sys.derivative(z, &mut self.k[0])?;
        self.stage(sys, z, h, &[(0, 0.5)], 1)?;
        self.stage(sys, z, h, &[(1, 0.5)], 2)?;
        self.stage(sys, z, h, &[(2, 1.0)], 3)?;
        for i in 0..z.len() {
            self.next[i] = z[i] + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }

    /// One Dormand–Prince step; returns the scaled RMS error estimate.
    fn dopri5<S: FlowSystem>(&mut self, sys: &S, z: &[f64], h: f64, atol: f64, rtol: f64) -> Result<f64> {
        sys.derivative(z, &mut self.k[0])?;
        self.stage(sys, z, h, &[(0, A21)], 1)?;
        self.stage(sys, z, h, &[(0, A31), (1, A32)], 2)?;
        self.stage(sys, z, h, &[(0, A41), (1, A42), (2, A43)], 3)?;
        self.stage(sys, z, h, &[(0, A51), (1, A52), (2, A53), (3, A54)], 4)?;
        self.stage(sys, z, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 5)?;
        for i in 0..z.len() {
            self.next[i] = z[i]
                + h * (B1 * self.k[0][i]
                    + B3 * self.k[2][i]
                    + B4 * self.k[3][i]
                    + B5 * self.k[4][i]
                    + B6 * self.k[5][i]);
        }
        let next = self.next.clone();
        sys.derivative(&next, &mut self.k[6])?;
        let mut sum = 0.0;
        for i in 0..z.len() {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let scale = atol + rtol * z[i].abs().max(next[i].abs());
            sum += (e / scale).powi(2);
        }
        Ok((sum / z.len().max(1) as f64).sqrt())
    }
}

/// The centralized flow as a [`FlowSystem`].
pub struct CentralFlow<'a> {
    spec: &'a ProblemSpec,
    params: &'a DynamicsParams,
    layout: StateLayout,
}

impl<'a> CentralFlow<'a> {
    pub fn new(spec: &'a ProblemSpec, params: &'a DynamicsParams) -> Result<Self> {
        crate::error::check_dim("eta", spec.r(), params.eta.len())?;
        Ok(CentralFlow { spec, params, layout: StateLayout::of(spec) })
    }
}

impl FlowSystem for CentralFlow<'_> {
    fn len(&self) -> usize {
        self.layout.len()
    }

    fn nonnegative(&self) -> Range<usize> {
        self.layout.lambda_range()
    }

    fn derivative(&self, z: &[f64], dz: &mut [f64]) -> Result<()> {
        let state = PrimalDualState::from_flat(self.layout, z, 0.0);
        vector_field(self.spec, &state, self.params)?.write_flat(dz);
        Ok(())
    }
}

/// A recorded point of a trajectory with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub state: PrimalDualState,
    pub kkt_total: f64,
    /// Lyapunov value around the reference, when one was supplied.
    pub lyapunov: Option<f64>,
    pub field_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub clamp_events: usize,
    pub min_multiplier: f64,
}

impl Trajectory {
    /// Wraps externally produced samples, e.g. for rate-estimation fixtures.
    pub fn from_samples(samples: Vec<Sample>) -> Self {
        let min_multiplier = samples.iter().flat_map(|s| s.state.lambda.iter().cloned()).fold(f64::INFINITY, f64::min);
        Trajectory {
            steps: samples.len().saturating_sub(1),
            samples,
            stop_reason: StopReason::TimeLimit,
            clamp_events: 0,
            min_multiplier,
        }
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory always holds its initial condition")
    }
}

/// What to watch while integrating.
#[derive(Debug, Clone, Default)]
pub struct Observers<'a> {
    /// Reference saddle point for the Lyapunov diagnostic.
    pub reference: Option<&'a PrimalDualState>,
    /// Stop once the smoothed KKT residual drops to this level.
    pub kkt_tol: Option<f64>,
}

/// Integrates the flow and records a decimated trajectory.
pub fn integrate(
    spec: &ProblemSpec,
    state0: &PrimalDualState,
    params: &DynamicsParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_observed(spec, state0, params, cfg, Observers::default())
}

pub fn integrate_observed(
    spec: &ProblemSpec,
    state0: &PrimalDualState,
    params: &DynamicsParams,
    cfg: &IntegratorConfig,
    obs: Observers<'_>,
) -> Result<Trajectory> {
    if let Some(i) = state0.lambda.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Contract(format!("initial lambda[{i}] = {} must be strictly positive", state0.lambda[i])));
    }
    integrate_unchecked(spec, state0, params, cfg, obs)
}

fn integrate_unchecked(
    spec: &ProblemSpec,
    state0: &PrimalDualState,
    params: &DynamicsParams,
    cfg: &IntegratorConfig,
    obs: Observers<'_>,
) -> Result<Trajectory> {
    state0.check_dims(spec)?;
    if let Some(r) = obs.reference {
        r.check_dims(spec)?;
    }
    let sys = CentralFlow::new(spec, params)?;
    let layout = StateLayout::of(spec);
    let mut samples: Vec<Sample> = Vec::new();
    let mut pending: Option<(f64, usize, Vec<f64>)> = None;
    let mut hit_tol = false;

    let make_sample = |t: f64, z: &[f64]| -> Result<Sample> {
        let state = PrimalDualState::from_flat(layout, z, t);
        let kkt_total = kkt_residual(spec, &state.to_kkt(), params.mu)?.total;
        let field_norm = vector_field(spec, &state, params)?.norm();
        let lyapunov = match obs.reference {
            Some(r) => Some(lyapunov_value(&state, r, params)?.v),
            None => None,
        };
        Ok(Sample { t, state, kkt_total, lyapunov, field_norm })
    };

    let outcome = run_flow(&sys, &state0.to_flat(), cfg, |t, z, step| {
        let mut stop = false;
        if let Some(tol) = obs.kkt_tol {
            let state = PrimalDualState::from_flat(layout, z, t);
            if kkt_residual(spec, &state.to_kkt(), params.mu)?.total <= tol {
                hit_tol = true;
                stop = true;
            }
        }
        if step % cfg.record_every == 0 || stop {
            samples.push(make_sample(t, z)?);
            pending = None;
        } else {
            pending = Some((t, step, z.to_vec()));
        }
        Ok(if stop { Control::Stop } else { Control::Continue })
    })?;

    if let Some((t, _, z)) = pending {
        samples.push(make_sample(t, &z)?);
    }
    let stop_reason = if outcome.non_finite {
        StopReason::NonFinite
    } else if hit_tol {
        StopReason::KktTol
    } else {
        StopReason::TimeLimit
    };
    Ok(Trajectory {
        samples,
        stop_reason,
        steps: outcome.steps,
        clamp_events: outcome.clamp_events,
        min_multiplier: outcome.min_multiplier,
    })
}

/// Least-squares fit of `ln distance` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub r_squared: f64,
}

/// What the distance in a rate fit is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum RateReference {
    /// Full-state distance `‖z(t) − z_ref‖`.
    State(PrimalDualState),
    /// Primal distance `‖x(t) − x_ref‖`.
    Primal(Vector),
}

/// Fits `ln‖z(t) − z_ref‖ ≈ a + slope·t` over `window`, given as fractions
/// of the trajectory's time span. Distances at or below `1e-12` are skipped.
pub fn estimate_rate(traj: &Trajectory, reference: &RateReference, window: (f64, f64)) -> Result<RateEstimate> {
    let (a, b) = window;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::Parameter(format!("rate window must satisfy 0 <= start < end <= 1, got ({a}, {b})")));
    }
    let (t0, t1) = match (traj.samples.first(), traj.samples.last()) {
        (Some(f), Some(l)) => (f.t, l.t),
        _ => return Err(Error::Estimation("empty trajectory".into())),
    };
    let lo = t0 + a * (t1 - t0);
    let hi = t0 + b * (t1 - t0);
    let points: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .filter_map(|s| {
            let d = match reference {
                RateReference::State(r) => s.state.distance(r),
                RateReference::Primal(x) => (&s.state.x - x).norm(),
            };
            (d > 1e-12).then(|| (s.t, d.ln()))
        })
        .collect();
    if points.len() < 5 {
        return Err(Error::Estimation(format!("need at least 5 usable samples, have {}", points.len())));
    }
    Ok(linear_fit(&points))
}

fn linear_fit(points: &[(f64, f64)]) -> RateEstimate {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in points {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { (sty * sty) / (stt * syy) };
    RateEstimate { slope, r_squared }
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub x_star: Vector,
    pub multipliers: KktPoint,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub rate_estimate: Option<RateEstimate>,
    pub residual: ResidualReport,
    pub mu: SmoothingParam,
    pub t_final: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Integrates until the smoothed KKT residual is at most `kkt_tol` or the
/// horizon runs out. Without `state0` the flow starts from
/// `x = 0, λ = 1, ν = 0, w = 0`.
pub fn solve(
    spec: &ProblemSpec,
    params: &DynamicsParams,
    cfg: &IntegratorConfig,
    kkt_tol: f64,
    state0: Option<&PrimalDualState>,
) -> Result<Solution> {
    let default_state;
    let start = match state0 {
        Some(s) => s,
        None => {
            default_state = PrimalDualState::default_for(spec);
            &default_state
        }
    };
    if let Some(i) = start.lambda.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Contract(format!("initial lambda[{i}] = {} must be strictly positive", start.lambda[i])));
    }
    solve_from(spec, params, cfg, kkt_tol, start)
}

fn solve_from(
    spec: &ProblemSpec,
    params: &DynamicsParams,
    cfg: &IntegratorConfig,
    kkt_tol: f64,
    start: &PrimalDualState,
) -> Result<Solution> {
    if !(kkt_tol > 0.0) {
        return Err(Error::Parameter(format!("kkt_tol must be > 0, got {kkt_tol}")));
    }
    let obs = Observers { reference: None, kkt_tol: Some(kkt_tol) };
    let trajectory = integrate_unchecked(spec, start, params, cfg, obs)?;
    let last = trajectory.last().clone();
    let multipliers = last.state.to_kkt();
    let residual = if trajectory.stop_reason == StopReason::NonFinite {
        ResidualReport {
            stationarity: f64::NAN,
            primal_ineq: f64::NAN,
            primal_eq: f64::NAN,
            complementarity: f64::NAN,
            splitting: f64::NAN,
            total: f64::NAN,
        }
    } else {
        kkt_residual(spec, &multipliers, params.mu)?
    };
    let converged = trajectory.stop_reason == StopReason::KktTol && residual.total <= kkt_tol;

    let rate_estimate = match spec.known_optimum() {
        Some(x) => estimate_rate(&trajectory, &RateReference::Primal(x.clone()), DEFAULT_WINDOW).ok(),
        // the window stops short of the end, where the distance to the final state vanishes
        None => estimate_rate(&trajectory, &RateReference::State(last.state.clone()), DEFAULT_WINDOW).ok(),
    };
    Ok(Solution {
        x_star: last.state.x.clone(),
        multipliers,
        converged,
        stop_reason: trajectory.stop_reason,
        rate_estimate,
        residual,
        mu: params.mu,
        t_final: last.t,
        trajectory,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationResult {
    pub rounds: Vec<Solution>,
}

impl ContinuationResult {
    pub fn last(&self) -> &Solution {
        self.rounds.last().expect("continuation runs at least one round")
    }
}

/// Solves for each `μ` of a strictly decreasing schedule, warm-starting every
/// round from the previous round's final state. The horizon `cfg.t_end` is
/// the total budget and is split evenly across rounds.
pub fn continuation(
    spec: &ProblemSpec,
    mu_schedule: &[f64],
    params_template: &DynamicsParams,
    cfg: &IntegratorConfig,
    kkt_tol: f64,
    state0: Option<&PrimalDualState>,
) -> Result<ContinuationResult> {
    if mu_schedule.is_empty() {
        return Err(Error::Parameter("mu schedule is empty".into()));
    }
    let schedule = mu_schedule.iter().map(|&m| SmoothingParam::new(m)).collect::<Result<Vec<_>>>()?;
    if schedule.windows(2).any(|w| !(w[1].get() < w[0].get())) {
        return Err(Error::Parameter(format!("mu schedule must be strictly decreasing, got {mu_schedule:?}")));
    }
    let round_cfg = IntegratorConfig { t_end: cfg.t_end / schedule.len() as f64, ..cfg.clone() };
    let mut rounds: Vec<Solution> = Vec::with_capacity(schedule.len());
    for (k, &mu) in schedule.iter().enumerate() {
        let params = params_template.with_mu(mu);
        let sol = if k == 0 {
            solve(spec, &params, &round_cfg, kkt_tol, state0)?
        } else {
            let mut warm = rounds[k - 1].trajectory.last().state.clone();
            warm.t = 0.0;
            solve_from(spec, &params, &round_cfg, kkt_tol, &warm)?
        };
        log::info!(
            "continuation round {}: mu = {}, kkt = {:e}, t = {}",
            k + 1,
            mu.get(),
            sol.residual.total,
            sol.t_final
        );
        rounds.push(sol);
    }
    Ok(ContinuationResult { rounds })
}
