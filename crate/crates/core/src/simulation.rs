//! Fixed-step closed-loop simulation of the full nonlinear plant.
//!
//! By default the control law `u = N·r(t) − K·x` is evaluated once per step
//! and held while classic RK4 advances the state; [`ControlUpdate::Continuous`]
//! evaluates it at every stage instead. The difference matters: a hold of
//! one millisecond acts like a half-step delay, and pole-placement designs
//! that barely tame the fast open-loop modes can lose stability under it.
//! Disturbances are drawn once per
//! step from a seeded ChaCha stream, force first and then one torque per
//! joint, so a given seed always yields the same trace bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, PlantParams, State};
use crate::linalg::csv::fmt_g17;
use crate::linearization::StateSpace;
use crate::synthesis::{self, Gains, PoleDesign};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("step metrics need a non-zero reference")]
    ZeroReference,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub type Result<T, E = SimulationError> = std::result::Result<T, E>;

/// Entries beyond this magnitude count as divergence.
pub const STATE_LIMIT: f64 = 1e6;

/// How the disturbance magnitudes are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// Values are variances `σ²`.
    #[default]
    Variance,
    /// Values are standard deviations `σ`.
    StdDev,
}

/// When the feedback law is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlUpdate {
    /// Once per step, held over the step.
    #[default]
    Zoh,
    /// At every Runge–Kutta stage, approximating continuous-time feedback.
    /// The recorded `u` is the value at the start of each step.
    Continuous,
}

/// Zero-mean Gaussian force and joint-torque disturbances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub force: f64,
    pub torque: f64,
    #[serde(default)]
    pub scale: NoiseScale,
}

impl Disturbance {
    /// Force variance 0.01 N², torque variance 1e-9 N²m².
    pub const fn reference() -> Self {
        Self { force: 0.01, torque: 1e-9, scale: NoiseScale::Variance }
    }

    pub fn force_std(&self) -> f64 {
        self.std(self.force)
    }

    pub fn torque_std(&self) -> f64 {
        self.std(self.torque)
    }

    fn std(&self, v: f64) -> f64 {
        match self.scale {
            NoiseScale::Variance => v.sqrt(),
            NoiseScale::StdDev => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Step amplitude `ρ` in metres.
    pub reference: f64,
    pub step_time: f64,
    pub disturbance: Option<Disturbance>,
    pub seed: u64,
    /// Interleaved initial state; zeros when absent.
    pub initial_state: Option<Vec<f64>>,
    /// Joint-angle magnitude treated as divergence; `None` disables the check.
    pub angle_limit: Option<f64>,
    pub control_update: ControlUpdate,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 20.0,
            reference: 1.0,
            step_time: 0.0,
            disturbance: None,
            seed: 0,
            initial_state: None,
            angle_limit: Some(std::f64::consts::PI),
            control_update: ControlUpdate::Zoh,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimulationError::InvalidConfig(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return bad(format!("duration {} is shorter than dt {}", self.duration, self.dt));
        }
        if !self.reference.is_finite() || !self.step_time.is_finite() {
            return bad("reference and step_time must be finite".into());
        }
        if let Some(d) = &self.disturbance {
            if !(d.force.is_finite() && d.force >= 0.0 && d.torque.is_finite() && d.torque >= 0.0) {
                return bad(format!("disturbance magnitudes must be ≥ 0, got {} and {}", d.force, d.torque));
            }
        }
        if let Some(lim) = self.angle_limit {
            if !(lim > 0.0) {
                return bad(format!("angle_limit must be positive, got {lim}"));
            }
        }
        if let Some(x0) = &self.initial_state {
            if x0.iter().any(|v| !v.is_finite()) {
                return bad("initial_state must be finite".into());
            }
        }
        Ok(())
    }

    /// Number of samples, `floor(duration/dt) + 1`.
    pub fn samples(&self) -> usize {
        // tolerate duration/dt landing a hair under an integer
        ((self.duration / self.dt) * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn reference_at(&self, t: f64) -> f64 {
        if t >= self.step_time {
            self.reference
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Diverged { time: f64, reason: String },
}

impl Outcome {
    pub fn is_diverged(&self) -> bool {
        matches!(self, Outcome::Diverged { .. })
    }
}

/// Sampled closed-loop response. Row `k` holds the state at `t[k]` and the
/// input and disturbances held over `[t[k], t[k] + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub t: Vec<f64>,
    /// Interleaved states.
    pub states: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub force_disturbance: Vec<f64>,
    pub torque_disturbance: Vec<Vec<f64>>,
    pub outcome: Outcome,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn links(&self) -> usize {
        self.torque_disturbance.first().map_or(0, Vec::len)
    }

    pub fn cart_position(&self) -> Vec<f64> {
        self.states.iter().map(|x| x[0]).collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn csv_header(links: usize) -> String {
        let mut cols = vec!["t".to_string(), "x".into(), "xdot".into()];
        for i in 1..=links {
            cols.push(format!("th{i}"));
            cols.push(format!("th{i}dot"));
        }
        cols.extend(["u".into(), "r".into(), "Fd".into()]);
        cols.extend((1..=links).map(|i| format!("tau{i}")));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.links());
        out.push('\n');
        for k in 0..self.len() {
            let row: Vec<String> = std::iter::once(self.t[k])
                .chain(self.states[k].iter().copied())
                .chain([self.u[k], self.r[k], self.force_disturbance[k]])
                .chain(self.torque_disturbance[k].iter().copied())
                .map(fmt_g17)
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

struct NoiseSource {
    rng: ChaCha8Rng,
    force: Normal<f64>,
    torque: Normal<f64>,
}

impl NoiseSource {
    fn new(d: &Disturbance, seed: u64) -> Result<Self> {
        let normal = |s: f64| {
            Normal::new(0.0, s).map_err(|e| SimulationError::InvalidConfig(format!("noise: {e}")))
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            force: normal(d.force_std())?,
            torque: normal(d.torque_std())?,
        })
    }

    fn draw(&mut self, tau: &mut [f64]) -> f64 {
        let f = self.force.sample(&mut self.rng);
        for t in tau.iter_mut() {
            *t = self.torque.sample(&mut self.rng);
        }
        f
    }
}

/// Simulate `u = N·r − K·x` with synthesized gains.
pub fn simulate(p: &PlantParams, gains: &Gains, cfg: &SimConfig) -> Result<SimTrace> {
    simulate_law(p, &gains.k, gains.n, cfg)
}

/// Simulate `u = n·r − k·x` for an explicit interleaved gain row.
pub fn simulate_law(p: &PlantParams, k: &[f64], n: f64, cfg: &SimConfig) -> Result<SimTrace> {
    cfg.validate()?;
    let dim = p.state_dim();
    let dof = p.dof();
    let links = p.links();
    if k.len() != dim {
        return Err(SimulationError::DimensionMismatch(format!(
            "gain has {} entries, plant has {dim} states",
            k.len()
        )));
    }
    let x0 = match &cfg.initial_state {
        Some(x) if x.len() != dim => {
            return Err(SimulationError::DimensionMismatch(format!(
                "initial state has {} entries, plant has {dim} states",
                x.len()
            )))
        }
        Some(x) => x.clone(),
        None => vec![0.0; dim],
    };
    let mut noise = cfg.disturbance.as_ref().map(|d| NoiseSource::new(d, cfg.seed)).transpose()?;

    let samples = cfg.samples();
    let mut trace = SimTrace {
        t: Vec::with_capacity(samples),
        states: Vec::with_capacity(samples),
        u: Vec::with_capacity(samples),
        r: Vec::with_capacity(samples),
        force_disturbance: Vec::with_capacity(samples),
        torque_disturbance: Vec::with_capacity(samples),
        outcome: Outcome::Completed,
    };

    let mut state = State::from_interleaved(&x0)?;
    let mut block = state.to_block();
    let mut generalized = vec![0.0; dof];
    for step in 0..samples {
        let t = step as f64 * cfg.dt;
        let x = state.to_interleaved();
        let r = cfg.reference_at(t);
        let u = n * r - k.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let mut tau = vec![0.0; links];
        let fd = noise.as_mut().map_or(0.0, |s| s.draw(&mut tau));

        trace.t.push(t);
        trace.states.push(x);
        trace.u.push(u);
        trace.r.push(r);
        trace.force_disturbance.push(fd);
        trace.torque_disturbance.push(tau.clone());

        if let Some(reason) = divergence(&state, cfg.angle_limit) {
            trace.outcome = Outcome::Diverged { time: t, reason };
            break;
        }
        if step + 1 == samples {
            break;
        }

        generalized[0] = fd;
        generalized[1..].copy_from_slice(&tau);
        let next = match cfg.control_update {
            ControlUpdate::Zoh => rk4_step(p, &block, &generalized, cfg.dt, |_| u)?,
            ControlUpdate::Continuous => rk4_step(p, &block, &generalized, cfg.dt, |xb| {
                n * r - feedback_block(k, xb, dof)
            })?,
        };
        if next.iter().any(|v| !v.is_finite()) {
            trace.outcome = Outcome::Diverged {
                time: t + cfg.dt,
                reason: "state became non-finite".into(),
            };
            break;
        }
        block = next;
        state = State::from_block(&block)?;
    }
    Ok(trace)
}

fn divergence(state: &State, angle_limit: Option<f64>) -> Option<String> {
    let worst = state.q.iter().chain(&state.qdot).fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > STATE_LIMIT {
        return Some(format!("state magnitude {worst:e} exceeds {STATE_LIMIT:e}"));
    }
    let limit = angle_limit?;
    state.q[1..]
        .iter()
        .position(|th| th.abs() > limit)
        .map(|i| format!("|θ{}| = {:.4} rad exceeds {limit:.4}", i + 1, state.q[i + 1].abs()))
}

/// `K·x` for an interleaved gain and a block-layout state.
fn feedback_block(k: &[f64], xb: &[f64], dof: usize) -> f64 {
    (0..dof).map(|i| k[2 * i] * xb[i] + k[2 * i + 1] * xb[dof + i]).sum()
}

/// One RK4 step; `control` gives the cart force at each stage on top of the
/// held disturbance vector `disturbance`.
fn rk4_step(
    p: &PlantParams,
    x: &[f64],
    disturbance: &[f64],
    dt: f64,
    control: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    let mut gen = disturbance.to_vec();
    let base = disturbance[0];
    let mut f = |x: &[f64]| -> Result<Vec<f64>> {
        gen[0] = base + control(x);
        let s = State::from_block(x)?;
        Ok(dynamics::forward_dynamics_generalized(&s, &gen, p)?.to_block())
    };
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };
    let k1 = f(x)?;
    let k2 = f(&axpy(0.5 * dt, &k1))?;
    let k3 = f(&axpy(0.5 * dt, &k2))?;
    let k4 = f(&axpy(dt, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Step-response figures of merit on the cart position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMetrics {
    pub overshoot_pct: Option<f64>,
    /// Time after the step of the last exit from the ±2 % band.
    pub settling_time: Option<f64>,
    pub steady_state_error: Option<f64>,
    /// Largest `|θᵢ|` seen, per link.
    pub peak_angles: Vec<f64>,
    pub stabilized: bool,
}

pub const SETTLING_BAND: f64 = 0.02;

/// Figures of merit for a step of amplitude `rho`.
pub fn metrics(trace: &SimTrace, rho: f64, step_time: f64) -> Result<ResponseMetrics> {
    if rho == 0.0 || !rho.is_finite() {
        return Err(SimulationError::ZeroReference);
    }
    let links = trace.links();
    let peak_angles: Vec<f64> = (0..links)
        .map(|i| trace.states.iter().fold(0.0f64, |m, x| m.max(x[2 + 2 * i].abs())))
        .collect();
    if trace.outcome.is_diverged() || trace.is_empty() {
        return Ok(ResponseMetrics {
            overshoot_pct: None,
            settling_time: None,
            steady_state_error: None,
            peak_angles,
            stabilized: false,
        });
    }

    let y = trace.cart_position();
    let mag = rho.abs();
    // work with the response normalized to a positive step
    let peak = y.iter().map(|v| v * rho.signum()).fold(f64::NEG_INFINITY, f64::max);
    let overshoot = (100.0 * (peak - mag) / mag).max(0.0);

    let band = SETTLING_BAND * mag;
    let last_outside = y.iter().rposition(|v| (v - rho).abs() > band);
    let settling_time = match last_outside {
        None => Some(0.0),
        Some(i) if i + 1 < y.len() => Some((trace.t[i + 1] - step_time).max(0.0)),
        Some(_) => None,
    };

    let tail = (y.len() / 20).max(1);
    let mean = y[y.len() - tail..].iter().sum::<f64>() / tail as f64;
    let sse = (rho - mean).abs();

    let stabilized = settling_time.is_some()
        && peak_angles.iter().all(|&a| a < std::f64::consts::FRAC_PI_2)
        && sse < SETTLING_BAND * mag;
    Ok(ResponseMetrics {
        overshoot_pct: Some(overshoot),
        settling_time,
        steady_state_error: Some(sse),
        peak_angles,
        stabilized,
    })
}

/// One row of a settling-time sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub settling_time_design: f64,
    pub stabilized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<Gains>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ResponseMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Re-design, re-place and simulate once per settling time; rows run in
/// parallel and failures stay confined to their row.
pub fn sweep_settling_times(
    p: &PlantParams,
    ss: &StateSpace,
    base: &PoleDesign,
    ts_list: &[f64],
    cfg: &SimConfig,
) -> Vec<SweepRow> {
    ts_list.par_iter().map(|&ts| sweep_row(p, ss, base, ts, cfg)).collect()
}

fn sweep_row(p: &PlantParams, ss: &StateSpace, base: &PoleDesign, ts: f64, cfg: &SimConfig) -> SweepRow {
    let failed = |reason: String, gains: Option<Gains>| SweepRow {
        settling_time_design: ts,
        stabilized: false,
        gains,
        metrics: None,
        outcome: None,
        failure: Some(reason),
    };
    let gains = match base
        .with_settling_time(ts)
        .and_then(|d| synthesis::design_pole_placement(ss, &d))
    {
        Ok(g) => g,
        Err(e) => return failed(e.to_string(), None),
    };
    let trace = match simulate(p, &gains, cfg) {
        Ok(t) => t,
        Err(e) => return failed(e.to_string(), Some(gains)),
    };
    match metrics(&trace, cfg.reference, cfg.step_time) {
        Ok(m) => SweepRow {
            settling_time_design: ts,
            stabilized: m.stabilized,
            gains: Some(gains),
            metrics: Some(m),
            outcome: Some(trace.outcome),
            failure: None,
        },
        Err(e) => failed(e.to_string(), Some(gains)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cart_pole() -> PlantParams {
        PlantParams::new(1.0, vec![0.1], vec![0.5], 9.81).unwrap()
    }

    fn synthetic(y: impl Fn(f64) -> f64, dt: f64, duration: f64) -> SimTrace {
        let n = (duration / dt).round() as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        SimTrace {
            states: t.iter().map(|&t| vec![y(t), 0.0, 0.0, 0.0]).collect(),
            u: vec![0.0; n],
            r: vec![1.0; n],
            force_disturbance: vec![0.0; n],
            torque_disturbance: vec![vec![0.0]; n],
            t,
            outcome: Outcome::Completed,
        }
    }

    #[test]
    fn config_validation_and_sample_count() {
        let cfg = SimConfig { duration: 1.0, dt: 0.1, ..SimConfig::default() };
        assert_eq!(cfg.samples(), 11);
        assert_eq!(SimConfig::default().samples(), 20001);
        for bad in [
            SimConfig { dt: 0.0, ..SimConfig::default() },
            SimConfig { duration: 1e-4, ..SimConfig::default() },
            SimConfig {
                disturbance: Some(Disturbance { force: -1.0, ..Disturbance::reference() }),
                ..SimConfig::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn noise_scale_readings() {
        let d = Disturbance::reference();
        assert_abs_diff_eq!(d.force_std(), 0.1, epsilon = 1e-15);
        let d = Disturbance { scale: NoiseScale::StdDev, ..d };
        assert_eq!(d.force_std(), 0.01);
    }

    #[test]
    fn equilibrium_is_invariant() {
        let cfg = SimConfig { reference: 0.0, duration: 2.0, ..SimConfig::default() };
        let tr = simulate_law(&cart_pole(), &[1.0, 2.0, -30.0, -3.0], 1.0, &cfg).unwrap();
        assert_eq!(tr.len(), 2001);
        assert!(tr.states.iter().all(|x| x.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn open_loop_upright_falls_and_diverges() {
        let cfg = SimConfig {
            reference: 0.0,
            duration: 10.0,
            initial_state: Some(vec![0.0, 0.0, 0.01, 0.0]),
            ..SimConfig::default()
        };
        let tr = simulate_law(&cart_pole(), &[0.0; 4], 0.0, &cfg).unwrap();
        assert!(tr.outcome.is_diverged());
        assert!(tr.len() < cfg.samples());
        let m = metrics(&tr, 1.0, 0.0).unwrap();
        assert!(!m.stabilized);
        assert!(m.settling_time.is_none());
    }

    #[test]
    fn metrics_of_constant_response() {
        let tr = synthetic(|_| 1.0, 1e-3, 5.0);
        let m = metrics(&tr, 1.0, 0.0).unwrap();
        assert_eq!(m.overshoot_pct, Some(0.0));
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.steady_state_error, Some(0.0));
        assert!(m.stabilized);
    }

    #[test]
    fn metrics_of_first_order_response() {
        let dt = 1e-3;
        let tr = synthetic(|t| 1.0 - (-t).exp(), dt, 20.0);
        let m = metrics(&tr, 1.0, 0.0).unwrap();
        let exact = -(0.02f64).ln();
        assert!((m.settling_time.unwrap() - exact).abs() <= dt, "{:?}", m.settling_time);
        assert_eq!(m.overshoot_pct, Some(0.0));
    }

    #[test]
    fn metrics_reject_zero_reference() {
        let tr = synthetic(|_| 0.0, 1e-2, 1.0);
        assert_eq!(metrics(&tr, 0.0, 0.0).unwrap_err(), SimulationError::ZeroReference);
    }

    #[test]
    fn overshoot_is_measured_above_reference() {
        let tr = synthetic(|t| if t < 1.0 { 1.1 } else { 1.0 }, 1e-2, 5.0);
        let m = metrics(&tr, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.overshoot_pct.unwrap(), 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.settling_time.unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn disturbance_runs_are_reproducible() {
        let cfg = SimConfig {
            duration: 1.0,
            disturbance: Some(Disturbance::reference()),
            seed: 42,
            ..SimConfig::default()
        };
        let k = [-1.0, -2.0, -30.0, -3.0];
        let a = simulate_law(&cart_pole(), &k, -1.0, &cfg).unwrap();
        let b = simulate_law(&cart_pole(), &k, -1.0, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let c = simulate_law(&cart_pole(), &k, -1.0, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.force_disturbance, c.force_disturbance);
    }

    fn cart_pole_lqr() -> Gains {
        use crate::linearization::{find_equilibrium, linearize, EquilibriumKind};
        let p = cart_pole();
        let ss = linearize(&p, &find_equilibrium(&p, EquilibriumKind::Upright).unwrap()).unwrap();
        synthesis::lqr_gain(&ss, &synthesis::LqrWeights::position_heavy(4)).unwrap()
    }

    #[test]
    fn control_update_modes_agree_for_slow_loops() {
        let g = cart_pole_lqr();
        let base = SimConfig { duration: 5.0, reference: 0.1, ..SimConfig::default() };
        let a = simulate(&cart_pole(), &g, &base).unwrap();
        let cont = SimConfig { control_update: ControlUpdate::Continuous, ..base };
        let b = simulate(&cart_pole(), &g, &cont).unwrap();
        assert!(!a.outcome.is_diverged() && !b.outcome.is_diverged());
        let gap = a
            .states
            .iter()
            .zip(&b.states)
            .flat_map(|(x, y)| x.iter().zip(y))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(gap > 0.0 && gap < 1e-3, "{gap}");
        let m = metrics(&a, 0.1, 0.0).unwrap();
        assert!(m.stabilized, "{m:?}");
    }

    #[test]
    fn csv_header_layout() {
        assert_eq!(
            SimTrace::csv_header(2),
            "t,x,xdot,th1,th1dot,th2,th2dot,u,r,Fd,tau1,tau2"
        );
    }
}
