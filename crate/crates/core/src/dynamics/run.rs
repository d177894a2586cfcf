use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::initial::{initial_state, InitialData, Perturbation};
use super::integrator::{Integrator, TrackedState};
use super::state::FlowState;
use super::trace::{cumulative_trapezoid, energy_balance_residual, NormSample, NormTrace, Sampler};
use crate::error::{Error, Result};
use crate::estimates::ConstantOptions;

/// Vorticity level treated as numerical blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e6;
/// Abort when `||omega||_inf` exceeds this multiple of the transport envelope.
pub const TRANSPORT_GUARD: f64 = 2.0;
/// Slack on grid-maximum based bounds.
pub const LINF_SLACK: f64 = 1.05;
pub const ENERGY_BALANCE_TOL: f64 = 1e-5;
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;
pub const DISSIPATION_IDENTITY_TOL: f64 = 1e-6;

/// One simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub t_final: f64,
    pub nu: f64,
    pub kappa: f64,
    pub initial: InitialData,
    pub samples_per_unit: f64,
    /// Length of the initial layer sampled at `startup_samples_per_unit`; 0 disables it.
    #[serde(default)]
    pub startup_time: f64,
    #[serde(default)]
    pub startup_samples_per_unit: f64,
    pub checkpoint_times: Vec<f64>,
    pub safety: f64,
    pub constants: ConstantOptions,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn new(n: usize, t_final: f64, nu: f64, kappa: f64, initial: InitialData) -> Self {
        Self {
            n,
            t_final,
            nu,
            kappa,
            initial,
            samples_per_unit: 64.0,
            startup_time: 0.0,
            startup_samples_per_unit: 0.0,
            checkpoint_times: Vec::new(),
            safety: 0.5,
            constants: ConstantOptions::default(),
            output_dir: PathBuf::from("out"),
        }
    }

    /// All invariant violations, empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n < 8 || !self.n.is_multiple_of(2) {
            errs.push(format!("run.n must be even and at least 8, got {}", self.n));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            errs.push(format!("run.t_final must be finite and nonnegative, got {}", self.t_final));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            errs.push(format!("run.nu must be finite and nonnegative, got {}", self.nu));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            errs.push(format!(
                "run.kappa must satisfy kappa > 0 (the zero-conductivity case is out of scope), got {}",
                self.kappa
            ));
        }
        if !(self.samples_per_unit > 0.0 && self.samples_per_unit.is_finite()) {
            errs.push(format!("run.samples_per_unit must be positive, got {}", self.samples_per_unit));
        }
        if !(self.startup_time >= 0.0 && self.startup_time.is_finite()) {
            errs.push(format!("run.startup_time must be finite and nonnegative, got {}", self.startup_time));
        }
        if self.startup_time > 0.0 && !(self.startup_samples_per_unit > 0.0 && self.startup_samples_per_unit.is_finite()) {
            errs.push(format!(
                "run.startup_samples_per_unit must be positive when run.startup_time > 0, got {}",
                self.startup_samples_per_unit
            ));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            errs.push(format!("run.safety must lie in (0, 1], got {}", self.safety));
        }
        for &c in &self.checkpoint_times {
            if !(c >= 0.0 && c <= self.t_final) {
                errs.push(format!("checkpoint time {c} outside [0, t_final]"));
            }
        }
        errs.extend(self.initial.validate());
        errs.extend(self.constants.validate());
        errs
    }

    pub fn check(&self) -> Result<()> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Sample times `i / cadence` up to `t_final`, with `t_final` appended; the startup
    /// layer adds `i / startup_samples_per_unit` below `startup_time`.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = (self.t_final * self.samples_per_unit + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=count).map(|i| i as f64 / self.samples_per_unit).collect();
        if self.startup_time > 0.0 {
            let end = self.startup_time.min(self.t_final);
            let fine = (end * self.startup_samples_per_unit - 1e-9).ceil().max(0.0) as usize;
            times.extend((1..fine).map(|i| i as f64 / self.startup_samples_per_unit));
            times.sort_by(f64::total_cmp);
            times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        }
        times.retain(|&t| t <= self.t_final);
        if times.last().is_none_or(|&t| self.t_final - t > 1e-12 * self.t_final.max(1.0)) {
            times.push(self.t_final);
        } else if let Some(last) = times.last_mut() {
            *last = self.t_final;
        }
        times
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_mean: f64,
}

impl StepStats {
    pub fn record(&mut self, dt: f64) {
        if self.steps == 0 {
            self.dt_min = dt;
            self.dt_max = dt;
        } else {
            self.dt_min = self.dt_min.min(dt);
            self.dt_max = self.dt_max.max(dt);
        }
        self.dt_mean = (self.dt_mean * self.steps as f64 + dt) / (self.steps + 1) as f64;
        self.steps += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub t: f64,
    pub reason: String,
}

/// A named scalar check with its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub name: String,
    #[serde(with = "crate::io::float")]
    pub value: f64,
    #[serde(with = "crate::io::float")]
    pub threshold: f64,
    pub passed: bool,
}

impl PropertyVerdict {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

/// Per-run physical invariants measured from the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    #[serde(with = "crate::io::float::option")]
    pub energy_balance_residual: Option<f64>,
    #[serde(with = "crate::io::float")]
    pub max_principle_excess: f64,
    #[serde(with = "crate::io::float")]
    pub dissipation_identity_defect: f64,
    /// Smallest `(||u0||^2 e^t + ||theta0||^2 (e^t - 1)) - ||u(t)||^2` relative to the bound.
    #[serde(with = "crate::io::float")]
    pub energy_inequality_margin: f64,
    /// `max_t ||omega(t)||_inf / (||omega0||_inf + int ||d1 theta||_inf)`.
    #[serde(with = "crate::io::float")]
    pub transport_ratio: f64,
    pub enstrophy_tail: f64,
    pub verdicts: Vec<PropertyVerdict>,
}

impl InvariantReport {
    pub fn from_trace(trace: &NormTrace) -> Self {
        let s = &trace.samples;
        let energy_balance_residual = energy_balance_residual(trace).ok();
        let (mut excess, mut defect, mut margin, mut ratio, mut tail) =
            (f64::NEG_INFINITY, 0.0_f64, f64::INFINITY, 0.0_f64, 0.0_f64);
        if let Some(first) = s.first() {
            let th0 = first.theta_l2 * first.theta_l2;
            let u0 = first.u_l2 * first.u_l2;
            let forcing = cumulative_trapezoid(&trace.times(), &trace.column(|x| x.d1_theta_linf));
            for (x, f) in s.iter().zip(&forcing) {
                excess = excess.max(x.theta_linf - first.theta_linf);
                let lhs = x.theta_l2 * x.theta_l2 + x.theta_dissipated;
                defect = defect.max((lhs - th0).abs() / th0.max(f64::MIN_POSITIVE));
                let et = x.t.exp();
                let bound = u0 * et + th0 * (et - 1.0);
                let rel = (bound - x.u_l2 * x.u_l2) / bound.max(f64::MIN_POSITIVE);
                margin = margin.min(rel);
                let env = first.omega_linf + f;
                if env > 0.0 {
                    ratio = ratio.max(x.omega_linf / env);
                }
                tail = tail.max(x.enstrophy_tail);
            }
            if th0 == 0.0 {
                defect = s.iter().map(|x| x.theta_l2 * x.theta_l2 + x.theta_dissipated).fold(0.0, f64::max);
            }
        } else {
            excess = 0.0;
            margin = 0.0;
        }
        let mut verdicts = Vec::new();
        if let Some(r) = energy_balance_residual {
            verdicts.push(PropertyVerdict::at_most("energy_balance_residual", r, ENERGY_BALANCE_TOL));
        }
        verdicts.push(PropertyVerdict::at_most("max_principle_excess", excess, MAX_PRINCIPLE_TOL));
        verdicts.push(PropertyVerdict::at_most(
            "dissipation_identity_defect",
            defect,
            DISSIPATION_IDENTITY_TOL,
        ));
        verdicts.push(PropertyVerdict::at_most("energy_inequality_deficit", -margin, 1e-12));
        if trace.nu == 0.0 {
            verdicts.push(PropertyVerdict::at_most("transport_ratio", ratio, LINF_SLACK));
        }
        Self {
            energy_balance_residual,
            max_principle_excess: excess,
            dissipation_identity_defect: defect,
            energy_inequality_margin: margin,
            transport_ratio: ratio,
            enstrophy_tail: tail,
            verdicts,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Result of [`simulate`]; `abort` is set when the run stopped early.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: NormTrace,
    pub checkpoints: Vec<FlowState>,
    pub final_state: FlowState,
    pub invariants: InvariantReport,
    pub steps: StepStats,
    pub abort: Option<AbortInfo>,
}

/// Merges sorted event lists, dropping near-duplicates.
pub(crate) fn merge_events(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        if out.last().is_none_or(|&p| t - p > 1e-12 * t.abs().max(1.0)) {
            out.push(t);
        }
    }
    out
}

pub(crate) fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

/// Cheap upper bound on `||omega||_inf`.
fn coefficient_sum(f: &crate::torus::SpectralField) -> f64 {
    f.coeffs().iter().map(|c| c.norm()).sum()
}

/// Per-step blow-up test; transforms only when the coefficient sum is large.
pub(crate) fn blowup_check(sampler: &Sampler, flow: &FlowState) -> Result<Option<AbortInfo>> {
    if coefficient_sum(&flow.omega) <= BLOWUP_THRESHOLD {
        return Ok(None);
    }
    let w = sampler.plan().inverse(&flow.omega)?.max_abs();
    if w <= BLOWUP_THRESHOLD {
        return Ok(None);
    }
    Ok(Some(AbortInfo {
        t: flow.t,
        reason: format!("blow-up sentinel: |omega|_inf = {w:e}"),
    }))
}

/// Sample-time abort rules: blow-up and growth beyond the transport envelope.
#[derive(Clone, Debug, Default)]
pub(crate) struct Guard {
    first: Option<f64>,
    forcing: f64,
    last: Option<(f64, f64)>,
}

impl Guard {
    pub(crate) fn observe(&mut self, s: &NormSample) -> Option<AbortInfo> {
        if let Some((t, d)) = self.last {
            self.forcing += 0.5 * (s.t - t) * (s.d1_theta_linf + d);
        }
        self.last = Some((s.t, s.d1_theta_linf));
        let first = *self.first.get_or_insert(s.omega_linf);
        let envelope = first + self.forcing;
        if !s.omega_linf.is_finite() || s.omega_linf > BLOWUP_THRESHOLD {
            Some(AbortInfo {
                t: s.t,
                reason: format!("blow-up sentinel: |omega|_inf = {:e}", s.omega_linf),
            })
        } else if envelope > 0.0 && s.omega_linf > TRANSPORT_GUARD * envelope {
            Some(AbortInfo {
                t: s.t,
                reason: format!(
                    "step-size instability: |omega|_inf = {:e} exceeds {} x transport envelope {:e}",
                    s.omega_linf, TRANSPORT_GUARD, envelope
                ),
            })
        } else {
            None
        }
    }
}

/// Integrates one run to `t_final` with adaptive steps.
pub fn simulate(config: &RunConfig) -> Result<RunOutput> {
    config.check()?;
    let grid = crate::torus::Grid::new(config.n)?;
    let flow = initial_state(grid, &config.initial, Perturbation::default(), config.nu, config.kappa)?;
    simulate_from(config, flow)
}

/// Like [`simulate`] but from a given initial state.
pub fn simulate_from(config: &RunConfig, flow: FlowState) -> Result<RunOutput> {
    config.check()?;
    let grid = flow.grid();
    let mut integrator = Integrator::new(grid, flow.nu, flow.kappa, &[])?;
    let sampler = Sampler::new(grid);
    let mut state = TrackedState::untracked(flow);
    let t_start = state.flow.t;
    let samples: Vec<f64> = config.sample_times().into_iter().map(|t| t + t_start).collect();
    let checkpoints: Vec<f64> = config.checkpoint_times.iter().map(|t| t + t_start).collect();
    let t_end = t_start + config.t_final;
    let events = merge_events(&[&samples, &checkpoints, &[t_end]]);
    let mut trace = NormTrace::new(state.flow.nu, state.flow.kappa);
    let mut saved = Vec::new();
    let mut stats = StepStats::default();
    let mut abort = None;
    let mut guard = Guard::default();

    let mut handle_event = |state: &TrackedState, trace: &mut NormTrace, saved: &mut Vec<FlowState>| -> Result<Option<AbortInfo>> {
        let t = state.flow.t;
        if samples.iter().any(|&s| near(s, t)) {
            let s = sampler.sample(state)?;
            let verdict = guard.observe(&s);
            trace.samples.push(s);
            if verdict.is_some() {
                return Ok(verdict);
            }
        }
        if checkpoints.iter().any(|&c| near(c, t)) {
            saved.push(state.flow.clone());
        }
        Ok(None)
    };

    let mut next = 0;
    if events.first().is_some_and(|&e| near(e, t_start)) {
        abort = handle_event(&state, &mut trace, &mut saved)?;
        next = 1;
    }
    while abort.is_none() && next < events.len() {
        let target = events[next];
        let dt_cfl = integrator.cfl_dt(&state.flow, config.safety)?;
        let remaining = target - state.flow.t;
        let (dt, lands) = if remaining <= dt_cfl * (1.0 + 1e-9) {
            (remaining, true)
        } else {
            (dt_cfl, false)
        };
        match integrator.step(&mut state, dt) {
            Ok(()) => {}
            Err(Error::Aborted { t, reason }) => {
                abort = Some(AbortInfo { t, reason });
                break;
            }
            Err(e) => return Err(e),
        }
        stats.record(dt);
        if let Some(a) = blowup_check(&sampler, &state.flow)? {
            abort = Some(a);
            break;
        }
        if lands {
            state.flow.t = target;
            abort = handle_event(&state, &mut trace, &mut saved)?;
            next += 1;
        }
    }
    if let Some(a) = &abort {
        log::warn!("run aborted at t = {}: {}", a.t, a.reason);
    }
    let invariants = InvariantReport::from_trace(&trace);
    Ok(RunOutput {
        trace,
        checkpoints: saved,
        final_state: state.flow,
        invariants,
        steps: stats,
        abort,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_times_cover_the_interval() {
        let mut c = RunConfig::new(16, 0.1, 0.0, 1.0, InitialData::smooth());
        c.samples_per_unit = 64.0;
        let t = c.sample_times();
        assert_eq!(t.len(), 8);
        assert_eq!(*t.last().unwrap(), 0.1);
        c.t_final = 0.0;
        assert_eq!(c.sample_times(), vec![0.0]);
        c.t_final = 0.5;
        let t = c.sample_times();
        assert_eq!(t.len(), 33);
        assert_eq!(*t.last().unwrap(), 0.5);
    }

    #[test]
    fn startup_layer_refines_the_first_intervals() {
        let mut c = RunConfig::new(16, 0.5, 0.0, 1.0, InitialData::smooth());
        c.samples_per_unit = 64.0;
        c.startup_time = 1.0 / 32.0;
        c.startup_samples_per_unit = 512.0;
        let t = c.sample_times();
        // 16 fine samples below 1/32, then the coarse grid from 1/32 on
        assert_eq!(t.len(), 16 + 31);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t[1], 1.0 / 512.0);
        assert_eq!(t[16], 1.0 / 32.0);
        c.startup_samples_per_unit = 0.0;
        assert_eq!(c.validate().len(), 1);
    }

    #[test]
    fn validation_collects_every_problem() {
        let mut c = RunConfig::new(7, -1.0, -1.0, 0.0, InitialData::smooth());
        c.safety = 2.0;
        let errs = c.validate();
        assert_eq!(errs.len(), 5, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("kappa > 0")));
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let c = RunConfig::new(16, 0.0, 0.0, 0.1, InitialData::smooth());
        let out = simulate(&c).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.steps.steps, 0);
        assert!(out.abort.is_none());
    }

    #[test]
    fn checkpoints_and_samples_land_exactly() {
        let mut c = RunConfig::new(16, 0.05, 1e-3, 0.1, InitialData::smooth());
        c.checkpoint_times = vec![0.0, 0.03, 0.05];
        let out = simulate(&c).unwrap();
        let times: Vec<f64> = out.checkpoints.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.03, 0.05]);
        assert!(out.trace.is_well_formed());
        assert_eq!(out.trace.samples.last().unwrap().t, 0.05);
        assert_eq!(out.final_state.t, 0.05);
    }

    #[test]
    fn stats_track_extremes() {
        let mut s = StepStats::default();
        for dt in [0.1, 0.3, 0.2] {
            s.record(dt);
        }
        assert_eq!((s.steps, s.dt_min, s.dt_max), (3, 0.1, 0.3));
        assert!((s.dt_mean - 0.2).abs() < 1e-15);
    }
}
