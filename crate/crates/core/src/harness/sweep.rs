use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{
    convergence_order, mollified_consistency, p_label, GapSeries, HoldoutReport, InitialGaps, NuReport, RunSummary,
    SweepMetadata, SweepReport, VorticityGap, HOLDOUT_LIMIT,
};
use crate::dynamics::{
    blowup_check, initial_state, near, AbortInfo, FlowState, Guard, Integrator, InvariantReport, NormTrace,
    Perturbation, RunConfig, Sampler, StepStats, TrackedState,
};
use crate::error::{Error, Result};
use crate::estimates::{
    calibrate_on, flow_constants, theta_aggregate, theta_aggregate_half_cadence, GammaCalibration,
};
use crate::torus::{biot_savart, exp_integral_of, lp_norm, velocity_gradient_norm, Grid, GridField, SpectralField};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "BQ_WORKERS";

/// A viscosity sweep against the inviscid reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Shared run settings; its `nu` is ignored.
    pub template: RunConfig,
    pub nu_list: Vec<f64>,
    pub p_list: Vec<f64>,
    /// Data perturbation, scaled by each run's viscosity.
    pub perturbation: Perturbation,
    pub mollifier_cutoffs: Vec<u32>,
    pub gronwall_cutoff: u32,
    /// Velocity snapshots for the Trudinger–Moser calibration are taken every this many samples.
    pub snapshot_stride: usize,
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn new(template: RunConfig, nu_list: Vec<f64>) -> Self {
        Self {
            template,
            nu_list,
            p_list: vec![1.0, 2.0, 4.0, f64::INFINITY],
            perturbation: Perturbation::default(),
            mollifier_cutoffs: vec![4, 8, 16, 32],
            gronwall_cutoff: 8,
            snapshot_stride: 8,
            workers: None,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = self.template.validate();
        if self.nu_list.is_empty() {
            errs.push("sweep.nu_list must not be empty".into());
        }
        if self.nu_list.iter().any(|nu| !(*nu >= 0.0 && nu.is_finite())) {
            errs.push("sweep.nu_list entries must be finite and nonnegative".into());
        }
        if self.nu_list.windows(2).any(|w| w[1] >= w[0]) {
            errs.push("sweep.nu_list must be strictly decreasing".into());
        }
        if self.p_list.is_empty() {
            errs.push("sweep.p_list must not be empty".into());
        }
        for p in &self.p_list {
            if ![1.0, 2.0, 4.0, f64::INFINITY].contains(p) {
                errs.push(format!("sweep.p_list entry {} is not one of 1, 2, 4, inf", p_label(*p)));
            }
        }
        let half = (self.template.n / 2) as u32;
        for &ell in self.mollifier_cutoffs.iter().chain([&self.gronwall_cutoff]) {
            if ell == 0 || ell > half {
                errs.push(format!("mollifier cutoff {ell} must lie in [1, n/2]"));
            }
        }
        let mut sorted = self.mollifier_cutoffs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.mollifier_cutoffs.len() {
            errs.push("sweep.mollifier_cutoffs must be distinct".into());
        }
        if self.snapshot_stride == 0 {
            errs.push("sweep.snapshot_stride must be at least 1".into());
        }
        if self.workers == Some(0) {
            errs.push("sweep.workers must be at least 1".into());
        }
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

    /// Configured workers, else `BQ_WORKERS`, else the available parallelism.
    pub fn resolved_workers(&self) -> Result<usize> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(w),
                _ => Err(Error::Config(vec![format!("{WORKERS_ENV} must be a positive integer, got {v:?}")])),
            },
            Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
        }
    }

    fn tracked_cutoffs(&self) -> Vec<u32> {
        let mut c = self.mollifier_cutoffs.clone();
        if !c.contains(&self.gronwall_cutoff) {
            c.push(self.gronwall_cutoff);
        }
        c
    }
}

/// Everything a sweep produces; `wall_time` is kept out of the report so that reports are reproducible.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub report: SweepReport,
    /// Reference trace first, then one per viscosity in `nu_list` order.
    pub traces: Vec<NormTrace>,
    pub wall_time: f64,
}

struct Member {
    nu: f64,
    integrator: Integrator,
    sampler: Sampler,
    state: TrackedState,
    trace: NormTrace,
    guard: Guard,
    abort: Option<AbortInfo>,
    /// `||tracer_i - omega||` at each sample, per cutoff.
    mollified: Vec<Vec<f64>>,
    mollified_rhs: Vec<Vec<f64>>,
    grads: Vec<GridField>,
    omega_inf: Vec<f64>,
}

impl Member {
    fn new(config: &SweepConfig, grid: Grid, nu: f64, perturbation: Perturbation, cutoffs: &[u32]) -> Result<Self> {
        let t = &config.template;
        let flow = initial_state(grid, &t.initial, perturbation, nu, t.kappa)?;
        Ok(Self {
            nu,
            integrator: Integrator::new(grid, nu, t.kappa, cutoffs)?,
            sampler: Sampler::new(grid),
            state: TrackedState::new(flow, cutoffs)?,
            trace: NormTrace::new(nu, t.kappa),
            guard: Guard::default(),
            abort: None,
            mollified: vec![Vec::new(); cutoffs.len()],
            mollified_rhs: vec![Vec::new(); cutoffs.len()],
            grads: Vec::new(),
            omega_inf: Vec::new(),
        })
    }

    fn active(&self) -> bool {
        self.abort.is_none()
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        match self.integrator.step(&mut self.state, dt) {
            Ok(()) => {}
            Err(Error::Aborted { t, reason }) => {
                self.abort = Some(AbortInfo { t, reason });
                return Ok(());
            }
            Err(e) => return Err(e),
        }
        self.abort = blowup_check(&self.sampler, &self.state.flow)?;
        Ok(())
    }

    fn sample(&mut self, snapshot: bool) -> Result<()> {
        let s = self.sampler.sample(&self.state)?;
        let verdict = self.guard.observe(&s);
        self.trace.samples.push(s);
        let omega = &self.state.flow.omega;
        for (i, tracer) in self.state.tracers.iter().enumerate() {
            let m = tracer.sub(omega)?.l2_norm();
            let rhs = self.mollified[i].first().copied().unwrap_or(m) + self.state.forcing_defect[i];
            self.mollified[i].push(m);
            self.mollified_rhs[i].push(rhs);
        }
        if snapshot {
            let u = self.state.flow.velocity();
            self.grads.push(velocity_gradient_norm(self.sampler.plan(), &u)?);
            self.omega_inf.push(self.trace.samples.last().map_or(0.0, |s| s.omega_linf));
        }
        if verdict.is_some() {
            self.abort = verdict;
        }
        Ok(())
    }
}

/// `||u^a - u^b||_{L^2}`.
pub fn velocity_gap(a: &FlowState, b: &FlowState) -> Result<f64> {
    let dw = a.omega.sub(&b.omega)?;
    let mean = [a.mean_u[0] - b.mean_u[0], a.mean_u[1] - b.mean_u[1]];
    Ok(biot_savart(&dw, mean)?.l2_norm())
}

/// `||omega^a - omega^b||_{L^p}` for each `p`.
pub fn vorticity_gaps(sampler: &Sampler, a: &SpectralField, b: &SpectralField, p_list: &[f64]) -> Result<Vec<f64>> {
    let diff = sampler.plan().inverse(&a.sub(b)?)?;
    p_list.iter().map(|&p| lp_norm(&diff, p)).collect()
}

fn fine_gaps(reference: &TrackedState, run: &TrackedState, tracer: usize) -> Result<(f64, f64, f64)> {
    Ok((
        velocity_gap(&run.flow, &reference.flow)?,
        run.flow.theta.sub(&reference.flow.theta)?.l2_norm(),
        run.tracers[tracer].sub(&reference.tracers[tracer])?.l2_norm(),
    ))
}

struct Pair {
    fine: GapSeries,
    omega: Vec<Vec<f64>>,
    initial: InitialGaps,
}

/// Runs the reference and every viscosity in lockstep on a shared step sequence.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.check()?;
    let workers = config.resolved_workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let started = Instant::now();
    let (report, traces) = pool.install(|| run_lockstep(config, workers))?;
    Ok(SweepOutcome {
        report,
        traces,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn run_lockstep(config: &SweepConfig, workers: usize) -> Result<(SweepReport, Vec<NormTrace>)> {
    let t = &config.template;
    let grid = Grid::new(t.n)?;
    let cutoffs = config.tracked_cutoffs();
    let g_idx = cutoffs
        .iter()
        .position(|&c| c == config.gronwall_cutoff)
        .expect("gronwall cutoff is tracked");
    let mut members = Vec::with_capacity(config.nu_list.len() + 1);
    members.push(Member::new(config, grid, 0.0, Perturbation::default(), &cutoffs)?);
    for &nu in &config.nu_list {
        members.push(Member::new(config, grid, nu, config.perturbation, &cutoffs)?);
    }
    let samples = t.sample_times();
    let stride = config.snapshot_stride;
    let mut pairs: Vec<Pair> = Vec::with_capacity(config.nu_list.len());
    {
        let r = &members[0];
        for m in &members[1..] {
            let (u, th, tr) = fine_gaps(&r.state, &m.state, g_idx)?;
            let mut fine = GapSeries::default();
            fine.push(0.0, u, th, tr);
            pairs.push(Pair {
                fine,
                omega: vec![Vec::new(); config.p_list.len()],
                initial: InitialGaps {
                    omega_l2: m.state.flow.omega.sub(&r.state.flow.omega)?.l2_norm(),
                    theta_l2: th,
                    u_l2: u,
                },
            });
        }
    }
    let mut stats = StepStats::default();
    let mut sample_index = 0usize;

    let sample_all = |members: &mut Vec<Member>, pairs: &mut Vec<Pair>, index: usize| -> Result<()> {
        let snapshot = index.is_multiple_of(stride);
        members
            .par_iter_mut()
            .filter(|m| m.active())
            .map(|m| m.sample(snapshot))
            .collect::<Result<Vec<()>>>()?;
        let (reference, rest) = members.split_first().expect("reference member");
        if reference.trace.samples.len() <= index {
            return Ok(());
        }
        let gaps: Vec<Option<Vec<f64>>> = rest
            .par_iter()
            .map(|m| {
                if m.trace.samples.len() <= index {
                    return Ok(None);
                }
                vorticity_gaps(&m.sampler, &m.state.flow.omega, &reference.state.flow.omega, &config.p_list).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        for (pair, g) in pairs.iter_mut().zip(gaps) {
            if let Some(g) = g {
                for (col, v) in pair.omega.iter_mut().zip(g) {
                    col.push(v);
                }
            }
        }
        Ok(())
    };

    if samples.first().is_some_and(|&s| s == 0.0) {
        sample_all(&mut members, &mut pairs, 0)?;
        sample_index = 1;
    }
    while sample_index < samples.len() && members[0].active() && members.iter().skip(1).any(Member::active) {
        let target = samples[sample_index];
        let dts = members
            .par_iter_mut()
            .filter(|m| m.active())
            .map(|m| m.integrator.cfl_dt(&m.state.flow, t.safety))
            .collect::<Result<Vec<f64>>>()?;
        let dt_cfl = dts.into_iter().fold(f64::INFINITY, f64::min);
        let now = members[0].state.flow.t;
        let remaining = target - now;
        let (dt, lands) = if remaining <= dt_cfl * (1.0 + 1e-9) {
            (remaining, true)
        } else {
            (dt_cfl, false)
        };
        members
            .par_iter_mut()
            .filter(|m| m.active())
            .map(|m| {
                m.step(dt)?;
                if lands {
                    m.state.flow.t = target;
                }
                Ok(())
            })
            .collect::<Result<Vec<()>>>()?;
        stats.record(dt);
        if !members[0].active() {
            break;
        }
        let (reference, rest) = members.split_first().expect("reference member");
        let fine: Vec<Option<(f64, f64, f64)>> = rest
            .par_iter()
            .map(|m| {
                if m.active() {
                    fine_gaps(&reference.state, &m.state, g_idx).map(Some)
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let time = reference.state.flow.t;
        for (pair, f) in pairs.iter_mut().zip(fine) {
            if let Some((u, th, tr)) = f {
                pair.fine.push(time, u, th, tr);
            }
        }
        if lands {
            debug_assert!(near(time, target));
            sample_all(&mut members, &mut pairs, sample_index)?;
            sample_index += 1;
        }
    }
    for m in &members {
        if let Some(a) = &m.abort {
            log::warn!("nu = {} aborted at t = {}: {}", m.nu, a.t, a.reason);
        }
    }
    let report = assemble(config, workers, &samples, members.as_slice(), pairs, stats)?;
    let traces = members.into_iter().map(|m| m.trace).collect();
    Ok((report, traces))
}

fn gamma_from(members: &[Member], c_k: f64) -> Result<(Option<GammaCalibration>, Option<HoldoutReport>)> {
    let grads: Vec<GridField> = members.iter().flat_map(|m| m.grads.iter().cloned()).collect();
    let omegas: Vec<f64> = members.iter().flat_map(|m| m.omega_inf.iter().copied()).collect();
    if grads.is_empty() {
        return Ok((None, None));
    }
    let omega_inf = omegas.iter().copied().fold(0.0, f64::max);
    let gamma = calibrate_on(&grads, omega_inf, c_k)?;
    let (train, test): (Vec<usize>, Vec<usize>) = (0..grads.len()).partition(|i| i % 2 == 0);
    let holdout = if test.is_empty() {
        None
    } else {
        let pick = |idx: &[usize]| -> (Vec<GridField>, f64) {
            (
                idx.iter().map(|&i| grads[i].clone()).collect(),
                idx.iter().map(|&i| omegas[i]).fold(0.0, f64::max),
            )
        };
        let (tg, tw) = pick(&train);
        let (hg, _) = pick(&test);
        let cal = calibrate_on(&tg, tw, c_k)?;
        let beta = if cal.unconstrained { 0.0 } else { cal.gamma / tw };
        let worst = hg.iter().map(|g| exp_integral_of(g, beta).value).fold(0.0, f64::max);
        Some(HoldoutReport {
            calibration: cal,
            beta,
            held_out: hg.len(),
            worst_integral: worst,
            limit: HOLDOUT_LIMIT,
            passed: worst <= HOLDOUT_LIMIT,
        })
    };
    Ok((Some(gamma), holdout))
}

fn assemble(
    config: &SweepConfig,
    workers: usize,
    samples: &[f64],
    members: &[Member],
    pairs: Vec<Pair>,
    steps: StepStats,
) -> Result<SweepReport> {
    let t = &config.template;
    let (reference, rest) = members.split_first().expect("reference member");
    let partial = members.iter().any(|m| !m.active());
    let (gamma, holdout) = gamma_from(members, t.constants.c_k)?;
    let complete: Vec<NormTrace> = rest.iter().filter(|m| m.active()).map(|m| m.trace.clone()).collect();
    let (constants, constants_error) = match (&gamma, reference.active(), complete.is_empty()) {
        (None, _, _) => (None, Some("no velocity snapshots".to_string())),
        (_, false, _) => (None, Some("reference run aborted".to_string())),
        (_, _, true) => (None, Some("no viscous run completed".to_string())),
        (Some(g), true, false) => match flow_constants(&reference.trace, &complete, g.gamma, &t.constants) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let theta_cadence_sensitivity = members
        .iter()
        .filter(|m| m.trace.len() >= 3)
        .map(|m| {
            let full = theta_aggregate(&m.trace.samples);
            let half = theta_aggregate_half_cadence(&m.trace.samples);
            if full > 0.0 {
                (half - full).abs() / full
            } else {
                0.0
            }
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

    let mut runs = Vec::with_capacity(rest.len());
    let mut mollified = Vec::with_capacity(members.len());
    for m in members {
        if m.trace.is_empty() {
            continue;
        }
        let keep: Vec<usize> = (0..m.state.cutoffs.len())
            .filter(|&i| config.mollifier_cutoffs.contains(&m.state.cutoffs[i]))
            .collect();
        let cut: Vec<u32> = keep.iter().map(|&i| m.state.cutoffs[i]).collect();
        let meas: Vec<Vec<f64>> = keep.iter().map(|&i| m.mollified[i].clone()).collect();
        let rhs: Vec<Vec<f64>> = keep.iter().map(|&i| m.mollified_rhs[i].clone()).collect();
        mollified.push(mollified_consistency(m.nu, &cut, &meas, &rhs)?);
    }
    for (m, pair) in rest.iter().zip(pairs) {
        let omega_gaps = config
            .p_list
            .iter()
            .zip(pair.omega)
            .map(|(&p, values)| VorticityGap {
                p: p_label(p),
                sup: values.iter().copied().fold(0.0, f64::max),
                values,
            })
            .collect();
        runs.push(NuReport {
            nu: m.nu,
            abort: m.abort.clone(),
            initial_gaps: pair.initial,
            omega_gaps,
            fine: pair.fine,
            invariants: InvariantReport::from_trace(&m.trace),
            checks: Default::default(),
        });
    }
    let mut report = SweepReport {
        metadata: SweepMetadata {
            n: t.n,
            t_final: t.t_final,
            kappa: t.kappa,
            initial: t.initial.clone(),
            perturbation: config.perturbation,
            nu_list: config.nu_list.clone(),
            p_list: config.p_list.iter().map(|&p| p_label(p)).collect(),
            samples_per_unit: t.samples_per_unit,
            startup_time: t.startup_time,
            startup_samples_per_unit: t.startup_samples_per_unit,
            safety: t.safety,
            mollifier_cutoffs: config.mollifier_cutoffs.clone(),
            gronwall_cutoff: config.gronwall_cutoff,
            snapshot_stride: config.snapshot_stride,
            snapshots: members.iter().map(|m| m.grads.len()).sum(),
            workers,
            options: t.constants.clone(),
            steps,
        },
        sample_times: samples.to_vec(),
        gamma,
        holdout,
        constants,
        constants_error,
        theta_cadence_sensitivity,
        reference: RunSummary {
            nu: 0.0,
            abort: reference.abort.clone(),
            invariants: InvariantReport::from_trace(&reference.trace),
        },
        runs,
        orders: Vec::new(),
        mollified,
        partial,
    };
    for &p in &config.p_list {
        match convergence_order(&report, p) {
            Ok(fit) => report.orders.push(fit),
            Err(e) => log::info!("no convergence order for p = {}: {e}", p_label(p)),
        }
    }
    report.evaluate_checks()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialData;

    fn small(nu_list: Vec<f64>) -> SweepConfig {
        let mut t = RunConfig::new(32, 0.05, 0.0, 0.05, InitialData::smooth());
        t.samples_per_unit = 80.0;
        let mut c = SweepConfig::new(t, nu_list);
        c.mollifier_cutoffs = vec![2, 4, 8];
        c.gronwall_cutoff = 4;
        c.snapshot_stride = 1;
        c.workers = Some(1);
        c
    }

    #[test]
    fn validation_collects_problems() {
        let mut c = small(vec![1e-3, 1e-2]);
        c.p_list = vec![3.0];
        c.mollifier_cutoffs = vec![4, 4, 100];
        c.snapshot_stride = 0;
        c.workers = Some(0);
        let errs = c.validate();
        assert_eq!(errs.len(), 6, "{errs:?}");
    }

    #[test]
    fn degenerate_sweep_has_zero_gaps() {
        let out = sweep(&small(vec![0.0])).unwrap();
        let run = &out.report.runs[0];
        assert!(run.omega_gaps.iter().all(|g| g.sup == 0.0));
        assert!(run.fine.u_gap.iter().all(|&x| x == 0.0));
        assert!(!out.report.partial);
        assert_eq!(out.traces.len(), 2);
        assert_eq!(out.traces[0], out.traces[1]);
    }

    #[test]
    fn perturbed_initial_gaps_scale_with_nu() {
        let mut c = small(vec![2e-2, 1e-2]);
        c.template.t_final = 0.0;
        c.perturbation = Perturbation { omega: 1.0, theta: 1.0 };
        let out = sweep(&c).unwrap();
        let (a, b) = (&out.report.runs[0].initial_gaps, &out.report.runs[1].initial_gaps);
        assert!((a.omega_l2 / b.omega_l2 - 2.0).abs() < 1e-12);
        assert!((a.theta_l2 / b.theta_l2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaps_are_symmetric() {
        let g = Grid::new(16).unwrap();
        let a = initial_state(g, &InitialData::smooth(), Perturbation { omega: 1.0, theta: 0.0 }, 0.1, 0.1).unwrap();
        let b = initial_state(g, &InitialData::smooth(), Perturbation::default(), 0.0, 0.1).unwrap();
        let s = Sampler::new(g);
        let p = [1.0, 2.0, 4.0, f64::INFINITY];
        assert_eq!(vorticity_gaps(&s, &a.omega, &b.omega, &p).unwrap(), vorticity_gaps(&s, &b.omega, &a.omega, &p).unwrap());
        assert_eq!(velocity_gap(&a, &b).unwrap(), velocity_gap(&b, &a).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut c = small(vec![1e-2, 1e-3]);
        c.perturbation = Perturbation { omega: 0.0, theta: 1.0 };
        let a = sweep(&c).unwrap();
        c.workers = Some(3);
        let mut b = sweep(&c).unwrap();
        b.report.metadata.workers = a.report.metadata.workers;
        assert_eq!(a.report, b.report);
        assert_eq!(a.traces, b.traces);
    }
}
