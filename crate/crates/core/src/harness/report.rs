use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::dynamics::{AbortInfo, InitialData, InvariantReport, Perturbation, StepStats};
use crate::error::{Error, Result};
use crate::estimates::{
    check_domination, check_domination_with, final_velocity_bound, gronwall_envelope, iteration_constants,
    nu_tilde_limit, r_star, theta_stability_bound, windowed_smallness_envelope, BoundConstants, ConstantOptions,
    DominationReport, Envelope, FinalForm, GammaCalibration,
};

/// Relative slack on the temperature-gap bound.
pub const THETA_TOL: f64 = 1e-6;
/// Relative slack on the mollified-consistency inequality.
pub const MOLLIFIED_TOL: f64 = 1e-6;
/// Absolute round-off floor on the mollified-consistency inequality.
pub const MOLLIFIED_FLOOR: f64 = 1e-13;
/// Largest admissible held-out Trudinger–Moser integral.
pub const HOLDOUT_LIMIT: f64 = 2.5;

/// Label of a Lebesgue exponent: `"1"`, `"2"`, `"4"` or `"inf"`.
pub fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

pub fn parse_p(label: &str) -> Option<f64> {
    match label {
        "inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        other => other.parse().ok().filter(|p: &f64| *p >= 1.0),
    }
}

/// Per-step gaps between a viscous run and the reference.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapSeries {
    pub times: Vec<f64>,
    /// `||u^nu - u||_{L^2}`.
    pub u_gap: Vec<f64>,
    /// `||theta^nu - theta||_{L^2}`.
    pub theta_gap: Vec<f64>,
    /// `||omega^nu_l - omega_l||_{L^2}` at the Grönwall cutoff.
    pub tracer_gap: Vec<f64>,
}

impl GapSeries {
    pub fn push(&mut self, t: f64, u: f64, theta: f64, tracer: f64) {
        self.times.push(t);
        self.u_gap.push(u);
        self.theta_gap.push(theta);
        self.tracer_gap.push(tracer);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sampled `||omega^nu - omega||_{L^p}` and its supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VorticityGap {
    pub p: String,
    pub values: Vec<f64>,
    pub sup: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialGaps {
    pub omega_l2: f64,
    pub theta_l2: f64,
    pub u_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallCheck {
    pub cutoff: u32,
    /// Measured sup of `max(0, d/dt D^2 / 2) / (g D + nu)` over steps.
    #[serde(with = "crate::io::float")]
    pub c_ell: f64,
    pub report: DominationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalBoundCheck {
    pub form: FinalForm,
    /// Base-10 logarithms; the values themselves underflow for realistic constants.
    #[serde(with = "crate::io::float")]
    pub log10_nu_tilde: f64,
    #[serde(with = "crate::io::float")]
    pub log10_delta0: f64,
    #[serde(with = "crate::io::float")]
    pub r_star: f64,
    /// Smallness hypotheses of the discrete iteration; the mask of `report`.
    pub small: bool,
    pub report: DominationReport,
}

/// Constant-dependent verdicts of one viscous run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunChecks {
    #[serde(with = "crate::io::float::option")]
    pub theta_bound_sq: Option<f64>,
    /// `||theta^nu - theta||^2 <= e^{2 U Theta} ||theta^nu_0 - theta_0||^2`.
    pub theta_stability: Option<DominationReport>,
    /// `||theta^nu - theta|| <= e^{2 U Theta} ||theta^nu_0 - theta_0||`.
    pub theta_stability_unsquared: Option<DominationReport>,
    pub smallness: Option<DominationReport>,
    pub final_bound: Option<FinalBoundCheck>,
    pub gronwall: Option<GronwallCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuReport {
    pub nu: f64,
    pub abort: Option<AbortInfo>,
    pub initial_gaps: InitialGaps,
    pub omega_gaps: Vec<VorticityGap>,
    pub fine: GapSeries,
    pub invariants: InvariantReport,
    pub checks: RunChecks,
}

impl NuReport {
    pub fn sup_gap(&self, p: f64) -> Option<f64> {
        let label = p_label(p);
        self.omega_gaps.iter().find(|g| g.p == label).map(|g| g.sup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub nu: f64,
    pub abort: Option<AbortInfo>,
    pub invariants: InvariantReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub p: String,
    pub order: f64,
    pub residual: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifiedRow {
    pub cutoff: u32,
    /// `sup_t ||omega_l - omega||_{L^2}`.
    pub measured: f64,
    /// `||omega_0 - mollify(omega_0)|| + int ||d1 theta - mollify(d1 theta)||` at the final time.
    pub rhs: f64,
    /// The inequality holds at every sample.
    pub pointwise: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifiedTable {
    pub nu: f64,
    pub rows: Vec<MollifiedRow>,
    pub measured_nonincreasing: bool,
    pub rhs_nonincreasing: bool,
    pub passed: bool,
}

/// Held-out Trudinger–Moser check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub calibration: GammaCalibration,
    #[serde(with = "crate::io::float")]
    pub beta: f64,
    pub held_out: usize,
    #[serde(with = "crate::io::float")]
    pub worst_integral: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub n: usize,
    pub t_final: f64,
    pub kappa: f64,
    pub initial: InitialData,
    pub perturbation: Perturbation,
    pub nu_list: Vec<f64>,
    pub p_list: Vec<String>,
    pub samples_per_unit: f64,
    #[serde(default)]
    pub startup_time: f64,
    #[serde(default)]
    pub startup_samples_per_unit: f64,
    pub safety: f64,
    pub mollifier_cutoffs: Vec<u32>,
    pub gronwall_cutoff: u32,
    pub snapshot_stride: usize,
    pub snapshots: usize,
    pub workers: usize,
    pub options: ConstantOptions,
    pub steps: StepStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metadata: SweepMetadata,
    pub sample_times: Vec<f64>,
    pub gamma: Option<GammaCalibration>,
    pub holdout: Option<HoldoutReport>,
    pub constants: Option<BoundConstants>,
    pub constants_error: Option<String>,
    /// Largest relative change of `Theta` when recomputed at half cadence.
    #[serde(with = "crate::io::float::option")]
    pub theta_cadence_sensitivity: Option<f64>,
    pub reference: RunSummary,
    pub runs: Vec<NuReport>,
    pub orders: Vec<OrderFit>,
    pub mollified: Vec<MollifiedTable>,
    pub partial: bool,
}

/// One named pass/fail entry; `masked` entries had no valid sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub masked: bool,
}

impl Verdict {
    fn new(name: String, passed: bool) -> Self {
        Self {
            name,
            passed,
            masked: false,
        }
    }

    fn domination(name: String, r: &DominationReport) -> Self {
        Self {
            name,
            passed: r.passed,
            masked: r.valid == 0,
        }
    }
}

/// Measured `C_l` and the Grönwall envelope on `D^2` with `A = C g`, `B = C (g + 2 nu)`,
/// `g = ||u^nu - u|| + ||theta^nu - theta||`, `D = ||omega^nu_l - omega_l||`.
pub fn vorticity_gap_gronwall_check(series: &GapSeries, nu: f64, cutoff: u32) -> Result<GronwallCheck> {
    let n = series.len();
    if n == 0 || series.u_gap.len() != n || series.theta_gap.len() != n || series.tracer_gap.len() != n {
        return Err(Error::GridMismatch("gap series lengths differ".into()));
    }
    let g: Vec<f64> = series.u_gap.iter().zip(&series.theta_gap).map(|(a, b)| a + b).collect();
    let d = &series.tracer_gap;
    let mut c_ell: f64 = 0.0;
    for k in 1..n {
        let h = series.times[k] - series.times[k - 1];
        if h <= 0.0 {
            continue;
        }
        let rise = (0.5 * (d[k] * d[k] - d[k - 1] * d[k - 1]) / h).max(0.0);
        let drive = 0.5 * (g[k] * d[k] + g[k - 1] * d[k - 1]) + nu;
        let q = if rise == 0.0 {
            0.0
        } else if drive > 0.0 {
            rise / drive
        } else {
            f64::INFINITY
        };
        c_ell = c_ell.max(q);
    }
    let a: Vec<f64> = g.iter().map(|x| c_ell * x).collect();
    let b: Vec<f64> = g.iter().map(|x| c_ell * (x + 2.0 * nu)).collect();
    let measured: Vec<f64> = d.iter().map(|x| x * x).collect();
    let report = if c_ell.is_finite() {
        let mut env = gronwall_envelope(measured[0], &a, &b, &series.times)?;
        env.label = format!("vorticity gap Grönwall, cutoff {cutoff}");
        check_domination(&series.times, &measured, &env)?
    } else {
        let env = Envelope::new(
            series.times.clone(),
            vec![f64::INFINITY; n],
            vec![true; n],
            "vorticity gap Grönwall (unbounded coefficient)",
        )?;
        check_domination(&series.times, &measured, &env)?
    };
    Ok(GronwallCheck { cutoff, c_ell, report })
}

/// Least-squares slope of `log sup_t ||omega^nu - omega||_{L^p}` against `log nu`.
pub fn convergence_order(report: &SweepReport, p: f64) -> Result<OrderFit> {
    let pts: Vec<(f64, f64)> = report
        .runs
        .iter()
        .filter(|r| r.nu > 0.0 && r.abort.is_none())
        .filter_map(|r| r.sup_gap(p).filter(|s| *s > 0.0).map(|s| (r.nu.ln(), s.ln())))
        .collect();
    fit_order(&pts, p)
}

pub(crate) fn fit_order(pts: &[(f64, f64)], p: f64) -> Result<OrderFit> {
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "convergence order needs at least 3 viscosities with nonzero gaps, got {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / m,
        pts.iter().map(|p| p.1).sum::<f64>() / m,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all viscosities coincide".into()));
    }
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Ok(OrderFit {
        p: p_label(p),
        order: slope,
        residual: (rss / m).sqrt(),
        points: pts.len(),
    })
}

/// Whether a column is nonincreasing up to a floor relative to its first entry.
pub fn nonincreasing(col: &[f64]) -> bool {
    let floor = 1e-14 * col.first().copied().unwrap_or(0.0).abs();
    col.windows(2).all(|w| w[1] <= w[0] + floor)
}

/// Builds the table from per-cutoff sampled columns.
pub fn mollified_consistency(nu: f64, cutoffs: &[u32], measured: &[Vec<f64>], rhs: &[Vec<f64>]) -> Result<MollifiedTable> {
    if measured.len() != cutoffs.len() || rhs.len() != cutoffs.len() {
        return Err(Error::InsufficientData("mollified columns missing for some cutoffs".into()));
    }
    let rows: Vec<MollifiedRow> = cutoffs
        .iter()
        .zip(measured.iter().zip(rhs))
        .map(|(&cutoff, (m, r))| MollifiedRow {
            cutoff,
            measured: m.iter().cloned().fold(0.0, f64::max),
            rhs: r.iter().cloned().fold(0.0, f64::max),
            pointwise: m.len() == r.len() && m.iter().zip(r).all(|(a, b)| *a <= b * (1.0 + MOLLIFIED_TOL) + MOLLIFIED_FLOOR),
        })
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].cutoff);
    let mcol: Vec<f64> = order.iter().map(|&i| rows[i].measured).collect();
    let rcol: Vec<f64> = order.iter().map(|&i| rows[i].rhs).collect();
    let measured_nonincreasing = nonincreasing(&mcol);
    let rhs_nonincreasing = nonincreasing(&rcol);
    let passed = rows.iter().all(|r| r.pointwise) && measured_nonincreasing && rhs_nonincreasing;
    Ok(MollifiedTable {
        nu,
        rows,
        measured_nonincreasing,
        rhs_nonincreasing,
        passed,
    })
}

fn theta_checks(run: &NuReport, c: &BoundConstants) -> Result<(f64, DominationReport, DominationReport)> {
    let f = &run.fine;
    let bound_sq = theta_stability_bound(run.initial_gaps.theta_l2, c.u, c.theta);
    let n = f.len();
    let sq: Vec<f64> = f.theta_gap.iter().map(|x| x * x).collect();
    let env = Envelope::new(f.times.clone(), vec![bound_sq; n], vec![true; n], "temperature gap (squared)")?;
    let squared = check_domination_with(&f.times, &sq, &env, THETA_TOL)?;
    let lin = (2.0 * c.u * c.theta).exp() * run.initial_gaps.theta_l2;
    let env = Envelope::new(f.times.clone(), vec![lin; n], vec![true; n], "temperature gap")?;
    let unsquared = check_domination_with(&f.times, &f.theta_gap, &env, THETA_TOL)?;
    Ok((bound_sq, squared, unsquared))
}

fn smallness_check(run: &NuReport, c: &BoundConstants) -> Result<DominationReport> {
    let f = &run.fine;
    let u2 = c.u * c.u;
    let y: Vec<f64> = f.u_gap.iter().map(|x| x * x / u2).collect();
    let env = windowed_smallness_envelope(&f.times, &y, run.nu, c)?;
    check_domination(&f.times, &y, &env)
}

/// Windowed smallness envelope of a run, for plotting.
pub fn smallness_series(run: &NuReport, c: &BoundConstants) -> Result<(Vec<f64>, Envelope)> {
    let u2 = c.u * c.u;
    let y: Vec<f64> = run.fine.u_gap.iter().map(|x| x * x / u2).collect();
    let env = windowed_smallness_envelope(&run.fine.times, &y, run.nu, c)?;
    Ok((y, env))
}

/// Smallness hypotheses of the discrete iteration, evaluated in log space:
/// `(log10 nu_tilde, log10 delta_0, r_star, small)`.
pub fn iteration_smallness(y0: f64, nu: f64, c: &BoundConstants) -> (f64, f64, f64, bool) {
    let (_, c2) = iteration_constants(c);
    let ln_c1_sq = 2.0 * (4.0_f64.ln() + c.e1 * c.k_script.ln());
    let ln_nu_tilde = (c2 * nu).ln() - ln_c1_sq;
    let ln_delta0 = (y0 + c2 * nu).ln() - ln_c1_sq;
    let r = r_star(ln_nu_tilde.exp());
    let small = ln_nu_tilde <= nu_tilde_limit().ln() && ln_delta0.is_finite() && ln_delta0 < r.ln();
    (ln_nu_tilde / LN_10, ln_delta0 / LN_10, r, small)
}

fn final_check(run: &NuReport, c: &BoundConstants) -> Result<FinalBoundCheck> {
    let f = &run.fine;
    let gap_sq = run.initial_gaps.u_l2 * run.initial_gaps.u_l2;
    let (log10_nu_tilde, log10_delta0, r_star, small) = iteration_smallness(gap_sq / (c.u * c.u), run.nu, c);
    let values = f
        .times
        .iter()
        .map(|&t| final_velocity_bound(t, run.nu, gap_sq, c, FinalForm::Exponential))
        .collect::<Result<Vec<_>>>()?;
    let env = Envelope::new(f.times.clone(), values, vec![small; f.len()], "final velocity bound")?;
    let measured: Vec<f64> = f.u_gap.iter().map(|x| x * x).collect();
    Ok(FinalBoundCheck {
        form: FinalForm::Exponential,
        log10_nu_tilde,
        log10_delta0,
        r_star,
        small,
        report: check_domination(&f.times, &measured, &env)?,
    })
}

impl SweepReport {
    /// Recomputes every constant-dependent verdict from the stored series.
    pub fn evaluate_checks(&mut self) -> Result<()> {
        let cutoff = self.metadata.gronwall_cutoff;
        for run in &mut self.runs {
            let mut checks = RunChecks::default();
            if run.fine.is_empty() {
                run.checks = checks;
                continue;
            }
            checks.gronwall = Some(vorticity_gap_gronwall_check(&run.fine, run.nu, cutoff)?);
            if let Some(c) = &self.constants {
                let (b, sq, lin) = theta_checks(run, c)?;
                checks.theta_bound_sq = Some(b);
                checks.theta_stability = Some(sq);
                checks.theta_stability_unsquared = Some(lin);
                checks.smallness = Some(smallness_check(run, c)?);
                checks.final_bound = Some(final_check(run, c)?);
            }
            run.checks = checks;
        }
        Ok(())
    }

    /// Replaces the universal constants and re-evaluates.
    pub fn with_options(&self, opts: &ConstantOptions) -> Result<SweepReport> {
        let mut out = self.clone();
        out.metadata.options = opts.clone();
        if let Some(c) = &self.constants {
            out.constants = Some(c.with_options(opts)?);
        }
        out.evaluate_checks()?;
        Ok(out)
    }

    /// Every executed verdict in a fixed order.
    pub fn verdicts(&self) -> Vec<Verdict> {
        let mut v = Vec::new();
        let inv = |v: &mut Vec<Verdict>, prefix: &str, r: &InvariantReport| {
            for p in &r.verdicts {
                v.push(Verdict::new(format!("{prefix}: {}", p.name), p.passed));
            }
        };
        v.push(Verdict::new("reference completed".into(), self.reference.abort.is_none()));
        inv(&mut v, "reference", &self.reference.invariants);
        for run in &self.runs {
            let tag = format!("nu={}", run.nu);
            v.push(Verdict::new(format!("{tag}: completed"), run.abort.is_none()));
            inv(&mut v, &tag, &run.invariants);
            let c = &run.checks;
            if let Some(r) = &c.theta_stability {
                v.push(Verdict::domination(format!("{tag}: temperature-gap bound"), r));
            }
            if let Some(r) = &c.smallness {
                v.push(Verdict::domination(format!("{tag}: propagation of smallness"), r));
            }
            if let Some(r) = &c.final_bound {
                v.push(Verdict::domination(format!("{tag}: final velocity bound"), &r.report));
            }
            if let Some(r) = &c.gronwall {
                v.push(Verdict::domination(format!("{tag}: vorticity-gap Grönwall"), &r.report));
            }
        }
        for t in &self.mollified {
            v.push(Verdict::new(format!("nu={}: mollified consistency", t.nu), t.passed));
        }
        if let Some(h) = &self.holdout {
            v.push(Verdict::new("Trudinger–Moser hold-out".into(), h.passed));
        }
        v
    }

    /// True when every verdict passed or was masked.
    pub fn all_passed(&self) -> bool {
        self.verdicts().iter().all(|v| v.passed || v.masked)
    }
}
