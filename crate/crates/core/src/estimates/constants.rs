use serde::{Deserialize, Serialize};

use crate::dynamics::{NormSample, NormTrace};
use crate::error::{invalid, Error, Result};
use crate::torus::{exp_integral_of, rot, velocity_gradient_norm, GridField, SpectralPlan, VelocityField};

/// Where `C0` and `beta` enter the constant `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KForm {
    /// `2 C_K (C0 beta Omega2 Omega4 / U + beta sqrt(U) Theta)^4`.
    #[default]
    Proof,
    /// `2 C0 (gamma / Omega_inf) (Omega2 Omega4 / U + sqrt(U) Theta)^4`.
    Remark,
}

/// Universal constants the estimates leave symbolic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantOptions {
    /// Trudinger–Moser constant.
    pub c_k: f64,
    pub c0: f64,
    /// Constant in the transported-scalar estimate.
    pub c_univ: f64,
    /// Exponent on `K` in `C1 = 4 K^{e1}`.
    pub e1: f64,
    pub k_form: KForm,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        Self {
            c_k: 2.0,
            c0: 1.0,
            c_univ: 1.0,
            e1: 40.0,
            k_form: KForm::Proof,
        }
    }
}

impl ConstantOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.c_k > 1.0 && self.c_k.is_finite()) {
            errs.push(format!("constants.c_k must exceed 1 (the torus has area 1), got {}", self.c_k));
        }
        if !(self.c0 >= 1.0 && self.c0.is_finite()) {
            errs.push(format!("constants.c0 must be at least 1, got {}", self.c0));
        }
        if !(self.c_univ > 0.0 && self.c_univ.is_finite()) {
            errs.push(format!("constants.c_univ must be positive, got {}", self.c_univ));
        }
        if !(self.e1 > 0.0 && self.e1.is_finite()) {
            errs.push(format!("constants.e1 must be positive, got {}", self.e1));
        }
        errs
    }
}

/// Constant inventory of one run family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub u: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub omega4: f64,
    pub omega_inf: f64,
    pub theta: f64,
    pub gamma_emp: f64,
    pub c_k: f64,
    pub c0: f64,
    pub c_univ: f64,
    pub e1: f64,
    pub k_form: KForm,
    /// `gamma_emp / omega_inf`.
    pub beta: f64,
    pub k_script: f64,
}

/// Relative tolerance for the derived fields of [`BoundConstants`].
const DERIVED_TOL: f64 = 1e-12;
/// Grid maxima may undershoot lower-order norms by this factor.
const LINF_SLACK: f64 = 1.05;

impl BoundConstants {
    /// Assembles the inventory from `U`, `[Omega1, Omega2, Omega4, Omega_inf]`, `Theta` and `gamma`.
    pub fn from_parts(u: f64, omega: [f64; 4], theta: f64, gamma_emp: f64, opts: &ConstantOptions) -> Result<Self> {
        let errs = opts.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let mut c = Self {
            u,
            omega1: omega[0],
            omega2: omega[1],
            omega4: omega[2],
            omega_inf: omega[3],
            theta,
            gamma_emp,
            c_k: opts.c_k,
            c0: opts.c0,
            c_univ: opts.c_univ,
            e1: opts.e1,
            k_form: opts.k_form,
            beta: gamma_emp / omega[3],
            k_script: 0.0,
        };
        c.k_script = c.recompute_k();
        c.check()?;
        Ok(c)
    }

    /// Same family with different universal constants.
    pub fn with_options(&self, opts: &ConstantOptions) -> Result<Self> {
        Self::from_parts(
            self.u,
            [self.omega1, self.omega2, self.omega4, self.omega_inf],
            self.theta,
            self.gamma_emp,
            opts,
        )
    }

    pub fn options(&self) -> ConstantOptions {
        ConstantOptions {
            c_k: self.c_k,
            c0: self.c0,
            c_univ: self.c_univ,
            e1: self.e1,
            k_form: self.k_form,
        }
    }

    pub fn recompute_k(&self) -> f64 {
        let drift = self.omega2 * self.omega4 / self.u;
        let heat = self.u.sqrt() * self.theta;
        match self.k_form {
            KForm::Proof => 2.0 * self.c_k * (self.c0 * self.beta * drift + self.beta * heat).powi(4),
            KForm::Remark => 2.0 * self.c0 * (self.gamma_emp / self.omega_inf) * (drift + heat).powi(4),
        }
    }

    /// Positivity, consistency of `beta` and `K`, and monotonicity of `Omega_p`.
    pub fn check(&self) -> Result<()> {
        let named = [
            ("U", self.u),
            ("Omega1", self.omega1),
            ("Omega2", self.omega2),
            ("Omega4", self.omega4),
            ("Omega_inf", self.omega_inf),
            ("Theta", self.theta),
            ("gamma", self.gamma_emp),
            ("beta", self.beta),
            ("K", self.k_script),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Degenerate(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let rel = |a: f64, b: f64| (a - b).abs() <= DERIVED_TOL * a.abs().max(b.abs());
        if !rel(self.beta * self.omega_inf, self.gamma_emp) {
            return invalid("beta * Omega_inf differs from gamma");
        }
        if !rel(self.k_script, self.recompute_k()) {
            return invalid("stored K differs from its formula");
        }
        let slack = 1.0 + DERIVED_TOL;
        if self.omega1 > self.omega2 * slack
            || self.omega2 > self.omega4 * slack
            || self.omega4 > self.omega_inf * LINF_SLACK
        {
            return invalid(format!(
                "Omega_p must be nondecreasing in p: {} {} {} {}",
                self.omega1, self.omega2, self.omega4, self.omega_inf
            ));
        }
        Ok(())
    }
}

/// `||theta||_{L^1_t W^{1,inf}} + ||theta||_{L^2_t H^1}` by trapezoid on the samples.
pub fn theta_aggregate(samples: &[NormSample]) -> f64 {
    let mut w1 = 0.0;
    let mut h1 = 0.0;
    for p in samples.windows(2) {
        let h = p[1].t - p[0].t;
        w1 += 0.5 * h * (p[0].theta_linf + p[0].grad_theta_linf + p[1].theta_linf + p[1].grad_theta_linf);
        h1 += 0.5 * h * (p[0].theta_h1 * p[0].theta_h1 + p[1].theta_h1 * p[1].theta_h1);
    }
    w1 + h1.sqrt()
}

/// [`theta_aggregate`] recomputed from every other sample (the last one always kept).
pub fn theta_aggregate_half_cadence(samples: &[NormSample]) -> f64 {
    let mut thin: Vec<NormSample> = samples.iter().step_by(2).cloned().collect();
    if samples.len().is_multiple_of(2) {
        if let Some(last) = samples.last() {
            thin.push(last.clone());
        }
    }
    theta_aggregate(&thin)
}

struct FamilySups {
    u: f64,
    omega: [f64; 4],
    theta: f64,
}

fn sups(trace: &NormTrace) -> FamilySups {
    let max = |f: fn(&NormSample) -> f64| trace.samples.iter().map(f).fold(0.0, f64::max);
    FamilySups {
        u: max(|s| s.u_l2),
        omega: [
            max(|s| s.omega_l1),
            max(|s| s.omega_l2),
            max(|s| s.omega_l4),
            max(|s| s.omega_linf),
        ],
        theta: theta_aggregate(&trace.samples),
    }
}

/// Constants as suprema over the viscous family plus the reference values.
pub fn flow_constants(
    reference: &NormTrace,
    family: &[NormTrace],
    gamma_emp: f64,
    opts: &ConstantOptions,
) -> Result<BoundConstants> {
    let times = reference.times();
    for tr in family {
        if tr.times() != times {
            return Err(Error::GridMismatch("traces do not share a time grid".into()));
        }
    }
    let r = sups(reference);
    let mut f = FamilySups {
        u: 0.0,
        omega: [0.0; 4],
        theta: 0.0,
    };
    for tr in family {
        let s = sups(tr);
        f.u = f.u.max(s.u);
        for (a, b) in f.omega.iter_mut().zip(s.omega) {
            *a = a.max(b);
        }
        f.theta = f.theta.max(s.theta);
    }
    let omega = [
        f.omega[0] + r.omega[0],
        f.omega[1] + r.omega[1],
        f.omega[2] + r.omega[2],
        f.omega[3] + r.omega[3],
    ];
    BoundConstants::from_parts(f.u + r.u, omega, f.theta + r.theta, gamma_emp, opts)
}

/// Outcome of [`calibrate_gamma`]; `unconstrained` flags the `+inf` sentinel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaCalibration {
    #[serde(with = "crate::io::float")]
    pub gamma: f64,
    pub omega_inf: f64,
    pub unconstrained: bool,
    pub snapshots: usize,
    /// Largest integral over the snapshots at the returned `gamma`.
    #[serde(with = "crate::io::float")]
    pub worst_integral: f64,
}

/// Relative bisection tolerance on `gamma`.
pub const GAMMA_TOL: f64 = 1e-6;

/// Gradient magnitudes and vorticity maximum of each snapshot.
pub fn snapshot_gradients(snapshots: &[VelocityField]) -> Result<(Vec<GridField>, f64)> {
    let mut grads = Vec::with_capacity(snapshots.len());
    let mut omega_inf: f64 = 0.0;
    let mut plan: Option<SpectralPlan> = None;
    for u in snapshots {
        if plan.as_ref().is_none_or(|p| p.grid() != u.grid()) {
            plan = Some(SpectralPlan::new(u.grid()));
        }
        let p = plan.as_ref().expect("plan just created");
        omega_inf = omega_inf.max(p.inverse(&rot(u))?.max_abs());
        grads.push(velocity_gradient_norm(p, u)?);
    }
    Ok((grads, omega_inf))
}

fn worst_integral(grads: &[GridField], beta: f64) -> f64 {
    grads.iter().map(|g| exp_integral_of(g, beta).value).fold(0.0, f64::max)
}

/// Largest `gamma` with `int exp(gamma |grad u| / Omega_inf) <= c_k` on every snapshot.
pub fn calibrate_gamma(snapshots: &[VelocityField], c_k: f64) -> Result<GammaCalibration> {
    if snapshots.is_empty() {
        return Err(Error::InsufficientData("no velocity snapshots to calibrate on".into()));
    }
    if !(c_k > 1.0 && c_k.is_finite()) {
        return invalid(format!("C_K must exceed 1, got {c_k}"));
    }
    let (grads, omega_inf) = snapshot_gradients(snapshots)?;
    calibrate_on(&grads, omega_inf, c_k)
}

/// [`calibrate_gamma`] on precomputed gradients.
pub fn calibrate_on(grads: &[GridField], omega_inf: f64, c_k: f64) -> Result<GammaCalibration> {
    if grads.is_empty() {
        return Err(Error::InsufficientData("no velocity snapshots to calibrate on".into()));
    }
    if !(omega_inf.is_finite()) {
        return Err(Error::NonFinite("snapshot vorticity".into()));
    }
    let gmax = grads.iter().map(|g| g.max_abs()).fold(0.0, f64::max);
    if omega_inf == 0.0 || gmax == 0.0 {
        return Ok(GammaCalibration {
            gamma: f64::INFINITY,
            omega_inf,
            unconstrained: true,
            snapshots: grads.len(),
            worst_integral: 1.0,
        });
    }
    let ok = |gamma: f64| worst_integral(grads, gamma / omega_inf) <= c_k;
    let (mut lo, mut hi) = (0.0, 1.0);
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
    }
    if lo == 0.0 {
        let mut probe = 0.5;
        while !ok(probe) {
            hi = probe;
            probe *= 0.5;
        }
        lo = probe;
    }
    while hi - lo > GAMMA_TOL * lo {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(GammaCalibration {
        gamma: lo,
        omega_inf,
        unconstrained: false,
        snapshots: grads.len(),
        worst_integral: worst_integral(grads, lo / omega_inf),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{initial_state, InitialData, Perturbation};
    use crate::torus::{biot_savart, Grid, SpectralField};

    fn sample(t: f64, u: f64, w: [f64; 4]) -> NormSample {
        let mut row = [0.0; 17];
        row[0] = t;
        row[1] = u;
        row[2..6].copy_from_slice(&w);
        row[6] = 1.0;
        row[7] = 2.0;
        row[8] = 1.0;
        row[9] = 3.0;
        NormSample::from_row(&row).unwrap()
    }

    fn trace(u: f64, w: [f64; 4]) -> NormTrace {
        let mut tr = NormTrace::new(0.0, 0.1);
        tr.samples = (0..5).map(|i| sample(i as f64 * 0.25, u, w)).collect();
        tr
    }

    #[test]
    fn constant_trace_gives_exact_suprema() {
        let r = trace(1.0, [1.0, 2.0, 3.0, 4.0]);
        let c = flow_constants(&r, &[], 1.0, &ConstantOptions::default()).unwrap();
        assert_eq!(c.u, 1.0);
        assert_eq!(c.omega_inf, 4.0);
        // int (1 + 3) dt + sqrt(int 4 dt) over [0, 1]
        assert!((c.theta - 6.0).abs() < 1e-15);
        assert_eq!(c.beta, 0.25);
        assert_eq!(c.k_script, c.recompute_k());
    }

    #[test]
    fn family_order_is_irrelevant() {
        let r = trace(1.0, [1.0, 2.0, 3.0, 4.0]);
        let a = trace(1.5, [1.0, 2.5, 3.0, 4.0]);
        let b = trace(0.5, [2.0, 2.0, 3.5, 4.5]);
        let opts = ConstantOptions::default();
        let x = flow_constants(&r, &[a.clone(), b.clone()], 1.0, &opts).unwrap();
        let y = flow_constants(&r, &[b, a], 1.0, &opts).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.u, 2.5);
        assert_eq!(x.omega2, 4.5);
    }

    #[test]
    fn degenerate_traces_are_rejected() {
        let z = trace(0.0, [0.0; 4]);
        assert!(matches!(
            flow_constants(&z, &[], 1.0, &ConstantOptions::default()),
            Err(Error::Degenerate(_))
        ));
        let r = trace(1.0, [1.0, 2.0, 3.0, 4.0]);
        let mut other = trace(1.0, [1.0, 2.0, 3.0, 4.0]);
        other.samples.pop();
        assert!(matches!(
            flow_constants(&r, &[other], 1.0, &ConstantOptions::default()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn k_forms_differ_only_in_placement() {
        let opts = ConstantOptions {
            c0: 1.0,
            c_k: 2.0,
            ..ConstantOptions::default()
        };
        let p = BoundConstants::from_parts(4.0, [1.0, 2.0, 3.0, 4.0], 1.0, 2.0, &opts).unwrap();
        let r = p
            .with_options(&ConstantOptions {
                k_form: KForm::Remark,
                ..opts
            })
            .unwrap();
        // beta = 1/2: proof form is 4 (beta (1.5 + 2))^4, remark form 2 beta (3.5)^4
        assert!((p.k_script - 4.0 * 1.75_f64.powi(4)).abs() < 1e-12);
        assert!((r.k_script - 3.5_f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn constant_velocity_is_unconstrained() {
        let g = Grid::new(16).unwrap();
        let u = biot_savart(&SpectralField::zeros(g), [1.0, 0.0]).unwrap();
        let c = calibrate_gamma(&[u], 2.0).unwrap();
        assert!(c.unconstrained && c.gamma.is_infinite());
        assert!(calibrate_gamma(&[], 2.0).is_err());
    }

    #[test]
    fn gamma_is_scale_invariant() {
        let g = Grid::new(64).unwrap();
        let s = initial_state(g, &InitialData::smooth(), Perturbation::default(), 0.0, 0.1).unwrap();
        let u = s.velocity();
        let a = calibrate_gamma(std::slice::from_ref(&u), 2.0).unwrap();
        assert!(a.gamma.is_finite() && a.gamma > 0.0);
        assert!(a.worst_integral <= 2.0);
        for lambda in [2.0, 3.0, 0.1] {
            let b = calibrate_gamma(&[u.scale(lambda)], 2.0).unwrap();
            assert!((a.gamma - b.gamma).abs() <= 2.0 * GAMMA_TOL * a.gamma, "{lambda}: {} {}", a.gamma, b.gamma);
        }
    }
}
