use serde::{Deserialize, Serialize};

use super::constants::BoundConstants;
use crate::error::{invalid, Error, Result};

/// Relative slack on every domination verdict.
pub const DOMINATION_TOL: f64 = 1e-9;

/// Sampled bound with an explicit validity mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    #[serde(with = "crate::io::float::vec")]
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub label: String,
}

impl Envelope {
    pub fn new(times: Vec<f64>, values: Vec<f64>, valid: Vec<bool>, label: &str) -> Result<Self> {
        if values.len() != times.len() || valid.len() != times.len() {
            return invalid(format!(
                "envelope lengths differ: {} times, {} values, {} mask entries",
                times.len(),
                values.len(),
                valid.len()
            ));
        }
        Ok(Self {
            times,
            values,
            valid,
            label: label.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// The first sample where the measured series exceeds its envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub t: f64,
    #[serde(with = "crate::io::float")]
    pub measured: f64,
    #[serde(with = "crate::io::float")]
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub label: String,
    pub samples: usize,
    pub valid: usize,
    pub fraction_valid: f64,
    /// Largest `measured / bound` over valid samples.
    #[serde(with = "crate::io::float")]
    pub worst_ratio: f64,
    pub violations: usize,
    pub first_violation: Option<Violation>,
    pub passed: bool,
}

/// Per-sample `measured <= bound (1 + 1e-9)` wherever the mask is valid.
pub fn check_domination(times: &[f64], measured: &[f64], envelope: &Envelope) -> Result<DominationReport> {
    check_domination_with(times, measured, envelope, DOMINATION_TOL)
}

/// [`check_domination`] with relative slack `tol`.
pub fn check_domination_with(
    times: &[f64],
    measured: &[f64],
    envelope: &Envelope,
    tol: f64,
) -> Result<DominationReport> {
    if times.len() != envelope.times.len() || times.iter().zip(&envelope.times).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch(format!(
            "measured series on {} times does not match envelope '{}' on {} times",
            times.len(),
            envelope.label,
            envelope.times.len()
        )));
    }
    if measured.len() != times.len() {
        return invalid(format!("{} measured values for {} times", measured.len(), times.len()));
    }
    let mut valid = 0;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let mut first = None;
    for (i, ((&m, &b), &ok)) in measured.iter().zip(&envelope.values).zip(&envelope.valid).enumerate() {
        if !ok {
            continue;
        }
        valid += 1;
        let ratio = if m == 0.0 {
            0.0
        } else if b > 0.0 {
            m / b
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if !(m <= b * (1.0 + tol)) {
            violations += 1;
            if first.is_none() {
                first = Some(Violation {
                    index: i,
                    t: times[i],
                    measured: m,
                    bound: b,
                });
            }
        }
    }
    Ok(DominationReport {
        label: envelope.label.clone(),
        samples: times.len(),
        valid,
        fraction_valid: if times.is_empty() { 0.0 } else { valid as f64 / times.len() as f64 },
        worst_ratio: worst,
        violations,
        first_violation: first,
        passed: violations == 0,
    })
}

/// Start value of the smallness estimate, `y(t0) + beta Omega2^2 nu / U^2`.
pub fn smallness_base(y_t0: f64, nu: f64, c: &BoundConstants) -> f64 {
    y_t0 + c.beta * c.omega2 * c.omega2 * nu / (c.u * c.u)
}

/// `4 K^{4 s} eta^{1 - 20 s}` with `s = (t - t0) / beta` on `times`.
///
/// Valid where `t >= t0`, the exponent on `eta` is positive and `K / eta^5 > e^{1/4}`.
pub fn smallness_envelope(y_t0: f64, nu: f64, t0: f64, times: &[f64], c: &BoundConstants) -> Result<Envelope> {
    c.check()?;
    if !(y_t0 >= 0.0) || !(nu >= 0.0) {
        return invalid("smallness envelope needs y(t0) >= 0 and nu >= 0");
    }
    let eta = smallness_base(y_t0, nu, c);
    let k = c.k_script;
    let gamma_ok = eta == 0.0 || k.ln() - 5.0 * eta.ln() > 0.25;
    let mut values = Vec::with_capacity(times.len());
    let mut valid = Vec::with_capacity(times.len());
    for &t in times {
        let s = (t - t0) / c.beta;
        let e = 1.0 - 20.0 * s;
        values.push(4.0 * k.powf(4.0 * s) * eta.powf(e));
        valid.push(t >= t0 && e > 0.0 && gamma_ok);
    }
    Envelope::new(times.to_vec(), values, valid, "propagation of smallness")
}

/// Window length `gamma / (40 Omega_inf)` used to tile a run.
pub fn window_length(c: &BoundConstants) -> f64 {
    c.beta / 40.0
}

/// Smallness envelopes tiled over `times` with windows of [`window_length`], each
/// re-anchored at its first sample with the measured `y` there.
pub fn windowed_smallness_envelope(times: &[f64], y: &[f64], nu: f64, c: &BoundConstants) -> Result<Envelope> {
    if y.len() != times.len() {
        return invalid("measured series and times differ in length");
    }
    c.check()?;
    let delta = window_length(c);
    let mut values = vec![0.0; times.len()];
    let mut valid = vec![false; times.len()];
    let mut start = 0;
    while start < times.len() {
        let t0 = times[start];
        let k = ((t0 - times[0]) / delta).floor();
        let end_t = times[0] + (k + 1.0) * delta;
        let mut end = start + 1;
        while end < times.len() && times[end] < end_t {
            end += 1;
        }
        let env = smallness_envelope(y[start], nu, t0, &times[start..end], c)?;
        values[start..end].copy_from_slice(&env.values);
        valid[start..end].copy_from_slice(&env.valid);
        start = end;
    }
    Envelope::new(times.to_vec(), values, valid, "propagation of smallness, windowed")
}

/// Equivalent displays of the final velocity bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalForm {
    /// `(C1^2 U^2)^{1 - e} {gap^2 + 2 C2 U^2 nu}^e` with `e = exp(-40 log 2 t / beta)`.
    Exponential,
    /// `C1^2 U^2 {gap^2 / (C1^2 U^2) + 2 C2 nu / C1^2}^{2^{-40 t / beta}}`.
    Dyadic,
}

/// `(C1, C2)` of the discrete iteration: `C1 = 4 K^{e1}`, `C2 = beta Omega2^2 / U^2`.
pub fn iteration_constants(c: &BoundConstants) -> (f64, f64) {
    (4.0 * c.k_script.powf(c.e1), c.beta * c.omega2 * c.omega2 / (c.u * c.u))
}

/// `log(C1^2 U^2)` computed without forming `K^{2 e1}`.
fn log_prefactor(c: &BoundConstants) -> f64 {
    16.0_f64.ln() + 2.0 * c.e1 * c.k_script.ln() + 2.0 * c.u.ln()
}

/// Bound on `||u^nu(t) - u(t)||^2`.
pub fn final_velocity_bound(t: f64, nu: f64, u0_gap_sq: f64, c: &BoundConstants, form: FinalForm) -> Result<f64> {
    c.check()?;
    if !(t >= 0.0) || !(nu >= 0.0) || !(u0_gap_sq >= 0.0) {
        return invalid("final bound needs t, nu and the initial gap nonnegative");
    }
    let (_, c2) = iteration_constants(c);
    let base = u0_gap_sq + 2.0 * c2 * c.u * c.u * nu;
    let x = 40.0 * t / c.beta;
    let lp = log_prefactor(c);
    Ok(match form {
        FinalForm::Exponential => {
            let e = (-x * std::f64::consts::LN_2).exp();
            ((1.0 - e) * lp).exp() * base.powf(e)
        }
        FinalForm::Dyadic => {
            let e = 0.5_f64.powf(x);
            if base == 0.0 {
                ((1.0 - e) * lp).exp() * 0.0
            } else {
                (lp + e * (base.ln() - lp)).exp()
            }
        }
    })
}
