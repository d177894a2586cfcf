use serde::{Deserialize, Serialize};

use super::envelope::Envelope;
use crate::error::{invalid, Result};

/// `(a b, e^a + b log b - b)`; the second entry dominates the first.
pub fn arithmetic_bound(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return invalid(format!("arithmetic bound needs finite a and b > 0, got a = {a}, b = {b}"));
    }
    let lhs = a * b;
    let rhs = a.exp() + b * b.ln() - b;
    debug_assert!(rhs - lhs >= -1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    Ok((lhs, rhs))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return invalid("time grid is empty");
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return invalid("time grid must be finite and nondecreasing");
    }
    Ok(())
}

/// Integral-form Grönwall bound `y0 e^{int A} + int B e^{int_s^t A}` with trapezoid quadrature.
///
/// Repeated times are allowed, so a piecewise-constant coefficient can be sampled on both
/// sides of a jump.
pub fn gronwall_envelope(y0: f64, a: &[f64], b: &[f64], times: &[f64]) -> Result<Envelope> {
    check_times(times)?;
    if a.len() != times.len() || b.len() != times.len() {
        return invalid(format!(
            "coefficient samples ({}, {}) do not match {} times",
            a.len(),
            b.len(),
            times.len()
        ));
    }
    if !(y0 >= 0.0) || a.iter().chain(b).any(|v| !(*v >= 0.0)) {
        return invalid("Grönwall coefficients and initial value must be nonnegative");
    }
    let mut values = Vec::with_capacity(times.len());
    let mut int_a = 0.0;
    let mut forced = 0.0;
    values.push(y0);
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let growth = (0.5 * h * (a[k] + a[k - 1])).exp();
        int_a += 0.5 * h * (a[k] + a[k - 1]);
        forced = forced * growth + 0.5 * h * (b[k - 1] * growth + b[k]);
        values.push(y0 * int_a.exp() + forced);
    }
    let valid = vec![true; times.len()];
    Envelope::new(times.to_vec(), values, valid, "integral Grönwall")
}

/// The decreasing exponent `p(t) = beta p0 / (beta + 2 p0 t)` sampled on `times`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSchedule {
    pub p0: f64,
    pub beta: f64,
    pub t_star: f64,
    pub times: Vec<f64>,
    pub p: Vec<f64>,
}

impl ExponentSchedule {
    /// Exponent at time `t`, written through `t / t_star` so that `p(t_star) = 1` exactly.
    pub fn at(&self, t: f64) -> f64 {
        self.p0 / (1.0 + (self.p0 - 1.0) * (t / self.t_star))
    }

    /// Largest `|p' + 2 p^2 / beta|` with centred differences at interior samples.
    pub fn ode_residual(&self) -> f64 {
        let (t, p) = (&self.times, &self.p);
        let mut worst: f64 = 0.0;
        for i in 1..t.len().saturating_sub(1) {
            let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            if h0 <= 0.0 || h1 <= 0.0 {
                continue;
            }
            let dp = -h1 / (h0 * (h0 + h1)) * p[i - 1] + (h1 - h0) / (h0 * h1) * p[i] + h0 / (h1 * (h0 + h1)) * p[i + 1];
            worst = worst.max((dp + 2.0 * p[i] * p[i] / self.beta).abs());
        }
        worst
    }
}

pub fn exponent_schedule(p0: f64, beta: f64, times: &[f64]) -> Result<ExponentSchedule> {
    if !(p0 > 1.0 && p0.is_finite()) {
        return invalid(format!("initial exponent must exceed 1, got {p0}"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return invalid(format!("beta must be positive, got {beta}"));
    }
    if times.iter().any(|t| !(*t >= 0.0)) {
        return invalid("schedule times must be nonnegative");
    }
    let t_star = beta * (p0 - 1.0) / (2.0 * p0);
    let mut s = ExponentSchedule {
        p0,
        beta,
        t_star,
        times: times.to_vec(),
        p: Vec::new(),
    };
    s.p = times.iter().map(|&t| s.at(t)).collect();
    Ok(s)
}

/// `(e^{C p0 (t_star + F)} (1 + s0^{p0}), t_star)` for the transported-scalar estimate.
pub fn sigma_l2_bound(p0: f64, beta: f64, f_l1_linf: f64, sigma0_l2p: f64, c_univ: f64) -> Result<(f64, f64)> {
    if !(p0 > 1.0) || !(beta > 0.0) || !(c_univ > 0.0) {
        return invalid(format!("need p0 > 1, beta > 0, C > 0; got {p0}, {beta}, {c_univ}"));
    }
    if !(f_l1_linf >= 0.0) || !(sigma0_l2p >= 0.0) {
        return invalid("forcing and data norms must be nonnegative");
    }
    let t_star = beta * (p0 - 1.0) / (2.0 * p0);
    let c = (c_univ * p0 * (t_star + f_l1_linf)).exp();
    Ok((c * (1.0 + sigma0_l2p.powf(p0)), t_star))
}

/// Squared temperature-gap bound `e^{2 U Theta} gap^2`.
pub fn theta_stability_bound(theta0_gap: f64, u: f64, theta: f64) -> f64 {
    (2.0 * u * theta).exp() * theta0_gap * theta0_gap
}

/// Threshold on `nu_tilde` for the discrete iteration.
pub fn nu_tilde_limit() -> f64 {
    1.0 / (5.0_f64.sqrt() - 1.0)
}

/// Positive root of `x^2 - x - nu_tilde`.
pub fn r_star(nu_tilde: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * nu_tilde).sqrt())
}

/// Equality recursion `y_j = C1 sqrt(y_{j-1} + C2 nu)` with its closed-form bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteIteration {
    pub y: Vec<f64>,
    /// `delta_j = (y_j + C2 nu) / C1^2`.
    pub delta: Vec<f64>,
    /// `delta_0^{2^-j} + nu_tilde^{2^{1-j}} / (1 - nu_tilde)`, infinite when `nu_tilde >= 1`.
    pub bound: Vec<f64>,
    pub nu_tilde: f64,
    pub r_star: f64,
    /// `nu_tilde <= (sqrt 5 - 1)^-1` and `0 < delta_0 < r_star`.
    pub small: bool,
}

impl DiscreteIteration {
    pub fn sup_delta(&self) -> f64 {
        self.delta.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn iterate_discrete(y0: f64, nu: f64, c1: f64, c2: f64, n: usize) -> Result<DiscreteIteration> {
    if !(c1 > 0.0 && c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return invalid(format!("C1 and C2 must be positive and finite, got {c1}, {c2}"));
    }
    if n < 1 {
        return invalid("iteration count must be at least 1");
    }
    if !(y0 >= 0.0 && nu >= 0.0) {
        return invalid("y0 and nu must be nonnegative");
    }
    let c1_sq = c1 * c1;
    let nu_tilde = c2 * nu / c1_sq;
    let mut y = vec![y0];
    for j in 1..=n {
        y.push(c1 * (y[j - 1] + c2 * nu).sqrt());
    }
    let delta: Vec<f64> = y.iter().map(|v| (v + c2 * nu) / c1_sq).collect();
    let d0 = delta[0];
    let bound = (0..=n)
        .map(|j| {
            if nu_tilde >= 1.0 {
                return f64::INFINITY;
            }
            let e = 0.5_f64.powi(j as i32);
            d0.powf(e) + nu_tilde.powf(2.0 * e) / (1.0 - nu_tilde)
        })
        .collect();
    let r = r_star(nu_tilde);
    Ok(DiscreteIteration {
        y,
        delta,
        bound,
        nu_tilde,
        r_star: r,
        small: nu_tilde <= nu_tilde_limit() && d0 > 0.0 && d0 < r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn arithmetic_equality_cases() {
        assert_eq!(arithmetic_bound(0.0, 1.0).unwrap(), (0.0, 0.0));
        let (l, r) = arithmetic_bound(1.0, E).unwrap();
        assert!((l - E).abs() < 1e-15 && (r - E).abs() < 1e-15);
        assert!(arithmetic_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn gronwall_constant_coefficients() {
        let t = [0.0, 0.5, 1.0];
        let e = gronwall_envelope(2.0, &[0.0; 3], &[1.0; 3], &t).unwrap();
        assert_eq!(e.values, vec![2.0, 2.5, 3.0]);
        let e = gronwall_envelope(2.0, &[1.0; 3], &[0.0; 3], &t).unwrap();
        assert!((e.values[2] - 2.0 * E).abs() < 1e-14);
        assert!(gronwall_envelope(0.0, &[-1.0; 3], &[0.0; 3], &t).is_err());
        assert!(gronwall_envelope(0.0, &[0.0; 2], &[0.0; 3], &t).is_err());
    }

    #[test]
    fn schedule_endpoints() {
        let s = exponent_schedule(2.0, 1.0, &[0.0, 0.25]).unwrap();
        assert_eq!(s.t_star, 0.25);
        assert_eq!(s.p, vec![2.0, 1.0]);
        let d = exponent_schedule(2.0, 2.0, &[]).unwrap();
        assert_eq!(d.t_star, 0.5);
        assert!(exponent_schedule(1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn schedule_solves_its_ode() {
        let times: Vec<f64> = (0..=10_000).map(|i| i as f64 * 0.25 / 10_000.0).collect();
        let s = exponent_schedule(2.0, 1.0, &times).unwrap();
        assert!(s.ode_residual() < 1e-6, "{}", s.ode_residual());
        assert_eq!(*s.p.last().unwrap(), 1.0);
    }

    #[test]
    fn sigma_bound_values() {
        let (b, t) = sigma_l2_bound(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(t, 0.25);
        assert!((b - 2.0 * 2.5_f64.exp()).abs() < 1e-12);
        let (b0, _) = sigma_l2_bound(2.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((b0 - 0.5_f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn theta_bound_values() {
        assert_eq!(theta_stability_bound(0.0, 3.0, 4.0), 0.0);
        assert_eq!(theta_stability_bound(0.5, 0.0, 4.0), 0.25);
        assert_eq!(theta_stability_bound(1.0, 1.0, 1.0), 2.0_f64.exp());
    }

    #[test]
    fn discrete_iteration_examples() {
        // C2 nu = 0 and C1 = 1 give nu_tilde = 0 with delta_0 = y0.
        let it = iterate_discrete(0.25, 0.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(it.r_star, 1.0);
        assert_eq!(it.bound[1], 0.5);
        assert!((it.bound[2] - 0.25_f64.powf(0.25)).abs() < 1e-15);
        assert!(it.small);
        let z = iterate_discrete(0.0, 0.0, 2.0, 3.0, 5).unwrap();
        assert!(z.delta.iter().all(|d| *d == 0.0));
        assert!(z.bound.iter().all(|d| *d == 0.0));
        assert!(iterate_discrete(0.0, 0.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn discrete_iteration_stays_below_the_fixed_point() {
        // The equality recursion reads delta_j = sqrt(delta_{j-1}) + nu_tilde, whose
        // attracting fixed point is r_star^2.
        for nt in [0.0, 0.1, 0.3] {
            let it = iterate_discrete(0.5, nt, 1.0, 1.0, 40).unwrap();
            assert!(it.small);
            assert!(it.sup_delta() <= it.r_star * it.r_star + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn arithmetic_bound_holds(a in -10.0..10.0f64, b in 1e-9..10.0f64) {
            let (l, r) = arithmetic_bound(a, b).unwrap();
            prop_assert!(r - l >= -1e-12 * l.abs().max(1.0));
        }

        #[test]
        fn closed_form_dominates_recursion(d0 in 0.0..1.0f64, nt in prop::sample::select(vec![0.0, 0.1, 0.3])) {
            let it = iterate_discrete(d0, nt, 1.0, 1.0, 20).unwrap();
            for (d, b) in it.delta.iter().zip(&it.bound) {
                prop_assert!(*d <= b + 1e-12);
            }
        }
    }
}
