use super::field::{GridField, SpectralField, VelocityField};
use super::ops::{derivative, Axis};
use super::transform::SpectralPlan;
use crate::error::{invalid, Result};

/// `L^p` norm on the unit torus by the rectangle rule; `p = f64::INFINITY` is the grid maximum.
pub fn lp_norm(f: &GridField, p: f64) -> Result<f64> {
    lp_norm_values(f.values(), p)
}

pub(crate) fn lp_norm_values(values: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid(format!("L^p exponent must be at least 1, got {p}"));
    }
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || max == 0.0 {
        return Ok(max);
    }
    if p == 2.0 {
        let s: f64 = values.iter().map(|v| (v / max) * (v / max)).sum();
        return Ok(max * (s / values.len() as f64).sqrt());
    }
    let s: f64 = values.iter().map(|v| (v.abs() / max).powf(p)).sum();
    Ok(max * (s / values.len() as f64).powf(1.0 / p))
}

/// Pointwise Euclidean gradient magnitude of a scalar field.
pub fn gradient_magnitude(plan: &SpectralPlan, f: &SpectralField) -> Result<GridField> {
    let (g1, g2) = plan.inverse_pair(&derivative(f, Axis::X1), &derivative(f, Axis::X2))?;
    let values = g1
        .values()
        .iter()
        .zip(g2.values())
        .map(|(a, b)| a.hypot(*b))
        .collect();
    Ok(GridField::from_raw(f.grid(), values))
}

/// `||f||_p + || |grad f| ||_p`.
pub fn sobolev_w1p_norm(f: &SpectralField, p: f64) -> Result<f64> {
    let plan = SpectralPlan::new(f.grid());
    let values = plan.inverse(f)?;
    let grad = gradient_magnitude(&plan, f)?;
    Ok(lp_norm(&values, p)? + lp_norm(&grad, p)?)
}

/// `sum_{j >= -1} 2^j ||Delta_j f||_inf` with sharp dyadic annuli.
///
/// `Delta_{-1}` is the mean mode and `Delta_j` for `j >= 0` keeps `2^{j-1} <= |k| < 2^j`,
/// so the `j = 0` block is empty.
pub fn besov_b1_inf1_norm(f: &SpectralField) -> f64 {
    besov_with_plan(&SpectralPlan::new(f.grid()), f)
}

pub(crate) fn besov_with_plan(plan: &SpectralPlan, f: &SpectralField) -> f64 {
    let grid = f.grid();
    let n = grid.n();
    let mut total = 0.5 * f.mean().abs();
    let kmax_sq = 2 * (n as i64 / 2) * (n as i64 / 2);
    let mut j = 1u32;
    let mut pending: Option<(f64, SpectralField)> = None;
    loop {
        let lo = 1i64 << (j - 1);
        if lo * lo > kmax_sq {
            break;
        }
        let hi = 1i64 << j;
        let block = f.map_modes(|m1, m2| {
            let k1 = grid.wavenumber(m1);
            let k2 = grid.wavenumber(m2);
            let k_sq = k1 * k1 + k2 * k2;
            if k_sq >= lo * lo && k_sq < hi * hi {
                1.0
            } else {
                0.0
            }
        });
        let weight = hi as f64;
        match pending.take() {
            None => pending = Some((weight, block)),
            Some((w0, b0)) => {
                let (a, b) = plan.inverse_pair(&b0, &block).expect("blocks share the plan grid");
                total += w0 * a.max_abs() + weight * b.max_abs();
            }
        }
        j += 1;
    }
    if let Some((w0, b0)) = pending {
        total += w0 * plan.inverse(&b0).expect("block shares the plan grid").max_abs();
    }
    total
}

/// Result of [`exp_gradient_integral`]; `overflowed` marks the `+inf` sentinel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpIntegral {
    pub value: f64,
    pub overflowed: bool,
}

/// Frobenius norm of the velocity gradient at each collocation point.
pub fn velocity_gradient_norm(plan: &SpectralPlan, u: &VelocityField) -> Result<GridField> {
    let (a11, a12) = plan.inverse_pair(&derivative(&u.u1, Axis::X1), &derivative(&u.u1, Axis::X2))?;
    let (a21, a22) = plan.inverse_pair(&derivative(&u.u2, Axis::X1), &derivative(&u.u2, Axis::X2))?;
    let values = (0..a11.values().len())
        .map(|i| {
            let (p, q, r, s) = (a11.values()[i], a12.values()[i], a21.values()[i], a22.values()[i]);
            (p * p + q * q + r * r + s * s).sqrt()
        })
        .collect();
    Ok(GridField::from_raw(u.grid(), values))
}

/// Grid mean of `exp(beta * g)` for a precomputed gradient magnitude `g`.
pub fn exp_integral_of(grad: &GridField, beta: f64) -> ExpIntegral {
    let sum: f64 = grad.values().iter().map(|g| (beta * g).exp()).sum();
    let value = sum / grad.values().len() as f64;
    if value.is_finite() {
        ExpIntegral { value, overflowed: false }
    } else {
        ExpIntegral { value: f64::INFINITY, overflowed: true }
    }
}

/// `int exp(beta |grad u|) dx` over the unit torus.
pub fn exp_gradient_integral(u: &VelocityField, beta: f64) -> Result<ExpIntegral> {
    if !(beta > 0.0) {
        return invalid(format!("beta must be positive, got {beta}"));
    }
    let plan = SpectralPlan::new(u.grid());
    Ok(exp_integral_of(&velocity_gradient_norm(&plan, u)?, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{biot_savart, to_spectral, Grid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const TWO_PI: f64 = 2.0 * PI;

    fn sine(n: usize) -> GridField {
        GridField::from_fn(Grid::new(n).unwrap(), |x1, _| (TWO_PI * x1).sin())
    }

    fn bumpy(n: usize, a: f64, b: f64) -> GridField {
        GridField::from_fn(Grid::new(n).unwrap(), |x1, x2| {
            a * (TWO_PI * x1).cos() + b * (2.0 * TWO_PI * x2).sin() * (TWO_PI * x1).sin() + 0.3
        })
    }

    #[test]
    fn lp_of_constant() {
        let f = GridField::from_fn(Grid::new(16).unwrap(), |_, _| -3.0);
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            assert!((lp_norm(&f, p).unwrap() - 3.0).abs() < 1e-14);
        }
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(lp_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn l2_of_sine() {
        assert!((lp_norm(&sine(32), 2.0).unwrap() - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn w1p_examples() {
        let c = to_spectral(&GridField::from_fn(Grid::new(16).unwrap(), |_, _| 2.5));
        assert!((sobolev_w1p_norm(&c, 2.0).unwrap() - 2.5).abs() < 1e-14);
        let s = to_spectral(&sine(32));
        let want = 0.5_f64.sqrt() * (1.0 + TWO_PI);
        assert!((sobolev_w1p_norm(&s, 2.0).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn besov_examples() {
        let c = to_spectral(&GridField::from_fn(Grid::new(16).unwrap(), |_, _| -4.0));
        assert!((besov_b1_inf1_norm(&c) - 2.0).abs() < 1e-14);
        let s = to_spectral(&sine(32));
        assert!((besov_b1_inf1_norm(&s) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn besov_dominates_gradient_sup() {
        let plan = SpectralPlan::new(Grid::new(32).unwrap());
        let mut worst: f64 = 0.0;
        for (a, b) in [(1.0, 0.0), (0.5, 1.0), (2.0, -0.7), (0.0, 3.0)] {
            let f = to_spectral(&bumpy(32, a, b));
            let grad = gradient_magnitude(&plan, &f).unwrap().max_abs();
            let ratio = grad / besov_b1_inf1_norm(&f);
            worst = worst.max(ratio);
        }
        // the embedding constant is finite and moderate at this scale
        assert!(worst > 0.0 && worst < 2.0 * TWO_PI, "{worst}");
    }

    #[test]
    fn exp_integral_of_constant_velocity() {
        let grid = Grid::new(16).unwrap();
        let u = biot_savart(&crate::torus::SpectralField::zeros(grid), [1.0, -2.0]).unwrap();
        let r = exp_gradient_integral(&u, 3.0).unwrap();
        assert_eq!(r, ExpIntegral { value: 1.0, overflowed: false });
        assert!(exp_gradient_integral(&u, 0.0).is_err());
    }

    #[test]
    fn exp_integral_limits_and_overflow() {
        let grid = Grid::new(32).unwrap();
        let w = to_spectral(&GridField::from_fn(grid, |x1, x2| {
            2.0 * TWO_PI * (TWO_PI * x1).sin() * (TWO_PI * x2).sin()
        }));
        let u = biot_savart(&w, [0.0, 0.0]).unwrap();
        let small = exp_gradient_integral(&u, 1e-9).unwrap().value;
        assert!((small - 1.0).abs() < 1e-7);
        let huge = exp_gradient_integral(&u, 1e6).unwrap();
        assert!(huge.overflowed && huge.value == f64::INFINITY);
        let betas = [0.01, 0.1, 0.3, 1.0, 2.0];
        let vals: Vec<f64> = betas.iter().map(|&b| exp_gradient_integral(&u, b).unwrap().value).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn lp_monotone_in_p(a in -3.0..3.0f64, b in -3.0..3.0f64, p in 1.0..8.0f64, dq in 0.0..8.0f64) {
            let f = bumpy(16, a, b);
            let lo = lp_norm(&f, p).unwrap();
            let hi = lp_norm(&f, p + dq).unwrap();
            prop_assert!(lo <= hi + 1e-12);
            prop_assert!(hi <= lp_norm(&f, f64::INFINITY).unwrap() + 1e-12);
        }

        #[test]
        fn w1p_triangle(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, p in 1.0..6.0f64) {
            let f = to_spectral(&bumpy(16, a, b));
            let g = to_spectral(&bumpy(16, c, a));
            let sum = sobolev_w1p_norm(&f.add(&g).unwrap(), p).unwrap();
            let bound = sobolev_w1p_norm(&f, p).unwrap() + sobolev_w1p_norm(&g, p).unwrap();
            prop_assert!(sum <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }
}
