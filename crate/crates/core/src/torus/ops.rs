use std::f64::consts::{LN_2, PI};

use rustfft::num_complex::Complex64;

use super::field::{SpectralField, VelocityField};
use super::grid::Grid;
use crate::error::{invalid, Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub fn from_index(axis: u8) -> Result<Self> {
        match axis {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            other => invalid(format!("axis must be 1 or 2, got {other}")),
        }
    }
}

fn odd_k(grid: Grid, m: usize) -> f64 {
    if grid.is_nyquist(m) {
        0.0
    } else {
        grid.wavenumber(m) as f64
    }
}

/// Spectral partial derivative; the Nyquist mode along `axis` is zeroed.
pub fn derivative(f: &SpectralField, axis: Axis) -> SpectralField {
    let grid = f.grid();
    let n = grid.n();
    let mut out = f.clone();
    let coeffs = out.coeffs_mut();
    for m2 in 0..n {
        for m1 in 0..n {
            let k = match axis {
                Axis::X1 => odd_k(grid, m1),
                Axis::X2 => odd_k(grid, m2),
            };
            coeffs[m2 * n + m1] *= Complex64::new(0.0, TWO_PI * k);
        }
    }
    out
}

/// Tolerance on the vorticity mean accepted by [`biot_savart`].
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Divergence-free velocity with `rot u = omega` and prescribed mean.
pub fn biot_savart(omega: &SpectralField, mean_u: [f64; 2]) -> Result<VelocityField> {
    let mean = omega.mean();
    let scale = omega.coeffs().iter().fold(1.0_f64, |m, c| m.max(c.norm()));
    if mean.abs() > MEAN_TOLERANCE * scale || omega.coeffs()[0].im.abs() > MEAN_TOLERANCE * scale {
        return Err(Error::NonzeroMean(mean));
    }
    let grid = omega.grid();
    let n = grid.n();
    let mut u1 = SpectralField::zeros(grid);
    let mut u2 = SpectralField::zeros(grid);
    {
        let (c1, c2) = (u1.coeffs_mut(), u2.coeffs_mut());
        let w = omega.coeffs();
        for m2 in 0..n {
            let k2f = grid.wavenumber(m2) as f64;
            let k2 = odd_k(grid, m2);
            for m1 in 0..n {
                let i = m2 * n + m1;
                if i == 0 {
                    continue;
                }
                let k1f = grid.wavenumber(m1) as f64;
                let k1 = odd_k(grid, m1);
                let s = w[i] * Complex64::new(0.0, 1.0 / (TWO_PI * (k1f * k1f + k2f * k2f)));
                c1[i] = s * k2;
                c2[i] = -s * k1;
            }
        }
        c1[0] = Complex64::new(mean_u[0], 0.0);
        c2[0] = Complex64::new(mean_u[1], 0.0);
    }
    Ok(VelocityField { u1, u2 })
}

/// Scalar vorticity `d1 u2 - d2 u1`.
pub fn rot(u: &VelocityField) -> SpectralField {
    derivative(&u.u2, Axis::X1)
        .sub(&derivative(&u.u1, Axis::X2))
        .expect("velocity components share a grid")
}

pub fn divergence(u: &VelocityField) -> SpectralField {
    derivative(&u.u1, Axis::X1)
        .add(&derivative(&u.u2, Axis::X2))
        .expect("velocity components share a grid")
}

/// Whether mode `(m1, m2)` survives the 2/3 rule.
#[inline]
pub fn dealias_keeps(grid: Grid, m1: usize, m2: usize) -> bool {
    let cut = grid.dealias_cutoff();
    let k1 = grid.wavenumber(m1).abs() as f64;
    let k2 = grid.wavenumber(m2).abs() as f64;
    k1.max(k2) <= cut
}

pub fn dealias(f: &SpectralField) -> SpectralField {
    let grid = f.grid();
    f.map_modes(|m1, m2| if dealias_keeps(grid, m1, m2) { 1.0 } else { 0.0 })
}

/// Radial mollifier profile at wavenumber magnitude `k` and cutoff `ell`.
pub fn mollifier_weight(k: f64, ell: f64) -> f64 {
    if k <= ell {
        1.0
    } else if k <= 2.0 * ell {
        let r = k / ell - 1.0;
        (-4.0 * LN_2 * r * r).exp()
    } else {
        0.0
    }
}

/// Smooth spectral low-pass at cutoff `ell`.
pub fn mollify(f: &SpectralField, ell: u32) -> Result<SpectralField> {
    if ell < 1 {
        return invalid("mollifier cutoff must be at least 1");
    }
    let grid = f.grid();
    let ell = ell as f64;
    Ok(f.map_modes(|m1, m2| {
        let k1 = grid.wavenumber(m1) as f64;
        let k2 = grid.wavenumber(m2) as f64;
        mollifier_weight((k1 * k1 + k2 * k2).sqrt(), ell)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{from_spectral, to_spectral, GridField};
    use proptest::prelude::*;

    fn g(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    /// Random Hermitian field with Nyquist rows zeroed and zero mean.
    fn random_spectral(grid: Grid, seed: u64, kmax: i64) -> SpectralField {
        let mut s = seed | 1;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut f = SpectralField::zeros(grid);
        for k2 in -kmax..=kmax {
            for k1 in -kmax..=kmax {
                if (k1, k2) != (0, 0) {
                    f.set_coeff(k1, k2, Complex64::new(next(), next()));
                }
            }
        }
        f.symmetrize();
        f
    }

    #[test]
    fn derivative_of_sine() {
        let grid = g(32);
        let f = to_spectral(&GridField::from_fn(grid, |x1, _| (TWO_PI * x1).sin()));
        let d = from_spectral(&derivative(&f, Axis::X1));
        let want = GridField::from_fn(grid, |x1, _| TWO_PI * (TWO_PI * x1).cos());
        assert!(d.sub(&want).unwrap().max_abs() < 1e-12);
        let d2 = derivative(&f, Axis::X2);
        assert!(d2.l2_norm() < 1e-15);
    }

    #[test]
    fn derivatives_commute() {
        let f = random_spectral(g(32), 7, 15);
        let a = derivative(&derivative(&f, Axis::X1), Axis::X2);
        let b = derivative(&derivative(&f, Axis::X2), Axis::X1);
        assert!(a.sub(&b).unwrap().l2_norm() <= 1e-14 * a.l2_norm());
    }

    #[test]
    fn derivative_zeroes_nyquist() {
        let grid = g(8);
        let mut f = SpectralField::zeros(grid);
        f.set_coeff(-4, 1, Complex64::new(1.0, 0.0));
        assert!(derivative(&f, Axis::X1).l2_norm() == 0.0);
    }

    #[test]
    fn biot_savart_of_sine() {
        let grid = g(32);
        let w = to_spectral(&GridField::from_fn(grid, |x1, _| (TWO_PI * x1).sin()));
        let u = biot_savart(&w, [0.0, 0.0]).unwrap();
        let (u1, u2) = (from_spectral(&u.u1), from_spectral(&u.u2));
        assert!(u1.max_abs() < 1e-15);
        let want = GridField::from_fn(grid, |x1, _| -(TWO_PI * x1).cos() / TWO_PI);
        assert!(u2.sub(&want).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn biot_savart_of_taylor_green() {
        let grid = g(64);
        let w = to_spectral(&GridField::from_fn(grid, |x1, x2| {
            2.0 * TWO_PI * (TWO_PI * x1).sin() * (TWO_PI * x2).sin()
        }));
        let u = biot_savart(&w, [0.0, 0.0]).unwrap();
        let u1 = from_spectral(&u.u1);
        let want = GridField::from_fn(grid, |x1, x2| (TWO_PI * x1).sin() * (TWO_PI * x2).cos());
        assert!(u1.sub(&want).unwrap().max_abs() < 1e-14);
        let r = rot(&u);
        assert!(r.sub(&w).unwrap().l2_norm() <= 1e-12 * w.l2_norm());
    }

    #[test]
    fn biot_savart_mean_only() {
        let grid = g(16);
        let u = biot_savart(&SpectralField::zeros(grid), [1.0, 0.0]).unwrap();
        let u1 = from_spectral(&u.u1);
        assert!(u1.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(from_spectral(&u.u2).max_abs() == 0.0);
    }

    #[test]
    fn biot_savart_rejects_mean() {
        let grid = g(16);
        let mut w = SpectralField::zeros(grid);
        w.set_coeff(0, 0, Complex64::new(1e-6, 0.0));
        assert!(matches!(biot_savart(&w, [0.0, 0.0]), Err(Error::NonzeroMean(_))));
    }

    #[test]
    fn dealias_examples() {
        let grid = g(48);
        let f = random_spectral(grid, 3, 16);
        assert_eq!(dealias(&f), f);
        let mut hi = SpectralField::zeros(grid);
        hi.set_coeff(23, 0, Complex64::new(1.0, 0.0));
        hi.set_coeff(-23, 0, Complex64::new(1.0, 0.0));
        assert_eq!(dealias(&hi).l2_norm(), 0.0);
    }

    #[test]
    fn mollify_keeps_band_limited_fields() {
        let f = random_spectral(g(32), 5, 3);
        assert_eq!(mollify(&f, 5).unwrap(), f);
        assert!(mollify(&f, 0).is_err());
    }

    #[test]
    fn mollify_error_decreases_in_cutoff() {
        let f = random_spectral(g(64), 11, 31);
        let errs: Vec<f64> = (1..50)
            .map(|ell| mollify(&f, ell).unwrap().sub(&f).unwrap().l2_norm())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]));
        assert!(*errs.last().unwrap() == 0.0);
    }

    #[test]
    fn mollify_commutes_with_derivative() {
        let f = random_spectral(g(32), 13, 15);
        let a = derivative(&mollify(&f, 4).unwrap(), Axis::X1);
        let b = mollify(&derivative(&f, Axis::X1), 4).unwrap();
        assert!(a.sub(&b).unwrap().l2_norm() <= 1e-15 * a.l2_norm());
    }

    proptest! {
        #[test]
        fn biot_savart_round_trip(seed in any::<u64>(), n in prop::sample::select(vec![16usize, 32, 64])) {
            let grid = g(n);
            let w = random_spectral(grid, seed, n as i64 / 2 - 1);
            let u = biot_savart(&w, [0.3, -0.2]).unwrap();
            prop_assert!(rot(&u).sub(&w).unwrap().l2_norm() <= 1e-12 * w.l2_norm());
            prop_assert!(u.spectral_divergence() <= 1e-13 * u.l2_norm());
            prop_assert_eq!(u.mean(), [0.3, -0.2]);
        }

        #[test]
        fn low_pass_filters_contract(seed in any::<u64>(), ell in 1u32..20) {
            let f = random_spectral(g(32), seed, 15);
            prop_assert!(dealias(&f).l2_norm() <= f.l2_norm());
            prop_assert!(mollify(&f, ell).unwrap().l2_norm() <= f.l2_norm());
        }
    }
}
