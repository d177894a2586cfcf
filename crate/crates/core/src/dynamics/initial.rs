use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::FlowState;
use crate::error::{invalid, Result};
use crate::torus::{dealias, from_spectral, to_spectral, Complex64, Grid, GridField, SpectralField};

const TWO_PI: f64 = 2.0 * PI;

/// Peak of the temperature bump; chosen on a grid point for every `n` divisible by 4.
pub const THETA_CENTER: [f64; 2] = [0.25, 0.5];

/// Named initial-data families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InitialData {
    /// Taylor-Green vorticity `a sin(2 pi x1) sin(2 pi x2)` with a periodic Gaussian temperature bump.
    Smooth {
        vortex_amplitude: f64,
        theta_amplitude: f64,
        theta_width: f64,
    },
    /// Bounded random vorticity with `|k|^-1` spectrum on `|k| <= n/8`, clipped and
    /// low-passed twice, then rescaled to `omega_max`; same temperature bump.
    Rough {
        omega_max: f64,
        seed: u64,
        theta_amplitude: f64,
        theta_width: f64,
    },
}

impl InitialData {
    pub fn smooth() -> Self {
        InitialData::Smooth {
            vortex_amplitude: 4.0 * PI,
            theta_amplitude: 0.5,
            theta_width: 0.1,
        }
    }

    pub fn rough(seed: u64) -> Self {
        InitialData::Rough {
            omega_max: 5.0,
            seed,
            theta_amplitude: 0.5,
            theta_width: 0.1,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            InitialData::Smooth { .. } => "smooth",
            InitialData::Rough { .. } => "rough",
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let (amp, width) = match self {
            InitialData::Smooth {
                vortex_amplitude,
                theta_amplitude,
                theta_width,
            } => {
                if !vortex_amplitude.is_finite() {
                    errs.push("initial.vortex_amplitude must be finite".into());
                }
                (*theta_amplitude, *theta_width)
            }
            InitialData::Rough {
                omega_max,
                theta_amplitude,
                theta_width,
                ..
            } => {
                if !(*omega_max > 0.0 && omega_max.is_finite()) {
                    errs.push("initial.omega_max must be positive".into());
                }
                (*theta_amplitude, *theta_width)
            }
        };
        if !amp.is_finite() {
            errs.push("initial.theta_amplitude must be finite".into());
        }
        if !(width > 0.0 && width.is_finite()) {
            errs.push("initial.theta_width must be positive".into());
        }
        errs
    }
}

/// Data perturbation `omega0 + nu a bump_omega`, `theta0 + nu b bump_theta`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub omega: f64,
    pub theta: f64,
}

impl Perturbation {
    pub fn is_identity(&self) -> bool {
        self.omega == 0.0 && self.theta == 0.0
    }
}

/// Periodic Gaussian `exp((cos 2pi(x1-c1) + cos 2pi(x2-c2) - 2) / (4 pi^2 sigma^2))`.
pub fn periodic_bump(x1: f64, x2: f64, center: [f64; 2], width: f64) -> f64 {
    let c = (TWO_PI * (x1 - center[0])).cos() + (TWO_PI * (x2 - center[1])).cos() - 2.0;
    (c / (TWO_PI * TWO_PI * width * width)).exp()
}

/// Mean-free vorticity perturbation shape with unit maximum.
pub fn omega_bump(x1: f64, x2: f64) -> f64 {
    (TWO_PI * (x1 + x2)).cos()
}

/// Mean-free temperature perturbation shape, stationary at the bump's peak and antipode.
pub fn theta_bump(x1: f64, x2: f64) -> f64 {
    (TWO_PI * (x1 - THETA_CENTER[0])).cos() * (TWO_PI * (x2 - THETA_CENTER[1])).cos()
}

fn mean_free(mut f: SpectralField) -> SpectralField {
    f.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    f
}

fn temperature(grid: Grid, amplitude: f64, width: f64) -> SpectralField {
    let g = GridField::from_fn(grid, |x1, x2| amplitude * periodic_bump(x1, x2, THETA_CENTER, width));
    mean_free(to_spectral(&g))
}

fn low_pass(f: &SpectralField, kmax: f64) -> SpectralField {
    let grid = f.grid();
    let mut out = f.clone();
    let n = grid.n();
    for m2 in 0..n {
        let k2 = grid.wavenumber(m2) as f64;
        for m1 in 0..n {
            let k1 = grid.wavenumber(m1) as f64;
            if k1 * k1 + k2 * k2 > kmax * kmax {
                out.coeffs_mut()[m2 * n + m1] = Complex64::new(0.0, 0.0);
            }
        }
    }
    out
}

fn rough_vorticity(grid: Grid, omega_max: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kmax = grid.n() as f64 / 8.0;
    let kr = kmax.floor() as i64;
    let mut f = SpectralField::zeros(grid);
    for k2 in 0..=kr {
        for k1 in -kr..=kr {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let kk = ((k1 * k1 + k2 * k2) as f64).sqrt();
            if kk > kmax {
                continue;
            }
            let phase: f64 = rng.random_range(0.0..TWO_PI);
            let c = Complex64::from_polar(1.0 / kk, phase);
            f.set_coeff(k1, k2, c);
            f.set_coeff(-k1, -k2, c.conj());
        }
    }
    let mut g = from_spectral(&f);
    let scale = 2.0 * omega_max / g.max_abs();
    g.values_mut().iter_mut().for_each(|v| *v *= scale);
    let mut filtered = f;
    for _ in 0..2 {
        g.values_mut()
            .iter_mut()
            .for_each(|v| *v = v.clamp(-omega_max, omega_max));
        filtered = mean_free(low_pass(&to_spectral(&g), kmax));
        filtered.symmetrize();
        g = from_spectral(&filtered);
    }
    filtered.scale(omega_max / g.max_abs())
}

/// Builds the initial state for viscosity `nu`, applying `perturbation` scaled by `nu`.
pub fn initial_state(
    grid: Grid,
    data: &InitialData,
    perturbation: Perturbation,
    nu: f64,
    kappa: f64,
) -> Result<FlowState> {
    let errs = data.validate();
    if !errs.is_empty() {
        return invalid(errs.join("; "));
    }
    let (omega, theta) = match *data {
        InitialData::Smooth {
            vortex_amplitude,
            theta_amplitude,
            theta_width,
        } => {
            let w = GridField::from_fn(grid, |x1, x2| {
                vortex_amplitude * (TWO_PI * x1).sin() * (TWO_PI * x2).sin()
            });
            (mean_free(to_spectral(&w)), temperature(grid, theta_amplitude, theta_width))
        }
        InitialData::Rough {
            omega_max,
            seed,
            theta_amplitude,
            theta_width,
        } => (
            rough_vorticity(grid, omega_max, seed),
            temperature(grid, theta_amplitude, theta_width),
        ),
    };
    let mut omega = omega;
    let mut theta = theta;
    if perturbation.omega != 0.0 {
        let b = mean_free(to_spectral(&GridField::from_fn(grid, omega_bump)));
        omega = omega.add(&b.scale(nu * perturbation.omega))?;
    }
    if perturbation.theta != 0.0 {
        let b = mean_free(to_spectral(&GridField::from_fn(grid, theta_bump)));
        theta = theta.add(&b.scale(nu * perturbation.theta))?;
    }
    let mut omega = mean_free(dealias(&omega));
    let mut theta = mean_free(dealias(&theta));
    omega.symmetrize();
    theta.symmetrize();
    FlowState::new(omega, theta, nu, kappa, [0.0, 0.0])
}
