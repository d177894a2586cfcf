//! Grid, Fourier transforms, spectral operators and norms on the unit torus.

mod field;
mod grid;
mod norms;
mod ops;
mod transform;

pub use field::{GridField, SpectralField, VelocityField};
pub use grid::{Grid, Wavenumbers};
pub use norms::{
    besov_b1_inf1_norm, exp_gradient_integral, exp_integral_of, gradient_magnitude, lp_norm,
    sobolev_w1p_norm, velocity_gradient_norm, ExpIntegral,
};
pub(crate) use norms::besov_with_plan;
pub use ops::{
    biot_savart, dealias, dealias_keeps, derivative, divergence, mollifier_weight, mollify, rot,
    Axis, MEAN_TOLERANCE,
};
pub use transform::{from_spectral, to_spectral, SpectralPlan};
pub use rustfft::num_complex::Complex64;
