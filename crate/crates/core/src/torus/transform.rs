use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{GridField, SpectralField};
use super::grid::Grid;
use crate::error::Result;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const BLOCK: usize = 32;

/// Row-column 2D FFT plan for one grid size.
///
/// The forward transform is normalized by `1/n^2` so that the zero mode holds the
/// grid mean; the inverse is unnormalized. Plans are cheap to clone and hold no
/// mutable state, so one plan per worker is the intended use.
#[derive(Clone)]
pub struct SpectralPlan {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.grid.n()).finish()
    }
}

impl SpectralPlan {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn transform(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let n = self.grid.n();
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        let mut tmp = vec![ZERO; buf.len()];
        fft.process_with_scratch(buf, &mut scratch);
        transpose(buf, &mut tmp, n);
        fft.process_with_scratch(&mut tmp, &mut scratch);
        transpose(&tmp, buf, n);
    }

    /// In-place normalized forward transform of complex grid data.
    pub fn forward_complex(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.grid.len());
        self.transform(&self.forward, buf);
        let s = 1.0 / self.grid.len() as f64;
        for c in buf.iter_mut() {
            *c *= s;
        }
    }

    /// In-place inverse transform (coefficients to grid values).
    pub fn inverse_complex(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.grid.len());
        self.transform(&self.inverse, buf);
    }

    pub fn forward(&self, f: &GridField) -> Result<SpectralField> {
        self.grid.check_same(&f.grid())?;
        let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_complex(&mut buf);
        Ok(SpectralField::from_raw(self.grid, buf))
    }

    /// Grid values of a Hermitian coefficient set (real part of the inverse).
    pub fn inverse(&self, f: &SpectralField) -> Result<GridField> {
        self.grid.check_same(&f.grid())?;
        let mut buf = f.coeffs().to_vec();
        self.inverse_complex(&mut buf);
        Ok(GridField::from_raw(self.grid, buf.iter().map(|c| c.re).collect()))
    }

    /// Two real inverses for the price of one complex transform.
    pub fn inverse_pair(&self, a: &SpectralField, b: &SpectralField) -> Result<(GridField, GridField)> {
        self.grid.check_same(&a.grid())?;
        self.grid.check_same(&b.grid())?;
        let mut fa = vec![0.0; self.grid.len()];
        let mut fb = vec![0.0; self.grid.len()];
        let mut buf = vec![ZERO; self.grid.len()];
        self.inverse_pair_into(a.coeffs(), b.coeffs(), &mut buf, &mut fa, &mut fb);
        Ok((GridField::from_raw(self.grid, fa), GridField::from_raw(self.grid, fb)))
    }

    /// Two real forwards for the price of one complex transform.
    pub fn forward_pair(&self, f: &GridField, g: &GridField) -> Result<(SpectralField, SpectralField)> {
        self.grid.check_same(&f.grid())?;
        self.grid.check_same(&g.grid())?;
        let mut ca = vec![ZERO; self.grid.len()];
        let mut cb = vec![ZERO; self.grid.len()];
        let mut buf = vec![ZERO; self.grid.len()];
        self.forward_pair_into(f.values(), g.values(), &mut buf, &mut ca, &mut cb);
        Ok((SpectralField::from_raw(self.grid, ca), SpectralField::from_raw(self.grid, cb)))
    }

    pub(crate) fn inverse_pair_into(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        buf: &mut [Complex64],
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        let i = Complex64::new(0.0, 1.0);
        for ((z, x), y) in buf.iter_mut().zip(a).zip(b) {
            *z = x + i * y;
        }
        self.inverse_complex(buf);
        for ((z, fa), fb) in buf.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *fa = z.re;
            *fb = z.im;
        }
    }

    pub(crate) fn forward_pair_into(
        &self,
        f: &[f64],
        g: &[f64],
        buf: &mut [Complex64],
        out_a: &mut [Complex64],
        out_b: &mut [Complex64],
    ) {
        for ((z, &x), &y) in buf.iter_mut().zip(f).zip(g) {
            *z = Complex64::new(x, y);
        }
        self.forward_complex(buf);
        let n = self.grid.n();
        for m2 in 0..n {
            let c2 = self.grid.conjugate_index(m2);
            for m1 in 0..n {
                let c1 = self.grid.conjugate_index(m1);
                let z = buf[m2 * n + m1];
                let zc = buf[c2 * n + c1].conj();
                out_a[m2 * n + m1] = 0.5 * (z + zc);
                let d = 0.5 * (z - zc);
                // d / i
                out_b[m2 * n + m1] = Complex64::new(d.im, -d.re);
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// Convenience forward transform with a throwaway plan.
pub fn to_spectral(f: &GridField) -> SpectralField {
    SpectralPlan::new(f.grid())
        .forward(f)
        .expect("plan built for the field's own grid")
}

/// Convenience inverse transform with a throwaway plan.
pub fn from_spectral(f: &SpectralField) -> GridField {
    SpectralPlan::new(f.grid())
        .inverse(f)
        .expect("plan built for the field's own grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn random_field(grid: Grid, seed: u64) -> GridField {
        // Cheap LCG keeps the test free of extra dependencies.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        GridField::from_fn(grid, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn constant_maps_to_mean_mode() {
        let g = Grid::new(16).unwrap();
        let f = GridField::from_fn(g, |_, _| 3.0);
        let s = to_spectral(&f);
        assert!((s.coeff(0, 0).re - 3.0).abs() < 1e-15);
        for (i, c) in s.coeffs().iter().enumerate().skip(1) {
            assert!(c.norm() < 1e-15, "mode {i}");
        }
    }

    #[test]
    fn sine_has_closed_form_coefficients() {
        let g = Grid::new(16).unwrap();
        let f = GridField::from_fn(g, |x1, _| (2.0 * PI * x1).sin());
        let s = to_spectral(&f);
        assert!((s.coeff(1, 0) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((s.coeff(-1, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let rest: f64 = s.energy() - 0.5;
        assert!(rest.abs() < 1e-14);
    }

    #[test]
    fn round_trip_over_sizes() {
        for n in [8, 10, 12, 16, 24, 32, 64, 96, 128, 256, 512] {
            let g = Grid::new(n).unwrap();
            let f = random_field(g, n as u64);
            let back = from_spectral(&to_spectral(&f));
            let err = back.sub(&f).unwrap().max_abs();
            assert!(err <= 1e-12 * f.max_abs(), "n = {n}: {err:e}");
        }
    }

    #[test]
    fn pair_transforms_match_single() {
        let g = Grid::new(32).unwrap();
        let plan = SpectralPlan::new(g);
        let f = random_field(g, 1);
        let h = random_field(g, 2);
        let (a, b) = plan.forward_pair(&f, &h).unwrap();
        let a1 = plan.forward(&f).unwrap();
        let b1 = plan.forward(&h).unwrap();
        assert!(a.sub(&a1).unwrap().l2_norm() < 1e-14);
        assert!(b.sub(&b1).unwrap().l2_norm() < 1e-14);
        let (fa, fb) = plan.inverse_pair(&a, &b).unwrap();
        assert!(fa.sub(&f).unwrap().max_abs() < 1e-13);
        assert!(fb.sub(&h).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn rejects_foreign_grid() {
        let plan = SpectralPlan::new(Grid::new(8).unwrap());
        let f = GridField::zeros(Grid::new(16).unwrap());
        assert!(plan.forward(&f).is_err());
    }

    proptest! {
        #[test]
        fn parseval(seed in any::<u64>(), half in 4usize..20) {
            let g = Grid::new(2 * half).unwrap();
            let f = random_field(g, seed);
            let mean_sq = f.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
            let e = to_spectral(&f).energy();
            prop_assert!((e - mean_sq).abs() <= 1e-12 * mean_sq);
        }
    }
}
