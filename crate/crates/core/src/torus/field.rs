use rustfft::num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Real scalar field sampled on the collocation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid field entry {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    /// Samples `f(x1, x2)` at the collocation points.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i2 in 0..n {
            let x2 = grid.coord(i2);
            for i1 in 0..n {
                values.push(f(grid.coord(i1), x2));
            }
        }
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_raw(self.grid, values))
    }
}

/// Fourier coefficients of a real field, normalized so that the zero mode is the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        Ok(Self { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Self { grid, coeffs }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of the integer wavevector `(k1, k2)`.
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        self.coeffs[self.index(k1, k2)]
    }

    pub fn set_coeff(&mut self, k1: i64, k2: i64, value: Complex64) {
        let i = self.index(k1, k2);
        self.coeffs[i] = value;
    }

    fn index(&self, k1: i64, k2: i64) -> usize {
        let n = self.grid.n() as i64;
        let m1 = k1.rem_euclid(n) as usize;
        let m2 = k2.rem_euclid(n) as usize;
        m2 * self.grid.n() + m1
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `sum |c_k|^2`, equal to the squared `L^2` norm of the field on the unit torus.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest deviation from `c(-k) = conj(c(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut worst: f64 = 0.0;
        for m2 in 0..n {
            let c2 = self.grid.conjugate_index(m2);
            for m1 in 0..n {
                let c1 = self.grid.conjugate_index(m1);
                let a = self.coeffs[m2 * n + m1];
                let b = self.coeffs[c2 * n + c1].conj();
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    /// Replaces each coefficient pair by its Hermitian average.
    pub fn symmetrize(&mut self) {
        let n = self.grid.n();
        for m2 in 0..n {
            let c2 = self.grid.conjugate_index(m2);
            for m1 in 0..n {
                let c1 = self.grid.conjugate_index(m1);
                let i = m2 * n + m1;
                let j = c2 * n + c1;
                if j < i {
                    continue;
                }
                let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
                self.coeffs[i] = avg;
                self.coeffs[j] = avg.conj();
            }
        }
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        Self::from_raw(self.grid, self.coeffs.iter().map(|c| c * s).collect())
    }

    fn zip_with(
        &self,
        other: &SpectralField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(Self::from_raw(self.grid, coeffs))
    }

    /// Multiplies every coefficient by a real per-mode factor.
    pub(crate) fn map_modes(&self, factor: impl Fn(usize, usize) -> f64) -> SpectralField {
        let n = self.grid.n();
        let mut out = self.clone();
        for m2 in 0..n {
            for m1 in 0..n {
                out.coeffs[m2 * n + m1] *= factor(m1, m2);
            }
        }
        out
    }
}

/// Divergence-free velocity in spectral form.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl VelocityField {
    pub fn grid(&self) -> Grid {
        self.u1.grid()
    }

    pub fn mean(&self) -> [f64; 2] {
        [self.u1.mean(), self.u2.mean()]
    }

    /// `||u||_{L^2}` including the mean mode.
    pub fn l2_norm(&self) -> f64 {
        (self.u1.energy() + self.u2.energy()).sqrt()
    }

    pub fn scale(&self, s: f64) -> VelocityField {
        VelocityField {
            u1: self.u1.scale(s),
            u2: self.u2.scale(s),
        }
    }

    /// Largest `|k . u_hat(k)|` over all modes (the Nyquist component is ignored).
    pub fn spectral_divergence(&self) -> f64 {
        let grid = self.grid();
        let n = grid.n();
        let mut worst: f64 = 0.0;
        for m2 in 0..n {
            let k2 = if grid.is_nyquist(m2) { 0.0 } else { grid.wavenumber(m2) as f64 };
            for m1 in 0..n {
                let k1 = if grid.is_nyquist(m1) { 0.0 } else { grid.wavenumber(m1) as f64 };
                let i = m2 * n + m1;
                let d = self.u1.coeffs[i] * k1 + self.u2.coeffs[i] * k2;
                worst = worst.max(d.norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_grid_values() {
        let g = Grid::new(8).unwrap();
        let mut v = vec![0.0; 64];
        v[3] = f64::NAN;
        assert!(matches!(GridField::new(g, v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn coeff_addressing_wraps_negative_wavenumbers() {
        let g = Grid::new(8).unwrap();
        let mut f = SpectralField::zeros(g);
        f.set_coeff(-1, 2, Complex64::new(1.0, 2.0));
        assert_eq!(f.coeffs()[2 * 8 + 7], Complex64::new(1.0, 2.0));
        assert_eq!(f.coeff(-1, 2), Complex64::new(1.0, 2.0));
    }

    #[test]
    fn symmetrize_restores_hermitian_pairs() {
        let g = Grid::new(8).unwrap();
        let mut f = SpectralField::zeros(g);
        f.set_coeff(1, 0, Complex64::new(1.0, 1.0));
        assert!(f.hermitian_defect() > 0.5);
        f.symmetrize();
        assert!(f.hermitian_defect() < 1e-15);
        assert_eq!(f.coeff(-1, 0), Complex64::new(0.5, -0.5));
    }
}
