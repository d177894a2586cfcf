use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform collocation grid on the unit torus `[0,1)^2`.
///
/// Grid values are stored row-major with the `x1` index running fastest:
/// `values[i2 * n + i1]` sits at `(i1 / n, i2 / n)`. Spectral coefficients use
/// the same layout over FFT indices, `coeffs[m2 * n + m1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidResolution(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Physical coordinate of grid index `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Signed integer wavenumber of FFT index `m`. The Nyquist index maps to `-n/2`.
    #[inline]
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    #[inline]
    pub fn is_nyquist(&self, m: usize) -> bool {
        m == self.n / 2
    }

    /// FFT index of the wavevector `-k` for the mode at index `m`.
    #[inline]
    pub fn conjugate_index(&self, m: usize) -> usize {
        (self.n - m) % self.n
    }

    /// Largest retained wavenumber component under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> f64 {
        self.n as f64 / 3.0
    }

    pub fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

/// Per-axis wavenumber tables shared by the spectral operators.
#[derive(Clone, Debug)]
pub struct Wavenumbers {
    grid: Grid,
    /// Signed wavenumber per FFT index (Nyquist as `-n/2`).
    pub full: Vec<f64>,
    /// Same as `full` with the Nyquist entry zeroed; used by odd (derivative) multipliers.
    pub odd: Vec<f64>,
    /// `|k|^2` per 2D mode.
    pub k_sq: Vec<f64>,
}

impl Wavenumbers {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let full: Vec<f64> = (0..n).map(|m| grid.wavenumber(m) as f64).collect();
        let odd: Vec<f64> = (0..n)
            .map(|m| if grid.is_nyquist(m) { 0.0 } else { full[m] })
            .collect();
        let mut k_sq = vec![0.0; grid.len()];
        for m2 in 0..n {
            for m1 in 0..n {
                k_sq[m2 * n + m1] = full[m1] * full[m1] + full[m2] * full[m2];
            }
        }
        Self {
            grid,
            full,
            odd,
            k_sq,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_small() {
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid::new(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|m| g.wavenumber(m)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.conjugate_index(0), 0);
        assert_eq!(g.conjugate_index(1), 7);
        assert_eq!(g.conjugate_index(4), 4);
    }
}
