use crate::error::{invalid, Error, Result};
use crate::torus::{biot_savart, Grid, SpectralField, VelocityField, MEAN_TOLERANCE};

/// Relative Hermitian-symmetry tolerance accepted for prognostic fields.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Prognostic state of one Boussinesq run.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub omega: SpectralField,
    pub theta: SpectralField,
    pub t: f64,
    pub nu: f64,
    pub kappa: f64,
    pub mean_u: [f64; 2],
}

fn scale_of(f: &SpectralField) -> f64 {
    f.coeffs().iter().fold(1.0_f64, |m, c| m.max(c.norm()))
}

impl FlowState {
    pub fn new(
        omega: SpectralField,
        theta: SpectralField,
        nu: f64,
        kappa: f64,
        mean_u: [f64; 2],
    ) -> Result<Self> {
        Self::at_time(omega, theta, 0.0, nu, kappa, mean_u)
    }

    pub fn at_time(
        omega: SpectralField,
        theta: SpectralField,
        t: f64,
        nu: f64,
        kappa: f64,
        mean_u: [f64; 2],
    ) -> Result<Self> {
        if omega.grid() != theta.grid() {
            return Err(Error::SizeMismatch {
                expected: omega.grid().len(),
                found: theta.grid().len(),
            });
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return invalid(format!("viscosity must be finite and nonnegative, got {nu}"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return invalid(format!("conductivity must be positive (kappa > 0), got {kappa}"));
        }
        if !t.is_finite() || !mean_u.iter().all(|m| m.is_finite()) {
            return Err(Error::NonFinite("state header".into()));
        }
        if !omega.is_finite() || !theta.is_finite() {
            return Err(Error::NonFinite("state coefficients".into()));
        }
        if omega.coeffs()[0].norm() > MEAN_TOLERANCE * scale_of(&omega) {
            return Err(Error::NonzeroMean(omega.mean()));
        }
        for (name, f) in [("vorticity", &omega), ("temperature", &theta)] {
            let defect = f.hermitian_defect();
            if defect > HERMITIAN_TOLERANCE * scale_of(f) {
                return invalid(format!("{name} coefficients are not Hermitian (defect {defect:e})"));
            }
        }
        Ok(Self {
            omega,
            theta,
            t,
            nu,
            kappa,
            mean_u,
        })
    }

    pub fn grid(&self) -> Grid {
        self.omega.grid()
    }

    pub fn velocity(&self) -> VelocityField {
        biot_savart(&self.omega, self.mean_u).expect("state vorticity is mean-free")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::Complex64;

    #[test]
    fn validates_inputs() {
        let g = Grid::new(8).unwrap();
        let z = SpectralField::zeros(g);
        assert!(FlowState::new(z.clone(), z.clone(), 0.0, 0.0, [0.0; 2]).is_err());
        assert!(FlowState::new(z.clone(), z.clone(), -1.0, 1.0, [0.0; 2]).is_err());
        let mut w = z.clone();
        w.set_coeff(0, 0, Complex64::new(0.5, 0.0));
        assert!(matches!(
            FlowState::new(w, z.clone(), 0.0, 1.0, [0.0; 2]),
            Err(Error::NonzeroMean(_))
        ));
        let mut h = z.clone();
        h.set_coeff(1, 1, Complex64::new(1.0, 0.0));
        assert!(FlowState::new(z.clone(), h, 0.0, 1.0, [0.0; 2]).is_err());
        assert!(FlowState::new(z.clone(), z, 0.0, 1.0, [0.0; 2]).is_ok());
    }
}
