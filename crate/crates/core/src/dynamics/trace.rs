use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::integrator::TrackedState;
use crate::error::{Error, Result};
use crate::torus::{
    besov_with_plan, derivative, lp_norm, Axis, Grid, SpectralField, SpectralPlan,
};

const TWO_PI: f64 = 2.0 * PI;

/// Measured norms of one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub u_l2: f64,
    pub omega_l1: f64,
    pub omega_l2: f64,
    pub omega_l4: f64,
    pub omega_linf: f64,
    pub theta_l2: f64,
    pub theta_h1: f64,
    pub theta_linf: f64,
    pub grad_theta_linf: f64,
    pub d1_theta_linf: f64,
    pub theta_besov: f64,
    pub kinetic_energy: f64,
    pub buoyancy_work: f64,
    pub viscous_dissipation: f64,
    pub theta_dissipated: f64,
    pub enstrophy_tail: f64,
}

impl NormSample {
    /// CSV column order.
    pub const COLUMNS: [&'static str; 17] = [
        "t",
        "u_l2",
        "omega_l1",
        "omega_l2",
        "omega_l4",
        "omega_linf",
        "theta_l2",
        "theta_h1",
        "theta_linf",
        "grad_theta_linf",
        "d1_theta_linf",
        "theta_besov",
        "kinetic_energy",
        "buoyancy_work",
        "viscous_dissipation",
        "theta_dissipated",
        "enstrophy_tail",
    ];

    pub fn row(&self) -> [f64; 17] {
        [
            self.t,
            self.u_l2,
            self.omega_l1,
            self.omega_l2,
            self.omega_l4,
            self.omega_linf,
            self.theta_l2,
            self.theta_h1,
            self.theta_linf,
            self.grad_theta_linf,
            self.d1_theta_linf,
            self.theta_besov,
            self.kinetic_energy,
            self.buoyancy_work,
            self.viscous_dissipation,
            self.theta_dissipated,
            self.enstrophy_tail,
        ]
    }

    pub fn from_row(row: &[f64]) -> Result<Self> {
        if row.len() != 17 {
            return Err(Error::SizeMismatch {
                expected: 17,
                found: row.len(),
            });
        }
        Ok(Self {
            t: row[0],
            u_l2: row[1],
            omega_l1: row[2],
            omega_l2: row[3],
            omega_l4: row[4],
            omega_linf: row[5],
            theta_l2: row[6],
            theta_h1: row[7],
            theta_linf: row[8],
            grad_theta_linf: row[9],
            d1_theta_linf: row[10],
            theta_besov: row[11],
            kinetic_energy: row[12],
            buoyancy_work: row[13],
            viscous_dissipation: row[14],
            theta_dissipated: row[15],
            enstrophy_tail: row[16],
        })
    }

    /// `||omega||_{L^p}` for `p` in `{1, 2, 4, inf}`.
    pub fn omega_lp(&self, p: f64) -> Option<f64> {
        if p == 1.0 {
            Some(self.omega_l1)
        } else if p == 2.0 {
            Some(self.omega_l2)
        } else if p == 4.0 {
            Some(self.omega_l4)
        } else if p.is_infinite() {
            Some(self.omega_linf)
        } else {
            None
        }
    }
}

/// Time series of [`NormSample`]s for one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTrace {
    pub nu: f64,
    pub kappa: f64,
    pub samples: Vec<NormSample>,
}

impl NormTrace {
    pub fn new(nu: f64, kappa: f64) -> Self {
        Self {
            nu,
            kappa,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn column(&self, f: impl Fn(&NormSample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    /// Entries finite and nonnegative (except the work rate), times strictly increasing.
    pub fn is_well_formed(&self) -> bool {
        let ordered = self.samples.windows(2).all(|w| w[1].t > w[0].t);
        let finite = self.samples.iter().all(|s| {
            s.row().iter().all(|v| v.is_finite())
                && s.row()
                    .iter()
                    .enumerate()
                    .all(|(i, v)| i == 13 || *v >= 0.0)
        });
        ordered && finite
    }
}

/// Computes [`NormSample`]s on one grid.
pub struct Sampler {
    grid: Grid,
    plan: SpectralPlan,
    lap: Vec<f64>,
    tail_shell: Vec<bool>,
}

impl Sampler {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let cut = grid.dealias_cutoff().floor();
        let mut lap = vec![0.0; grid.len()];
        let mut tail_shell = vec![false; grid.len()];
        for m2 in 0..n {
            let k2 = grid.wavenumber(m2) as f64;
            for m1 in 0..n {
                let k1 = grid.wavenumber(m1) as f64;
                lap[m2 * n + m1] = TWO_PI * TWO_PI * (k1 * k1 + k2 * k2);
                let kinf = k1.abs().max(k2.abs());
                tail_shell[m2 * n + m1] = kinf > 0.9 * cut && kinf <= cut;
            }
        }
        Self {
            grid,
            plan: SpectralPlan::new(grid),
            lap,
            tail_shell,
        }
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    /// Largest coefficient in the outermost retained shell relative to the largest coefficient.
    pub fn enstrophy_tail(&self, omega: &SpectralField) -> f64 {
        let mut top: f64 = 0.0;
        let mut tail: f64 = 0.0;
        for (c, &shell) in omega.coeffs().iter().zip(&self.tail_shell) {
            let a = c.norm();
            top = top.max(a);
            if shell {
                tail = tail.max(a);
            }
        }
        if top > 0.0 {
            tail / top
        } else {
            0.0
        }
    }

    pub fn sample(&self, s: &TrackedState) -> Result<NormSample> {
        let flow = &s.flow;
        self.grid.check_same(&flow.grid())?;
        let (w, th) = self.plan.inverse_pair(&flow.omega, &flow.theta)?;
        let (t1, t2) = self
            .plan
            .inverse_pair(&derivative(&flow.theta, Axis::X1), &derivative(&flow.theta, Axis::X2))?;
        let grad_theta_linf = t1
            .values()
            .iter()
            .zip(t2.values())
            .fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)));
        let u = flow.velocity();
        let mut u_sq = 0.0;
        let mut work = 0.0;
        let mut grad_u_sq = 0.0;
        let mut theta_h1_sq = 0.0;
        for i in 0..self.grid.len() {
            let (a, b) = (u.u1.coeffs()[i], u.u2.coeffs()[i]);
            let e = a.norm_sqr() + b.norm_sqr();
            u_sq += e;
            grad_u_sq += self.lap[i] * e;
            let th_hat = flow.theta.coeffs()[i];
            work += (th_hat * b.conj()).re;
            theta_h1_sq += (1.0 + self.lap[i]) * th_hat.norm_sqr();
        }
        let u_l2 = u_sq.sqrt();
        Ok(NormSample {
            t: flow.t,
            u_l2,
            omega_l1: lp_norm(&w, 1.0)?,
            omega_l2: lp_norm(&w, 2.0)?,
            omega_l4: lp_norm(&w, 4.0)?,
            omega_linf: w.max_abs(),
            theta_l2: flow.theta.l2_norm(),
            theta_h1: theta_h1_sq.sqrt(),
            theta_linf: th.max_abs(),
            grad_theta_linf,
            d1_theta_linf: t1.max_abs(),
            theta_besov: besov_with_plan(&self.plan, &flow.theta),
            kinetic_energy: 0.5 * u_sq,
            buoyancy_work: work,
            viscous_dissipation: flow.nu * grad_u_sq,
            theta_dissipated: s.theta_dissipated,
            enstrophy_tail: self.enstrophy_tail(&flow.omega),
        })
    }
}

/// First-derivative weights at `x0` on arbitrary distinct `nodes` (Fornberg's recursion).
pub fn derivative_weights(nodes: &[f64], x0: f64) -> Vec<f64> {
    let m = nodes.len();
    let mut c = vec![[0.0_f64; 2]; m];
    if m == 0 {
        return Vec::new();
    }
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..m {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

/// `max_i |dE/dt - int theta u2 + nu ||grad u||^2| / max(1, E)` over interior samples, with
/// `dE/dt` from the five nearest samples (three when fewer are available).
pub fn energy_balance_residual(trace: &NormTrace) -> Result<f64> {
    let s = &trace.samples;
    if s.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "energy balance needs at least 3 samples, got {}",
            s.len()
        )));
    }
    let width = s.len().min(5);
    let mut worst: f64 = 0.0;
    for i in 1..s.len() - 1 {
        let lo = i.saturating_sub(width / 2).min(s.len() - width);
        let window = &s[lo..lo + width];
        let nodes: Vec<f64> = window.iter().map(|p| p.t).collect();
        let de: f64 = derivative_weights(&nodes, s[i].t)
            .iter()
            .zip(window)
            .map(|(w, p)| w * p.kinetic_energy)
            .sum();
        let r = (de - s[i].buoyancy_work + s[i].viscous_dissipation).abs() / s[i].kinetic_energy.max(1.0);
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Trapezoid integral of `values` over `times`, cumulative.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}
