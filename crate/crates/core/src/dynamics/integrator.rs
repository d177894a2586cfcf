use std::f64::consts::PI;

use super::state::FlowState;
use crate::error::{Error, Result};
use crate::torus::{dealias_keeps, mollifier_weight, mollify, Complex64, Grid, SpectralField, SpectralPlan};

const TWO_PI: f64 = 2.0 * PI;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Velocity floor used by the CFL rule when the flow is at rest.
pub const U_FLOOR: f64 = 1e-12;
/// Upper bound on any single step.
pub const DT_MAX: f64 = 1e-2;
/// Extent of the classical RK4 stability region along the imaginary axis (rounded down).
pub const RK4_IMAGINARY_REACH: f64 = 2.8;

/// Flow state plus the auxiliary quantities integrated alongside it.
///
/// `tracers[i]` solves the vorticity equation with forcing mollified at
/// `cutoffs[i]`, starting from the mollified initial vorticity.
/// `theta_dissipated` accumulates `2 kappa int ||grad theta||^2` and
/// `forcing_defect[i]` accumulates `int ||d1 theta - mollify(d1 theta)||_{L^2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedState {
    pub flow: FlowState,
    pub cutoffs: Vec<u32>,
    pub tracers: Vec<SpectralField>,
    pub theta_dissipated: f64,
    pub forcing_defect: Vec<f64>,
}

impl TrackedState {
    pub fn new(flow: FlowState, cutoffs: &[u32]) -> Result<Self> {
        let tracers = cutoffs
            .iter()
            .map(|&ell| mollify(&flow.omega, ell))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            flow,
            cutoffs: cutoffs.to_vec(),
            tracers,
            theta_dissipated: 0.0,
            forcing_defect: vec![0.0; cutoffs.len()],
        })
    }

    pub fn untracked(flow: FlowState) -> Self {
        Self {
            flow,
            cutoffs: Vec::new(),
            tracers: Vec::new(),
            theta_dissipated: 0.0,
            forcing_defect: Vec::new(),
        }
    }
}

/// Flat view of a tracked state: fields are `[omega, theta, tracers..]`,
/// scalars are `[mean_u1, mean_u2, theta_dissipated, defects..]`.
#[derive(Clone, Debug, Default)]
struct Packed {
    fields: Vec<Vec<Complex64>>,
    scalars: Vec<f64>,
}

impl Packed {
    fn shaped(fields: usize, len: usize, scalars: usize) -> Self {
        Self {
            fields: vec![vec![ZERO; len]; fields],
            scalars: vec![0.0; scalars],
        }
    }

    fn matches(&self, fields: usize, len: usize, scalars: usize) -> bool {
        self.fields.len() == fields
            && self.fields.first().is_none_or(|f| f.len() == len)
            && self.scalars.len() == scalars
    }

    fn load(&mut self, s: &TrackedState) {
        self.fields[0].copy_from_slice(s.flow.omega.coeffs());
        self.fields[1].copy_from_slice(s.flow.theta.coeffs());
        for (dst, src) in self.fields[2..].iter_mut().zip(&s.tracers) {
            dst.copy_from_slice(src.coeffs());
        }
        self.scalars[0] = s.flow.mean_u[0];
        self.scalars[1] = s.flow.mean_u[1];
        self.scalars[2] = s.theta_dissipated;
        self.scalars[3..].copy_from_slice(&s.forcing_defect);
    }

    fn store(&self, s: &mut TrackedState) {
        s.flow.omega.coeffs_mut().copy_from_slice(&self.fields[0]);
        s.flow.theta.coeffs_mut().copy_from_slice(&self.fields[1]);
        for (dst, src) in s.tracers.iter_mut().zip(&self.fields[2..]) {
            dst.coeffs_mut().copy_from_slice(src);
        }
        s.flow.mean_u = [self.scalars[0], self.scalars[1]];
        s.theta_dissipated = self.scalars[2];
        s.forcing_defect.copy_from_slice(&self.scalars[3..]);
    }
}

#[derive(Default)]
struct Workspace {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    na: Vec<Complex64>,
    nb: Vec<Complex64>,
}

impl Workspace {
    fn new(len: usize) -> Self {
        Self {
            a: vec![ZERO; len],
            b: vec![ZERO; len],
            c: vec![ZERO; len],
            u1: vec![0.0; len],
            u2: vec![0.0; len],
            g1: vec![0.0; len],
            g2: vec![0.0; len],
            h1: vec![0.0; len],
            h2: vec![0.0; len],
            na: vec![ZERO; len],
            nb: vec![ZERO; len],
        }
    }
}

struct Factors {
    dt: f64,
    nu_half: Vec<f64>,
    nu_full: Vec<f64>,
    kappa_half: Vec<f64>,
    kappa_full: Vec<f64>,
}

/// Integrating-factor RK4 integrator for one `(nu, kappa)` pair.
///
/// Diffusion is integrated exactly through `exp(-nu |2 pi k|^2 t)` factors
/// (Lawson's scheme); advection and buoyancy forcing go through classical RK4.
/// Holds its own transform plan and scratch memory, so use one per worker.
pub struct Integrator {
    grid: Grid,
    plan: SpectralPlan,
    nu: f64,
    kappa: f64,
    cutoffs: Vec<u32>,
    /// `2 pi k` per axis index with the Nyquist entry zeroed.
    dk: Vec<f64>,
    /// `|2 pi k|^2` per mode.
    lap: Vec<f64>,
    /// `1 / (2 pi |k|^2)` per mode, zero at the mean.
    inv_bs: Vec<f64>,
    keep: Vec<bool>,
    mollifiers: Vec<Vec<f64>>,
    factors: Option<Factors>,
    work: Workspace,
    stages: Vec<Packed>,
}

impl Integrator {
    pub fn new(grid: Grid, nu: f64, kappa: f64, cutoffs: &[u32]) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return crate::error::invalid(format!("viscosity must be finite and nonnegative, got {nu}"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return crate::error::invalid(format!("conductivity must be positive, got {kappa}"));
        }
        if cutoffs.iter().any(|&c| c < 1) {
            return crate::error::invalid("mollifier cutoffs must be at least 1");
        }
        let n = grid.n();
        let dk: Vec<f64> = (0..n)
            .map(|m| if grid.is_nyquist(m) { 0.0 } else { TWO_PI * grid.wavenumber(m) as f64 })
            .collect();
        let mut lap = vec![0.0; grid.len()];
        let mut inv_bs = vec![0.0; grid.len()];
        let mut keep = vec![false; grid.len()];
        let mut kmag = vec![0.0; grid.len()];
        for m2 in 0..n {
            let k2 = grid.wavenumber(m2) as f64;
            for m1 in 0..n {
                let k1 = grid.wavenumber(m1) as f64;
                let i = m2 * n + m1;
                let ksq = k1 * k1 + k2 * k2;
                lap[i] = TWO_PI * TWO_PI * ksq;
                if i != 0 {
                    inv_bs[i] = 1.0 / (TWO_PI * ksq);
                }
                keep[i] = dealias_keeps(grid, m1, m2);
                kmag[i] = ksq.sqrt();
            }
        }
        let mollifiers = cutoffs
            .iter()
            .map(|&ell| kmag.iter().map(|&k| mollifier_weight(k, ell as f64)).collect())
            .collect();
        Ok(Self {
            grid,
            plan: SpectralPlan::new(grid),
            nu,
            kappa,
            cutoffs: cutoffs.to_vec(),
            dk,
            lap,
            inv_bs,
            keep,
            mollifiers,
            factors: None,
            work: Workspace::new(grid.len()),
            stages: Vec::new(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn cutoffs(&self) -> &[u32] {
        &self.cutoffs
    }

    fn check_state(&self, s: &TrackedState) -> Result<()> {
        self.grid.check_same(&s.flow.grid())?;
        if s.cutoffs != self.cutoffs || s.tracers.len() != self.cutoffs.len() {
            return crate::error::invalid("state tracers do not match the integrator cutoffs");
        }
        if s.flow.nu != self.nu || s.flow.kappa != self.kappa {
            return crate::error::invalid("state parameters do not match the integrator");
        }
        Ok(())
    }

    fn shape(&self) -> (usize, usize, usize) {
        (2 + self.cutoffs.len(), self.grid.len(), 3 + self.cutoffs.len())
    }

    /// Fills `ws.u1`, `ws.u2` with grid velocity of vorticity `w` and mean `mean_u`.
    fn velocity_on_grid(&mut self, w: &[Complex64], mean_u: [f64; 2]) {
        let n = self.grid.n();
        let ws = &mut self.work;
        for m2 in 0..n {
            let d2 = self.dk[m2];
            for m1 in 0..n {
                let i = m2 * n + m1;
                // u1 = i d2 s, u2 = -i d1 s with s = w / |2 pi k|^2, packed as u1 + i u2
                let s = w[i] * (self.inv_bs[i] / TWO_PI);
                let u1 = Complex64::new(-s.im, s.re) * d2;
                let u2 = Complex64::new(s.im, -s.re) * self.dk[m1];
                ws.a[i] = u1 + Complex64::new(-u2.im, u2.re);
            }
        }
        ws.a[0] = Complex64::new(mean_u[0], mean_u[1]);
        self.plan.inverse_complex(&mut ws.a);
        for ((z, u1), u2) in ws.a.iter().zip(ws.u1.iter_mut()).zip(ws.u2.iter_mut()) {
            *u1 = z.re;
            *u2 = z.im;
        }
    }

    /// Packs `d1 f + i d2 f` into `buf` and transforms to the grid.
    fn gradient_into(plan: &SpectralPlan, dk: &[f64], n: usize, f: &[Complex64], buf: &mut [Complex64], g1: &mut [f64], g2: &mut [f64]) {
        for m2 in 0..n {
            let d2 = dk[m2];
            for (m1, &d1) in dk.iter().enumerate().take(n) {
                let i = m2 * n + m1;
                let c = f[i];
                // i d1 c + i (i d2 c) = (-d1 c.im - d2 c.re) + i (d1 c.re - d2 c.im)
                buf[i] = Complex64::new(-d1 * c.im - d2 * c.re, d1 * c.re - d2 * c.im);
            }
        }
        plan.inverse_complex(buf);
        for ((z, a), b) in buf.iter().zip(g1.iter_mut()).zip(g2.iter_mut()) {
            *a = z.re;
            *b = z.im;
        }
    }

    fn rhs(&mut self, q: &Packed, out: &mut Packed, t: f64) -> Result<()> {
        let n = self.grid.n();
        let len = self.grid.len();
        self.velocity_on_grid(&q.fields[0], [q.scalars[0], q.scalars[1]]);
        let ws = &mut self.work;
        Self::gradient_into(&self.plan, &self.dk, n, &q.fields[0], &mut ws.b, &mut ws.g1, &mut ws.g2);
        Self::gradient_into(&self.plan, &self.dk, n, &q.fields[1], &mut ws.c, &mut ws.h1, &mut ws.h2);
        let mut finite = true;
        for i in 0..len {
            let nw = ws.u1[i] * ws.g1[i] + ws.u2[i] * ws.g2[i];
            let nt = ws.u1[i] * ws.h1[i] + ws.u2[i] * ws.h2[i];
            finite &= nw.is_finite() && nt.is_finite();
            ws.g1[i] = nw;
            ws.h1[i] = nt;
        }
        if !finite {
            return Err(Error::Aborted {
                t,
                reason: "non-finite advection term".into(),
            });
        }
        self.plan
            .forward_pair_into(&ws.g1, &ws.h1, &mut ws.b, &mut ws.na, &mut ws.nb);
        let theta = &q.fields[1];
        {
            let (dw, rest) = out.fields.split_at_mut(1);
            let dw = &mut dw[0];
            let dt = &mut rest[0];
            for m2 in 0..n {
                for m1 in 0..n {
                    let i = m2 * n + m1;
                    let th = theta[i];
                    let forcing = Complex64::new(-self.dk[m1] * th.im, self.dk[m1] * th.re);
                    if self.keep[i] {
                        dw[i] = forcing - ws.na[i];
                        dt[i] = -ws.nb[i];
                    } else {
                        dw[i] = forcing;
                        dt[i] = ZERO;
                    }
                }
            }
            dw[0] = ZERO;
            dt[0] = ZERO;
        }

        // mollified tracers, two per forward transform
        let ntr = self.cutoffs.len();
        let mut j = 0;
        while j < ntr {
            Self::gradient_into(&self.plan, &self.dk, n, &q.fields[2 + j], &mut ws.b, &mut ws.g1, &mut ws.g2);
            for i in 0..len {
                ws.g1[i] = ws.u1[i] * ws.g1[i] + ws.u2[i] * ws.g2[i];
            }
            let paired = j + 1 < ntr;
            if paired {
                Self::gradient_into(&self.plan, &self.dk, n, &q.fields[3 + j], &mut ws.c, &mut ws.h1, &mut ws.h2);
                for i in 0..len {
                    ws.h1[i] = ws.u1[i] * ws.h1[i] + ws.u2[i] * ws.h2[i];
                }
            } else {
                ws.h1.iter_mut().for_each(|v| *v = 0.0);
            }
            if !ws.g1.iter().chain(ws.h1.iter()).all(|v| v.is_finite()) {
                return Err(Error::Aborted {
                    t,
                    reason: "non-finite tracer advection".into(),
                });
            }
            self.plan
                .forward_pair_into(&ws.g1, &ws.h1, &mut ws.b, &mut ws.na, &mut ws.nb);
            for (offset, nl) in [(0usize, &ws.na), (1, &ws.nb)] {
                if offset == 1 && !paired {
                    break;
                }
                let mol = &self.mollifiers[j + offset];
                let dz = &mut out.fields[2 + j + offset];
                for m2 in 0..n {
                    for m1 in 0..n {
                        let i = m2 * n + m1;
                        let th = theta[i];
                        let forcing = Complex64::new(-self.dk[m1] * th.im, self.dk[m1] * th.re) * mol[i];
                        dz[i] = if self.keep[i] { forcing - nl[i] } else { forcing };
                    }
                }
                dz[0] = ZERO;
            }
            j += 2;
        }

        out.scalars[0] = 0.0;
        out.scalars[1] = theta[0].re;
        let mut diss = 0.0;
        let mut defects = vec![0.0; ntr];
        for m2 in 0..n {
            for m1 in 0..n {
                let i = m2 * n + m1;
                let e = theta[i].norm_sqr();
                diss += self.lap[i] * e;
                let d1 = self.dk[m1] * self.dk[m1] * e;
                for (acc, mol) in defects.iter_mut().zip(&self.mollifiers) {
                    let r = 1.0 - mol[i];
                    *acc += d1 * r * r;
                }
            }
        }
        out.scalars[2] = 2.0 * self.kappa * diss;
        for (k, d) in defects.into_iter().enumerate() {
            out.scalars[3 + k] = d.sqrt();
        }
        Ok(())
    }

    fn ensure_factors(&mut self, dt: f64) {
        if self.factors.as_ref().is_some_and(|f| f.dt == dt) {
            return;
        }
        let half = |coef: f64| -> Vec<f64> {
            if coef == 0.0 {
                vec![1.0; self.lap.len()]
            } else {
                self.lap.iter().map(|l| (-coef * l * 0.5 * dt).exp()).collect()
            }
        };
        let nu_half = half(self.nu);
        let kappa_half = half(self.kappa);
        let nu_full = nu_half.iter().map(|e| e * e).collect();
        let kappa_full = kappa_half.iter().map(|e| e * e).collect();
        self.factors = Some(Factors {
            dt,
            nu_half,
            nu_full,
            kappa_half,
            kappa_full,
        });
    }

    /// Tendencies `(d omega_hat, d theta_hat)` without diffusion.
    pub fn tendencies(&mut self, s: &FlowState) -> Result<(SpectralField, SpectralField)> {
        let tracked = TrackedState::untracked(s.clone());
        let saved = std::mem::take(&mut self.cutoffs);
        let saved_mol = std::mem::take(&mut self.mollifiers);
        let mut q = Packed::shaped(2, self.grid.len(), 3);
        q.load(&tracked);
        let mut out = q.clone();
        let res = self.rhs(&q, &mut out, s.t);
        self.cutoffs = saved;
        self.mollifiers = saved_mol;
        res?;
        let mut fields = out.fields.into_iter();
        let dw = SpectralField::new(self.grid, fields.next().expect("vorticity tendency"))?;
        let dt = SpectralField::new(self.grid, fields.next().expect("temperature tendency"))?;
        Ok((dw, dt))
    }

    /// Advances `s` by `dt` with the integrating-factor RK4 scheme.
    pub fn step(&mut self, s: &mut TrackedState, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return crate::error::invalid(format!("time step must be positive, got {dt}"));
        }
        self.check_state(s)?;
        self.ensure_factors(dt);
        let (nf, len, ns) = self.shape();
        let mut st = std::mem::take(&mut self.stages);
        if st.len() != 6 || !st[0].matches(nf, len, ns) {
            st = (0..6).map(|_| Packed::shaped(nf, len, ns)).collect();
        }
        let t0 = s.flow.t;
        let h = dt;
        let result = (|| -> Result<()> {
            let (q, rest) = st.split_first_mut().expect("six stage buffers");
            let (k1, rest) = rest.split_first_mut().expect("six stage buffers");
            let (k2, rest) = rest.split_first_mut().expect("six stage buffers");
            let (k3, rest) = rest.split_first_mut().expect("six stage buffers");
            let (k4, rest) = rest.split_first_mut().expect("six stage buffers");
            let tmp = &mut rest[0];
            q.load(s);
            self.rhs(q, k1, t0)?;
            self.combine(tmp, |f, i, e| e.half(f, i) * (q.fields[f][i] + k1.fields[f][i] * (0.5 * h)), |j| {
                q.scalars[j] + 0.5 * h * k1.scalars[j]
            });
            self.rhs(tmp, k2, t0 + 0.5 * h)?;
            self.combine(tmp, |f, i, e| e.half(f, i) * q.fields[f][i] + k2.fields[f][i] * (0.5 * h), |j| {
                q.scalars[j] + 0.5 * h * k2.scalars[j]
            });
            self.rhs(tmp, k3, t0 + 0.5 * h)?;
            self.combine(tmp, |f, i, e| e.full(f, i) * q.fields[f][i] + k3.fields[f][i] * (h * e.half(f, i)), |j| {
                q.scalars[j] + h * k3.scalars[j]
            });
            self.rhs(tmp, k4, t0 + h)?;
            self.combine(tmp, |f, i, e| {
                let eh = e.half(f, i);
                let ef = e.full(f, i);
                q.fields[f][i] * ef
                    + (k1.fields[f][i] * ef + (k2.fields[f][i] + k3.fields[f][i]) * (2.0 * eh) + k4.fields[f][i]) * (h / 6.0)
            }, |j| {
                q.scalars[j] + h / 6.0 * (k1.scalars[j] + 2.0 * (k2.scalars[j] + k3.scalars[j]) + k4.scalars[j])
            });
            tmp.store(s);
            Ok(())
        })();
        self.stages = st;
        result?;
        s.flow.t = t0 + dt;
        Ok(())
    }

    fn combine(
        &self,
        out: &mut Packed,
        field: impl Fn(usize, usize, &FactorView<'_>) -> Complex64,
        scalar: impl Fn(usize) -> f64,
    ) {
        let view = FactorView {
            factors: self.factors.as_ref().expect("factors prepared before combining"),
        };
        for f in 0..out.fields.len() {
            for i in 0..out.fields[f].len() {
                out.fields[f][i] = field(f, i, &view);
            }
        }
        for j in 0..out.scalars.len() {
            out.scalars[j] = scalar(j);
        }
    }

    /// Grid maxima `(max |u|, max |u1| + max |u2|)` of the state's velocity.
    pub fn velocity_extent(&mut self, s: &FlowState) -> Result<(f64, f64)> {
        self.grid.check_same(&s.grid())?;
        let w = s.omega.coeffs().to_vec();
        self.velocity_on_grid(&w, s.mean_u);
        let ws = &self.work;
        let mut umax: f64 = 0.0;
        let (mut m1, mut m2): (f64, f64) = (0.0, 0.0);
        for (a, b) in ws.u1.iter().zip(&ws.u2) {
            umax = umax.max(a.hypot(*b));
            m1 = m1.max(a.abs());
            m2 = m2.max(b.abs());
        }
        Ok((umax, m1 + m2))
    }

    /// Advective step limit: `safety * h / max|u|`, the RK4 stability limit of the
    /// fastest retained mode scaled by `safety`, and [`DT_MAX`].
    pub fn cfl_dt(&mut self, s: &FlowState, safety: f64) -> Result<f64> {
        if !(safety > 0.0 && safety.is_finite()) {
            return crate::error::invalid(format!("safety factor must be positive, got {safety}"));
        }
        let (umax, usum) = self.velocity_extent(s)?;
        Ok(cfl_rule(self.grid, umax, usum, safety))
    }
}

/// The CFL rule on precomputed velocity extents.
pub fn cfl_rule(grid: Grid, umax: f64, usum: f64, safety: f64) -> f64 {
    let advective = safety * grid.spacing() / umax.max(U_FLOOR);
    let freq = TWO_PI * grid.dealias_cutoff().floor() * usum;
    let stability = if freq > 0.0 {
        safety * RK4_IMAGINARY_REACH / freq
    } else {
        f64::INFINITY
    };
    advective.min(stability).min(DT_MAX)
}

struct FactorView<'a> {
    factors: &'a Factors,
}

impl FactorView<'_> {
    #[inline]
    fn half(&self, field: usize, i: usize) -> f64 {
        if field == 1 {
            self.factors.kappa_half[i]
        } else {
            self.factors.nu_half[i]
        }
    }

    #[inline]
    fn full(&self, field: usize, i: usize) -> f64 {
        if field == 1 {
            self.factors.kappa_full[i]
        } else {
            self.factors.nu_full[i]
        }
    }
}
