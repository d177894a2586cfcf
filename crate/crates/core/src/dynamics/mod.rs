//! Vorticity–temperature Boussinesq dynamics on the unit torus.

mod initial;
mod integrator;
mod run;
mod state;
mod trace;

pub use initial::{initial_state, omega_bump, periodic_bump, theta_bump, InitialData, Perturbation, THETA_CENTER};
pub use integrator::{cfl_rule, Integrator, TrackedState, DT_MAX, RK4_IMAGINARY_REACH, U_FLOOR};
pub use run::{
    simulate, simulate_from, AbortInfo, InvariantReport, PropertyVerdict, RunConfig, RunOutput, StepStats,
    BLOWUP_THRESHOLD, DISSIPATION_IDENTITY_TOL, ENERGY_BALANCE_TOL, LINF_SLACK, MAX_PRINCIPLE_TOL, TRANSPORT_GUARD,
};
pub(crate) use run::{blowup_check, near, Guard};
pub use state::{FlowState, HERMITIAN_TOLERANCE};
pub use trace::{cumulative_trapezoid, derivative_weights, energy_balance_residual, NormSample, NormTrace, Sampler};
