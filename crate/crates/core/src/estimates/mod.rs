//! Executable forms of the a priori estimates and their envelopes.

mod constants;
mod envelope;
mod inequalities;

pub use constants::{
    calibrate_gamma, calibrate_on, flow_constants, snapshot_gradients, theta_aggregate, theta_aggregate_half_cadence,
    BoundConstants, ConstantOptions, GammaCalibration, KForm, GAMMA_TOL,
};
pub use envelope::{
    check_domination, check_domination_with, final_velocity_bound, iteration_constants, smallness_base, smallness_envelope,
    window_length, windowed_smallness_envelope, DominationReport, Envelope, FinalForm, Violation, DOMINATION_TOL,
};
pub use inequalities::{
    arithmetic_bound, exponent_schedule, gronwall_envelope, iterate_discrete, nu_tilde_limit, r_star,
    sigma_l2_bound, theta_stability_bound, DiscreteIteration, ExponentSchedule,
};
