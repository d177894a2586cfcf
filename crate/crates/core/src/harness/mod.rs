//! Viscosity sweeps against the inviscid reference and their verdicts.

mod report;
mod sweep;

pub use report::{
    convergence_order, iteration_smallness, mollified_consistency, nonincreasing, p_label, parse_p, smallness_series,
    vorticity_gap_gronwall_check, FinalBoundCheck, GapSeries, GronwallCheck, HoldoutReport, InitialGaps,
    MollifiedRow, MollifiedTable, NuReport, OrderFit, RunChecks, RunSummary, SweepMetadata, SweepReport, Verdict,
    VorticityGap, HOLDOUT_LIMIT, MOLLIFIED_FLOOR, MOLLIFIED_TOL, THETA_TOL,
};
pub use sweep::{sweep, velocity_gap, vorticity_gaps, SweepConfig, SweepOutcome, WORKERS_ENV};
