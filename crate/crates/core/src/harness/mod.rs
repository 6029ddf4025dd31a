//! Scenario ingestion, the APC loop, Monte Carlo sweeps and result files.

mod apc;
mod oracle;
mod report;
mod scenario;
mod sweep;

pub use apc::{
    bootstrap_selection, convergence_iteration, rr_weights, run_apc_loop, run_apc_loop_on, run_slo_baseline,
    solve_pairing, steady_state, Allocator, ApcOptions, ChannelLink, ColdStart, IterationReport, Recommendation,
    Solver, StaRecommendation,
};
pub use oracle::{
    audit_incidence, check_lp_random, compare_joint, comparison_tensor, random_pairing_instance, two_stage_throughput,
    validate_dcf, DcfCheck, JointComparison, LpCheck, TuCheck,
};
pub use report::{emit_results, write_reports, write_sweep, Format};
pub use scenario::{load_scenario, ApSpec, LinkSpec, RandomSnr, Scenario, StaSpec, BUNDLED};
pub use sweep::{evaluate, round_snr, run_monte_carlo, Algorithm, SweepConfig, SweepPoint, LADDER};
