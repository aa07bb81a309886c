//! One-step purification maps, the four-qubit oracle and full protocol drivers.

mod drivers;
pub mod oracle;
mod steps;

pub use drivers::{
    run, run_dejmps, run_m2, run_m2h, run_m2h2, BranchRecord, Flags, Options, ProtocolKind, PurificationResult, Status, Target,
    TrajectoryPoint,
};
pub use oracle::{oracle_branch, oracle_outcomes, oracle_step};
pub use steps::{
    branch_probabilities, dejmps_twirl, m2_step, m2h_branches, purify_target, x_step, x_step_probability, BranchPair, BranchProbabilities, PurifyTarget,
    Sign, StepOutcome, DEGENERATE,
};
pub(crate) use steps::apply_g;
