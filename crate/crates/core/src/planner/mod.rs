//! Exact planning: state enumeration, relative value iteration, policy
//! iteration, exact policy evaluation and structural checks.

mod average;
mod evaluate;
mod export;
mod kernel;
mod rvi;
mod space;
mod verify;

pub use average::AverageAoi;
pub use evaluate::{
    evaluate_policy_exact, policy_iteration_solve, EvalMethod, Evaluation, PolicyIterationResult,
    DENSE_LIMIT,
};
pub use export::{read_policy_csv, write_policy_csv, PolicyRow};
pub use kernel::Mdp;
pub use rvi::{rvi_solve, RviOptions, Solution, Unconverged, ValueTables, DEFAULT_REFERENCE};
pub use space::{
    aoi_pair_count, argmin_action, enumerate_states, StateIndexer, StateSpace, TabularPolicy,
};
pub use verify::{
    verify_submodularity, verify_threshold_structure, SubmodularityReport, SubmodularityViolation,
    ThresholdReport, ThresholdViolation, SUBMODULARITY_TOL,
};
