//! Experiment orchestration: seeded multi-run scenarios, parameter sweeps,
//! policy heatmaps and the figure presets. Everything lands in CSV files with
//! a one-line header.

mod heatmap;
mod presets;
mod scenario;
mod simulate;
mod sweep;

pub use heatmap::{action_code, export_policy_heatmap, write_heatmaps, HeatmapSlice};
pub use presets::{
    arq_config, correlated_eh, run_preset, write_results, write_sweeps, Check, Preset,
    PresetOptions, PresetReport, LEARNING_SET,
};
pub use scenario::{
    mean_stderr, run_policy, run_scenario, Algorithm, RunResult, Scenario, ScenarioResult, SummaryRow,
    RUNS_CSV_HEADER, SUMMARY_CSV_HEADER,
};
pub use simulate::{batch_means, simulate};
pub use sweep::{monotonicity, run_sweep, SweepParam, SweepRow, SweepSpec, SweepTable, SWEEP_CSV_HEADER};

/// Runs per scenario unless told otherwise.
pub const DEFAULT_RUNS: usize = 100;

/// Environment steps per run unless told otherwise.
pub const DEFAULT_HORIZON: usize = 20_000;
