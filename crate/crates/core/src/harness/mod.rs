//! Experiment orchestration: combination grid, validation win-rate
//! selection, baselines, synthetic worlds and reports.

pub mod config;
pub mod experiment;
pub mod report;
pub mod sweep;
pub mod synthetic;
pub mod winrate;

pub use config::{BestOf20Config, RunConfig, SelectorChoice, SplitConfig, TOOL_VERSION};
pub use experiment::{
    evaluate_combination, load_inputs, select_references, split_plan, run_experiment, run_experiment_on, AssessorResult, Combination, CombinationResult,
    EvalReport, LlmAuc, SplitSummary,
};
pub use report::{report_csv, report_svg, write_report};
pub use sweep::{sweep_n_ref, SweepRow, SweepTable};
pub use synthetic::{generate_synthetic_world, world_from_parameters, GroundTruth, SyntheticConfig, SyntheticWorld};
pub use winrate::{win_rate_select, win_rates, WinRateSelection};
