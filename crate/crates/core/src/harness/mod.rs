//! Run orchestration: configuration, the search loop, reports and exports.

pub mod config;
pub mod export;
pub mod report;
pub mod run;

pub use config::{Budget, ObjectiveKind, RunConfig, PRESETS};
pub use export::emit_plots;
pub use report::{AblationPair, RunKind, RunReport, RunStatus};
pub use run::{
    ground_truth_for, rescore, run_ablation, run_ablation_with, run_baseline_with, run_item,
    run_item_with, run_random_baseline, score_run,
};
