//! Experiment orchestration: the explore/update loop, explore-then-exploit
//! evaluation, the ensemble-size sweep, the domain-transfer pipeline, and
//! CSV/JSON reporting.

mod buffer;
mod config;
mod exploit;
mod explore;
mod jobs;
mod report;
mod sweep;
mod transfer;

pub use buffer::ReplayBuffer;
pub use config::{ExperimentConfig, ExploitConfig, Method, NetSettings, SweepConfig, TrainingSettings, TransferConfig};
pub use exploit::{evaluate_tasks, explore_then_exploit, exploit_ceiling, exploit_floor, TaskScores};
pub use explore::{explore_loop, ExploreOutcome, RoundRecord, RunRecord, StepRecord};
pub use jobs::run_jobs;
pub use report::{
    emit_report, manifest_for, preflight, read_round_csv, rebuild_summaries, run_dir, summarize_run_dir, write_json,
    write_round_csv, write_step_csv, write_table, ConditionSummary, RoundSummary, RunManifest, Stat, REPORT_SCHEMA,
    RUN_MANIFEST_FILE, SUMMARY_FILE,
};
pub use sweep::{ensemble_size_sweep, sweep_point, SweepCondition, SweepRow};
pub use transfer::{control_dataset, domain_transfer_pipeline, fine_tune, one_step_l2, TransferRow};

pub use report::format_cell;
