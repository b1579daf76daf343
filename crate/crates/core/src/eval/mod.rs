//! Splits, cross-validation, metrics and result aggregation.

pub mod metrics;
pub mod report;
pub mod runs;
pub mod split;

pub use metrics::{metrics, Metrics};
pub use report::{EvalReport, ReportCell, ReportMeta};
pub use runs::{mean_std, repeated_runs, RunSummary};
pub use split::{fold_split, kfold, split, split_stratified, test_size, SplitPlan};
