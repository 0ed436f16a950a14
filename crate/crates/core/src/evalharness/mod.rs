//! Confusion matrices, precision/recall/F, cross-validation and
//! hyperparameter search.

mod cv;
mod metrics;
mod report;
mod search;

pub use cv::{fingerprint, fold_seed, run_cv, ClassRow, CvReport, CvTimings, FoldOutcome};
pub use metrics::{class_metrics, confusion_matrix, f_measure, macro_average, micro_average, Averages, ClassMetrics, ConfusionMatrix};
pub use report::{render_flat_table, render_json, render_table};
pub use search::{grid_search, random_search, Config, SearchOutcome, SearchSpace, TrialResult};
