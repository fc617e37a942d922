//! Training, evaluation metrics and reports.

mod metrics;
mod report;
mod train;

pub use metrics::{accuracy, auroc, precision_at_n, Confusion};
pub use report::{EvalReport, PrecisionRow, ThresholdRow, REPORT_THRESHOLDS, REPORT_TOP_N};
pub use train::{
    evaluate_instances, score_articles, train, training_instances, write_history_csv, EpochRecord, Objective,
    TrainConfig, TrainOutcome,
};
