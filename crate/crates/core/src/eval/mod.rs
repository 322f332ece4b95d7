//! Metrics, statistical tests and repeated cross-validation.

pub mod cv;
pub mod metrics;
pub mod stat_tests;

pub use cv::{
    derive_seed, fit_fold, repeated_cv, stratified_kfold, CvConfig, FeatureGroup, FoldPlan, MetricSummary,
    MetricsReport, RepeatResult,
};
pub use metrics::{auprc, auroc, confusion, confusion_and_metrics, pr_curve, roc_curve, ConfusionCounts, ThresholdMetrics};
pub use stat_tests::{chi2_test, delong_test, mcnemar_test, welch_ttest};
