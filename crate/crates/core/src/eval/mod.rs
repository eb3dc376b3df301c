//! Confusion metrics, ROC and precision-recall curves, multi-run
//! aggregation and the SNR sweep.

mod confusion;
mod curves;
mod report;
mod sweep;

pub use confusion::{confusion, metrics, ConfusionCounts, Metrics};
pub use curves::{pr_curve, roc_curve, trapezoid, Curve, PrCurve};
pub use report::{aggregate, points_csv, MetricsReport, RunSummary, Summary, SUMMARY_METRICS, THRESHOLD};
pub use sweep::{
    evaluate_variant, noisy_test_split, run_seeds, snr_sweep, SweepCell, SweepRow, SweepTable, Variant, DEFAULT_RUNS,
    DEFAULT_SNRS,
};
