use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::confusion::{confusion, metrics, ConfusionCounts, Metrics};
use super::curves::{pr_curve, roc_curve, Curve, PrCurve};
use crate::error::{Error, Result};

/// Headline decision threshold.
pub const THRESHOLD: f64 = 0.5;

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// `mean ± std` with `digits` decimals.
    pub fn cell(&self, digits: usize) -> String {
        format!("{:.*} ± {:.*}", digits, self.mean, digits, self.std)
    }
}

pub fn aggregate(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(Summary { mean, std: var.sqrt() })
}

/// Everything measured for one set of scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub samples: usize,
    pub positives: usize,
    pub confusion: ConfusionCounts,
    pub metrics: Metrics,
    pub roc: Curve,
    pub pr: PrCurve,
    pub seeds: Vec<u64>,
}

impl MetricsReport {
    pub fn from_scores(scores: &[f64], labels: &[f64], seeds: Vec<u64>) -> Result<Self> {
        let confusion = confusion(scores, labels, THRESHOLD)?;
        Ok(Self {
            threshold: THRESHOLD,
            samples: scores.len(),
            positives: confusion.positives() as usize,
            metrics: metrics(&confusion),
            confusion,
            roc: roc_curve(scores, labels)?,
            pr: pr_curve(scores, labels)?,
            seeds,
        })
    }

    /// `key = value` lines; curve points are exported separately.
    pub fn to_text(&self) -> String {
        let m = &self.metrics;
        let c = &self.confusion;
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let undefined = if m.undefined.is_empty() {
            "none".to_string()
        } else {
            m.undefined.join(",")
        };
        let mut out = String::new();
        for (k, v) in [
            ("threshold", self.threshold.to_string()),
            ("samples", self.samples.to_string()),
            ("positives", self.positives.to_string()),
            ("tp", c.tp.to_string()),
            ("fp", c.fp.to_string()),
            ("tn", c.tn.to_string()),
            ("fn", c.fn_.to_string()),
            ("accuracy", m.accuracy.to_string()),
            ("balanced_accuracy", m.balanced_accuracy.to_string()),
            ("precision", m.precision.to_string()),
            ("recall", m.recall.to_string()),
            ("specificity", m.specificity.to_string()),
            ("f1", m.f1.to_string()),
            ("undefined", undefined),
            ("roc_auc", self.roc.auc.to_string()),
            ("pr_auc", self.pr.auc.to_string()),
            ("pr_baseline", self.pr.baseline.to_string()),
            ("seeds", seeds.join(",")),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn roc_csv(&self) -> String {
        points_csv("fpr,tpr", &self.roc.points)
    }

    pub fn pr_csv(&self) -> String {
        points_csv("recall,precision", &self.pr.points)
    }
}

pub fn points_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut out = format!("{header}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

pub const SUMMARY_METRICS: [&str; 8] = [
    "accuracy",
    "balanced_accuracy",
    "precision",
    "recall",
    "specificity",
    "f1",
    "roc_auc",
    "pr_auc",
];

/// Mean and std of every headline metric over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seeds: Vec<u64>,
    pub metrics: Vec<(String, Summary)>,
}

impl RunSummary {
    pub fn from_reports(reports: &[MetricsReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyInput("reports".into()));
        }
        let pick = |r: &MetricsReport, name: &str| match name {
            "accuracy" => r.metrics.accuracy,
            "balanced_accuracy" => r.metrics.balanced_accuracy,
            "precision" => r.metrics.precision,
            "recall" => r.metrics.recall,
            "specificity" => r.metrics.specificity,
            "f1" => r.metrics.f1,
            "roc_auc" => r.roc.auc,
            _ => r.pr.auc,
        };
        let mut metrics = Vec::new();
        for name in SUMMARY_METRICS {
            let values: Vec<f64> = reports.iter().map(|r| pick(r, name)).collect();
            metrics.push((name.to_string(), aggregate(&values)?));
        }
        Ok(Self {
            seeds: reports.iter().flat_map(|r| r.seeds.iter().copied()).collect(),
            metrics,
        })
    }

    pub fn get(&self, name: &str) -> Option<Summary> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut out = format!("runs = {}\nseeds = {}\n", self.seeds.len(), seeds.join(","));
        for (name, s) in &self.metrics {
            let _ = writeln!(out, "{name}.mean = {}\n{name}.std = {}", s.mean, s.std);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn population_std() {
        let s = aggregate(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(aggregate(&[0.7]).unwrap().std, 0.0);
        assert!(aggregate(&[]).is_err());
        assert_eq!(
            Summary {
                mean: 0.98765,
                std: 0.0
            }
            .cell(4),
            "0.9877 ± 0.0000"
        );
    }

    #[test]
    fn report_text_is_key_value() {
        let r = MetricsReport::from_scores(&[0.9, 0.2, 0.8, 0.4], &[1.0, 1.0, 0.0, 0.0], vec![0]).unwrap();
        let text = r.to_text();
        assert!(text.contains("balanced_accuracy = 0.5\n"));
        assert!(text.lines().all(|l| l.split_once(" = ").is_some()));
        assert!(r.roc_csv().starts_with("fpr,tpr\n0,0\n"));
        assert_eq!(r.pr_csv().lines().count(), 1 + r.pr.points.len());
    }

    #[test]
    fn run_summary_over_reports() {
        let a = MetricsReport::from_scores(&[0.9, 0.1], &[1.0, 0.0], vec![0]).unwrap();
        let b = MetricsReport::from_scores(&[0.9, 0.6], &[1.0, 0.0], vec![1]).unwrap();
        let s = RunSummary::from_reports(&[a, b]).unwrap();
        assert_eq!(s.seeds, [0, 1]);
        let ba = s.get("balanced_accuracy").unwrap();
        assert_eq!((ba.mean, ba.std), (0.75, 0.25));
        assert!(s.to_text().contains("f1.std = "));
    }

    proptest! {
        #[test]
        fn metrics_are_bounded(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            let m = metrics(&ConfusionCounts { tp, fp, tn, fn_ });
            for v in [m.accuracy, m.balanced_accuracy, m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-15);
            if m.precision + m.recall > 0.0 {
                let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                prop_assert!((m.f1 - h).abs() < 1e-15);
            }
        }

        #[test]
        fn balanced_sets_have_equal_accuracies(tp in 0u64..40, tn in 0u64..40, n in 40u64..80) {
            let c = ConfusionCounts { tp, fn_: n - tp, tn, fp: n - tn };
            let m = metrics(&c);
            prop_assert!((m.accuracy - m.balanced_accuracy).abs() < 1e-15);
        }
    }
}
