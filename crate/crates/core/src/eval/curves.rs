use serde::{Deserialize, Serialize};

use super::confusion::check_inputs;
use crate::error::{Error, Result};

/// Curve points in plotting order plus the trapezoid area under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)`, starting at `(0, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    /// Precision of the no-skill classifier: the positive fraction.
    pub baseline: f64,
}

pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Cumulative `(tp, fp)` after admitting each distinct score, highest first.
fn sweep(scores: &[f64], labels: &[f64]) -> Vec<(u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1.0 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            out.push((tp, fp));
        }
    }
    out
}

fn class_totals(labels: &[f64]) -> (u64, u64) {
    let pos = labels.iter().filter(|&&y| y == 1.0).count() as u64;
    (pos, labels.len() as u64 - pos)
}

/// `(FPR, TPR)` from `(0, 0)` to `(1, 1)` over every distinct threshold.
pub fn roc_curve(scores: &[f64], labels: &[f64]) -> Result<Curve> {
    check_inputs(scores, labels)?;
    let (pos, neg) = class_totals(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!("{pos} positive and {neg} negative labels")));
    }
    let mut points = vec![(0.0, 0.0)];
    points.extend(
        sweep(scores, labels)
            .into_iter()
            .map(|(tp, fp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)),
    );
    let auc = trapezoid(&points);
    Ok(Curve { points, auc })
}

/// `(recall, precision)` over every distinct threshold.
pub fn pr_curve(scores: &[f64], labels: &[f64]) -> Result<PrCurve> {
    check_inputs(scores, labels)?;
    let (pos, _) = class_totals(labels);
    if pos == 0 {
        return Err(Error::SingleClass("no positive labels".into()));
    }
    let mut points = vec![(0.0, 1.0)];
    points.extend(
        sweep(scores, labels)
            .into_iter()
            .map(|(tp, fp)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64)),
    );
    let auc = trapezoid(&points);
    Ok(PrCurve {
        points,
        auc,
        baseline: pos as f64 / labels.len() as f64,
    })
}
