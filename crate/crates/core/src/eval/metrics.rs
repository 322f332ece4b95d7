//! Threshold metrics, ROC and precision-recall curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Threshold metrics; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub counts: ConfusionCounts,
    pub threshold: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionCounts> {
    check_lengths(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Predicted positive iff `score >= threshold`.
pub fn confusion_and_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    if scores.is_empty() {
        return Err(Error::EmptyTable);
    }
    let c = confusion(scores, labels, threshold)?;
    Ok(ThresholdMetrics {
        counts: c,
        threshold,
        sensitivity: c.sensitivity(),
        specificity: c.specificity(),
        accuracy: c.accuracy(),
        f1: c.f1(),
    })
}

/// Groups of tied scores, highest first: (score, positives, negatives).
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(f64, u64, u64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in idx {
        let s = scores[i];
        let pos = (labels[i] == 1) as u64;
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                g.1 += pos;
                g.2 += 1 - pos;
            }
            _ => groups.push((s, pos, 1 - pos)),
        }
    }
    groups
}

fn class_totals(labels: &[u8]) -> (u64, u64) {
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    (pos, labels.len() as u64 - pos)
}

/// Mann–Whitney AUROC with ties counted one half.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (n_pos, n_neg) = class_totals(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    // twice the concordant-pair count, in exact integer arithmetic
    let mut twice: u128 = 0;
    let mut pos_above: u128 = 0;
    for (_, p, n) in tie_groups(scores, labels) {
        twice += n as u128 * (2 * pos_above + p as u128);
        pos_above += p as u128;
    }
    Ok(twice as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points at every distinct score (predicted positive iff score ≥
/// threshold), preceded by the origin at threshold +∞.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    check_lengths(scores, labels)?;
    let (n_pos, n_neg) = class_totals(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut pts = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (s, p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        pts.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(pts)
}

/// Trapezoidal area under a curve given as (x, y) points in x order.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .fold(0.0, |a, b| a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision-recall points at every distinct score, highest threshold first.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<PrPoint>> {
    check_lengths(scores, labels)?;
    let (n_pos, _) = class_totals(labels);
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    Ok(tie_groups(scores, labels)
        .into_iter()
        .map(|(s, p, n)| {
            tp += p;
            fp += n;
            PrPoint {
                threshold: s,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / n_pos as f64,
            }
        })
        .collect())
}

/// Average precision: Σ (recall increment × precision) over distinct thresholds.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for pt in pr_curve(scores, labels)? {
        ap += (pt.recall - prev_recall) * pt.precision;
        prev_recall = pt.recall;
    }
    Ok(ap)
}
