//! Detection scoring by centroid matching and tracking accuracy summaries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_lap, CostMatrix, Gate};
use crate::Vec3;

/// Matching radius used when none is configured (μm).
pub const DEFAULT_MATCH_RADIUS_UM: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl DetectionScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1: harmonic_mean(precision, recall),
        }
    }
}

/// Pairs of (truth index, detection index) in the optimal matching within
/// `radius`. Truth points are the rows; leaving one unmatched costs `radius`.
pub fn centroid_matching(detections: &[Vec3], truth: &[Vec3], radius: f64) -> Vec<(usize, usize)> {
    assert!(radius > 0.0, "matching radius must be positive");
    let cost = CostMatrix::from_positions(truth, detections, &Gate::Uniform(radius))
        .expect("finite centroids and positive radius");
    solve_lap(&cost).matched_pairs().collect()
}

/// Scores detections against annotated centroids.
pub fn match_centroids(detections: &[Vec3], truth: &[Vec3], radius: f64) -> DetectionScore {
    let tp = centroid_matching(detections, truth, radius).len();
    DetectionScore::from_counts(tp, detections.len() - tp, truth.len() - tp)
}

/// Scores over several images: pooled counts, and the mean of per-image
/// ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub radius_um: f64,
    pub per_image: Vec<DetectionScore>,
    pub pooled: DetectionScore,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

pub fn evaluate_detections(images: &[(Vec<Vec3>, Vec<Vec3>)], radius: f64) -> DetectionReport {
    let per_image: Vec<DetectionScore> = images
        .iter()
        .map(|(d, t)| match_centroids(d, t, radius))
        .collect();
    let sum = |f: fn(&DetectionScore) -> usize| per_image.iter().map(f).sum::<usize>();
    let pooled = DetectionScore::from_counts(
        sum(|s| s.true_positives),
        sum(|s| s.false_positives),
        sum(|s| s.false_negatives),
    );
    let mean = |f: fn(&DetectionScore) -> f64| {
        if per_image.is_empty() {
            0.0
        } else {
            per_image.iter().map(f).sum::<f64>() / per_image.len() as f64
        }
    };
    DetectionReport {
        radius_um: radius,
        pooled,
        mean_precision: mean(|s| s.precision),
        mean_recall: mean(|s| s.recall),
        mean_f1: mean(|s| s.f1),
        per_image,
    }
}

/// Fraction of the later frame's nuclei that received the right label.
///
/// `predicted[j]` and `truth[j]` are the ids of detection `j`. A nucleus
/// whose true id was not among the tracks of the earlier frame is expected
/// to stay unlabeled. An empty frame scores 1.
pub fn frame_accuracy(predicted: &[Option<String>], truth: &[String], prev_ids: &HashSet<String>) -> f64 {
    assert_eq!(predicted.len(), truth.len(), "one prediction per detection");
    if truth.is_empty() {
        return 1.0;
    }
    let correct = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| {
            if prev_ids.contains(t.as_str()) {
                p.as_deref() == Some(t.as_str())
            } else {
                p.is_none()
            }
        })
        .count();
    correct as f64 / truth.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub per_pair_accuracies: Vec<f64>,
    pub median: f64,
    pub iqr: f64,
}

/// Quantile by linear interpolation between order statistics at
/// `q * (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range. Returns `None` for an empty list.
pub fn summarize(accuracies: &[f64]) -> Option<AccuracySummary> {
    if accuracies.is_empty() {
        return None;
    }
    let mut sorted = accuracies.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(AccuracySummary {
        per_pair_accuracies: accuracies.to_vec(),
        median: quantile(&sorted, 0.5),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
    })
}

/// One row of a method-by-gate accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: String,
    pub gate: String,
    pub summary: AccuracySummary,
}

pub fn gate_label(gate_um: f64) -> String {
    if gate_um.is_finite() {
        format!("{gate_um} um")
    } else {
        "none".into()
    }
}

/// Plain-text table: method, gate, median, IQR.
pub fn format_accuracy_table(rows: &[AccuracyRow]) -> String {
    let mut out = format!("{:<16} {:>10} {:>8} {:>8}\n", "method", "gate", "median", "iqr");
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>10} {:>8.3} {:>8.3}\n",
            r.method, r.gate, r.summary.median, r.summary.iqr
        ));
    }
    out
}

/// Plain-text detection report: one line per image, then pooled and mean.
pub fn format_detection_report(report: &DetectionReport) -> String {
    let mut out = format!(
        "matching radius {} um\n{:<10} {:>5} {:>5} {:>5} {:>9} {:>7} {:>7}\n",
        report.radius_um, "image", "tp", "fp", "fn", "precision", "recall", "f1"
    );
    let line = |name: &str, s: &DetectionScore| {
        format!(
            "{:<10} {:>5} {:>5} {:>5} {:>9.3} {:>7.3} {:>7.3}\n",
            name, s.true_positives, s.false_positives, s.false_negatives, s.precision, s.recall, s.f1
        )
    };
    for (i, s) in report.per_image.iter().enumerate() {
        out.push_str(&line(&i.to_string(), s));
    }
    out.push_str(&line("pooled", &report.pooled));
    out.push_str(&format!(
        "{:<10} {:>5} {:>5} {:>5} {:>9.3} {:>7.3} {:>7.3}\n",
        "mean", "", "", "", report.mean_precision, report.mean_recall, report.mean_f1
    ));
    out
}
