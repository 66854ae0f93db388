use super::{EvalReport, FoldResult};
use crate::error::{Error, Result};

/// Accuracy of predicting "same" exactly when `score ≥ threshold`.
pub fn thresholded_accuracy(scores: &[(f64, bool)], threshold: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let correct = scores.iter().filter(|(s, same)| (*s >= threshold) == *same).count();
    correct as f64 / scores.len() as f64
}

/// Threshold with the highest accuracy on `scores`, the smallest such on
/// ties. Candidates are `−∞` (accept all), the midpoint between every two
/// adjacent distinct scores, and `+∞` (reject all); every other threshold
/// makes the same predictions as one of these.
fn best_threshold(scores: &[(f64, bool)]) -> f64 {
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_pos = sorted.iter().filter(|s| s.1).count();

    // sweep upward; at threshold t everything strictly below t is "different"
    let mut best = (total_pos, f64::NEG_INFINITY);
    let (mut neg_below, mut pos_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
        let t = match sorted.get(i) {
            Some(next) => 0.5 * (score + next.0),
            None => f64::INFINITY,
        };
        let correct = neg_below + total_pos - pos_below;
        if correct > best.0 {
            best = (correct, t);
        }
    }
    best.1
}

/// Contiguous k-fold threshold transfer: each fold is scored with the
/// threshold that is best on the other `k − 1` folds. Reports the mean
/// per-fold accuracy.
pub fn kfold_accuracy(scores: &[(f64, bool)], folds: usize) -> Result<EvalReport> {
    if folds < 2 {
        return Err(Error::Protocol(format!("need at least 2 folds, got {folds}")));
    }
    let pos = scores.iter().filter(|s| s.1).count();
    if pos == 0 || pos == scores.len() {
        return Err(Error::Protocol("need both same and different pairs".into()));
    }
    if scores.len() < folds {
        return Err(Error::Protocol(format!(
            "{} pairs cannot fill {folds} folds: empty fold",
            scores.len()
        )));
    }
    let n = scores.len();
    let bounds: Vec<usize> = (0..=folds).map(|i| i * n / folds).collect();

    let mut results = Vec::with_capacity(folds);
    for f in 0..folds {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let rest: Vec<(f64, bool)> = scores[..lo].iter().chain(&scores[hi..]).copied().collect();
        let threshold = best_threshold(&rest);
        results.push(FoldResult {
            threshold,
            accuracy: thresholded_accuracy(&scores[lo..hi], threshold),
            size: hi - lo,
        });
    }

    let mean = results.iter().map(|r| r.accuracy).sum::<f64>() / folds as f64;
    let mut report = EvalReport::new("kfold");
    report.metrics.insert("accuracy".into(), mean);
    report.counts.insert("pairs".into(), n);
    report.counts.insert("folds".into(), folds);
    report.counts.insert("positive".into(), pos);
    report.counts.insert("negative".into(), n - pos);
    report.folds = results;
    Ok(report)
}
