//! Open-set metrics. Labels are 1-based in `1..=K+1`, `K+1` meaning unknown.

use crate::error::{Error, Result};

/// Correct and total counts per class, index `k-1` for class `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
}

pub fn class_counts(truth: &[usize], predicted: &[usize], known: usize) -> Result<ClassCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::Metric(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let classes = known + 1;
    let mut counts = ClassCounts {
        correct: vec![0; classes],
        total: vec![0; classes],
    };
    for (&t, &p) in truth.iter().zip(predicted) {
        for l in [t, p] {
            if l == 0 || l > classes {
                return Err(Error::InvalidLabel {
                    label: l,
                    reason: format!("expected a class in 1..={classes}"),
                });
            }
        }
        counts.total[t - 1] += 1;
        if t == p {
            counts.correct[t - 1] += 1;
        }
    }
    Ok(counts)
}

fn class_accuracy(counts: &ClassCounts, class: usize) -> Result<f64> {
    match counts.total[class - 1] {
        0 => Err(Error::Metric(format!("class {class} has no instances"))),
        n => Ok(counts.correct[class - 1] as f64 / n as f64),
    }
}

/// Per-class accuracy for classes `1..=K+1`; `None` for absent classes.
pub fn per_class_accuracy(truth: &[usize], predicted: &[usize], known: usize) -> Result<Vec<Option<f64>>> {
    let counts = class_counts(truth, predicted, known)?;
    Ok((1..=known + 1)
        .map(|k| class_accuracy(&counts, k).ok())
        .collect())
}

/// Mean per-class accuracy over the `K` known classes.
pub fn metric_os_star(truth: &[usize], predicted: &[usize], known: usize) -> Result<f64> {
    let counts = class_counts(truth, predicted, known)?;
    let mut sum = 0.0;
    for k in 1..=known {
        sum += class_accuracy(&counts, k)?;
    }
    Ok(sum / known as f64)
}

/// Mean per-class accuracy over all `K+1` classes.
pub fn metric_os(truth: &[usize], predicted: &[usize], known: usize) -> Result<f64> {
    let counts = class_counts(truth, predicted, known)?;
    let mut sum = 0.0;
    for k in 1..=known + 1 {
        sum += class_accuracy(&counts, k)?;
    }
    Ok(sum / (known + 1) as f64)
}

/// Instance-level accuracy on known and on unknown nodes.
pub fn side_accuracies(truth: &[usize], predicted: &[usize], known: usize) -> Result<(f64, f64)> {
    let counts = class_counts(truth, predicted, known)?;
    let known_total: usize = counts.total[..known].iter().sum();
    let known_correct: usize = counts.correct[..known].iter().sum();
    let unknown_total = counts.total[known];
    if known_total == 0 || unknown_total == 0 {
        return Err(Error::Metric(
            "need both known and unknown instances".into(),
        ));
    }
    Ok((
        known_correct as f64 / known_total as f64,
        counts.correct[known] as f64 / unknown_total as f64,
    ))
}

/// Harmonic mean of known and unknown instance accuracy; 0 when both are 0.
pub fn metric_hs(truth: &[usize], predicted: &[usize], known: usize) -> Result<f64> {
    let (a_kn, a_un) = side_accuracies(truth, predicted, known)?;
    Ok(harmonic(a_kn, a_un))
}

pub(crate) fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from midranks in `O(n log n)`.
pub fn metric_auc(scores: &[f64], is_positive: &[bool]) -> Result<f64> {
    if scores.len() != is_positive.len() {
        return Err(Error::Metric("scores and flags differ in length".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("auc scores"));
    }
    let pos = is_positive.iter().filter(|&&p| p).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric("AUC needs both positives and negatives".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their mean.
        let midrank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| is_positive[i]).count();
        rank_sum += midrank * tied_pos as f64;
        start = end;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}
