//! Top-1 accuracy and mean average precision.

use crate::error::{Error, Result};

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn top1_accuracy(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} score rows for {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("top-1 of an empty set".into()));
    }
    let hits = scores.iter().zip(labels).filter(|(row, &l)| argmax(row) == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Average precision of one class: items sorted by descending score (stable
/// by index), mean of precision@k over the ranks k of positives. `None` when
/// the class has no positives.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// Macro mean of per-class AP over classes with at least one positive.
pub fn mean_average_precision(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} score rows for {} label rows", scores.len(), labels.len())));
    }
    let classes = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|r| r.len() != classes) || labels.iter().any(|r| r.len() != classes) {
        return Err(Error::Shape("ragged score or label matrix".into()));
    }
    let aps: Vec<f64> = (0..classes)
        .filter_map(|c| {
            let col: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let pos: Vec<bool> = labels.iter().map(|r| r[c]).collect();
            average_precision(&col, &pos)
        })
        .collect();
    if aps.is_empty() {
        return Ok(0.0);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
