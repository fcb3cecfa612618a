//! Classification scores.

use crate::error::{invalid, Error, Result};

/// Area under the ROC curve for binary labels, from the rank-sum statistic.
/// Tied scores share their average rank.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: positive.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("NaN score"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(invalid("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&r| positive[r]).count() as f64 * avg;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Mean per-class recall over the classes present in `labels`.
pub fn balanced_accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: predicted.len() });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for (&p, &y) in predicted.iter().zip(labels) {
        totals[y] += 1;
        hits[y] += usize::from(p == y);
    }
    let recalls: Vec<f64> =
        totals.iter().zip(&hits).filter(|(&t, _)| t > 0).map(|(&t, &h)| h as f64 / t as f64).collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}
