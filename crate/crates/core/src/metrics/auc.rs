use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Pair counts behind the Mann–Whitney statistic. The AUC is
/// `(2·greater + ties) / (2·positives·negatives)`, kept as integers so it can
/// be compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AucCounts {
    pub greater: u128,
    pub ties: u128,
    pub positives: u64,
    pub negatives: u64,
}

impl AucCounts {
    pub fn numerator(&self) -> u128 {
        2 * self.greater + self.ties
    }

    pub fn denominator(&self) -> u128 {
        2 * self.positives as u128 * self.negatives as u128
    }

    pub fn value(&self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }
}

pub fn auc_counts(scores: &[f64], labels: &[bool]) -> Result<AucCounts, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::Shape("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricsError::NonFiniteInput("scores".into()));
    }
    let positives = labels.iter().filter(|l| **l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::OneClassOnly);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut greater, mut ties, mut neg_below) = (0u128, 0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut p, mut q) = (0u128, 0u128);
        let mut j = i;
        while j < order.len() && scores[order[j]] == s {
            if labels[order[j]] {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        greater += p * neg_below;
        ties += p * q;
        neg_below += q;
        i = j;
    }
    Ok(AucCounts { greater, ties, positives, negatives })
}

/// Area under the ROC curve, P(score⁺ > score⁻) + ½·P(tie).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    auc_counts(scores, labels).map(|c| c.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[false, true, false, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(auc(&[1.0, 2.0], &[true, false]).unwrap(), 0.0);
        assert_eq!(auc(&[1.0, 2.0], &[true, true]), Err(MetricsError::OneClassOnly));
    }
}
