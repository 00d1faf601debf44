use super::{bce_loss, OptimError};
use crate::tensor::{Element, Tensor};

/// Confusion counts with the positive class = adulterated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub loss: f64,
}

impl MetricsReport {
    /// Derives the ratios from counts. Precision (recall) is 0 when no
    /// positives were predicted (present).
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64, loss: f64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self {
            tp,
            tn,
            fp,
            fn_,
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            loss,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Thresholds `predictions` (>= threshold is positive) against 0/1 `labels`;
/// `loss` is the mean BCE of the same predictions.
pub fn compute_metrics<T: Element>(predictions: &[T], labels: &[T], threshold: f64) -> Result<MetricsReport, OptimError> {
    if predictions.is_empty() {
        return Err(OptimError::Empty);
    }
    let p = Tensor::new(&[predictions.len()], predictions.to_vec()).expect("non-empty");
    let (loss, _) = bce_loss(&p, labels)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&pred, &y) in predictions.iter().zip(labels) {
        match (pred.as_f64() >= threshold, y.as_f64() == 1.0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, tn, fp, fn_, loss))
}
