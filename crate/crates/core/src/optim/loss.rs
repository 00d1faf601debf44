use super::OptimError;
use crate::tensor::{Element, Tensor};

/// Predictions are clamped to `[CLAMP, 1 - CLAMP]` before the logarithms.
pub const CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient w.r.t. the predictions.
///
/// The gradient is `(p - y) / (p (1 - p)) / N` evaluated on the clamped `p`.
pub fn bce_loss<T: Element>(predictions: &Tensor<T>, labels: &[T]) -> Result<(f64, Tensor<T>), OptimError> {
    if predictions.len() != labels.len() {
        return Err(OptimError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (i, (&p, &y)) in predictions.data().iter().zip(labels).enumerate() {
        let y = y.as_f64();
        if y != 0.0 && y != 1.0 {
            return Err(OptimError::InvalidLabel { index: i, value: y });
        }
        let p = p.as_f64().clamp(CLAMP, 1.0 - CLAMP);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.push(T::from_f64((p - y) / (p * (1.0 - p)) / n));
    }
    let grad = Tensor::new(predictions.shape(), grad).expect("same shape as predictions");
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_is_ln2_for_either_label() {
        let p = Tensor::new(&[2, 1], vec![0.5f64, 0.5]).unwrap();
        let (loss, _) = bce_loss(&p, &[0.0, 1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn confident_and_correct_is_near_zero() {
        let p = Tensor::new(&[1], vec![1.0f64]).unwrap();
        let (loss, _) = bce_loss(&p, &[1.0]).unwrap();
        assert!(loss > 0.0 && (loss - 1e-7).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn rejects_non_binary_labels() {
        let p = Tensor::new(&[2], vec![0.3f64, 0.4]).unwrap();
        assert_eq!(
            bce_loss(&p, &[1.0, 0.5]).unwrap_err(),
            OptimError::InvalidLabel { index: 1, value: 0.5 }
        );
        assert!(bce_loss(&p, &[1.0]).is_err());
    }
}
