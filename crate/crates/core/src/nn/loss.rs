use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const PROB_FLOOR: f64 = 1e-12;

/// Categorical cross-entropy `-ln p[label]` for one probability vector,
/// with the probability clamped below at `1e-12`.
pub fn cross_entropy<T: Scalar>(probs: &[T], label: usize) -> Result<T> {
    if label >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let sum: f64 = probs.iter().map(|p| p.as_f64()).sum();
    if (sum - 1.0).abs() > 1e-4 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(-probs[label].max(T::lit(PROB_FLOOR)).ln())
}

/// Batch-mean cross-entropy of `N×K` probabilities, plus the gradient of
/// that mean with respect to the pre-softmax logits, scaled by `weight`.
pub fn softmax_cross_entropy_grad<T: Scalar>(
    probs: &Tensor<T>,
    labels: &[usize],
    weight: T,
) -> Result<(T, Tensor<T>)> {
    let [n, k] = *probs.shape() else {
        return Err(Error::shape("cross_entropy", format!("expected N×K, got {:?}", probs.shape())));
    };
    if labels.len() != n {
        return Err(Error::shape("cross_entropy", format!("{} labels for batch of {n}", labels.len())));
    }
    let nf = T::from_count(n);
    let mut loss = T::zero();
    let mut grad = probs.data().to_vec();
    for (i, &label) in labels.iter().enumerate() {
        let row = &probs.data()[i * k..(i + 1) * k];
        loss += cross_entropy(row, label)?;
        grad[i * k + label] -= T::one();
    }
    let scale = weight / nf;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss / nf, Tensor::new(vec![n, k], grad)?))
}
