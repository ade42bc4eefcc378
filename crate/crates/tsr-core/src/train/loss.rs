//! Categorical cross-entropy and the combined softmax adjoint.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Floor applied inside the log so a confidently wrong 32-bit prediction
/// (probability rounded to 0) cannot produce infinity.
pub const LOG_CLAMP: f64 = 1e-12;

fn check_pair<T: Scalar>(probs: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if probs.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            left: probs.dims().to_vec(),
            right: target.dims().to_vec(),
        });
    }
    if probs.shape().rank() != 1 {
        return Err(Error::RankMismatch {
            op: "cross_entropy",
            expected: 1,
            dims: probs.dims().to_vec(),
        });
    }
    let mut ones = 0usize;
    for &t in target.data() {
        if t == T::ONE {
            ones += 1;
        } else if t != T::ZERO {
            return Err(Error::NotOneHot("entries must be exactly 0 or 1"));
        }
    }
    if ones != 1 {
        return Err(Error::NotOneHot("exactly one entry must be 1"));
    }
    debug_assert!(
        (probs.data().iter().map(|p| p.to_f64()).sum::<f64>() - 1.0).abs() < 1e-3,
        "probabilities must sum to 1"
    );
    Ok(())
}

/// `-sum_c target_c * ln(max(probs_c, 1e-12))`.
pub fn cross_entropy_loss<T: Scalar>(probs: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    check_pair(probs, target)?;
    let clamp = T::from_f64(LOG_CLAMP);
    let mut loss = T::ZERO;
    for (&p, &t) in probs.data().iter().zip(target.data()) {
        if t != T::ZERO {
            loss -= t * p.max(clamp).ln();
        }
    }
    Ok(loss)
}

/// Gradient of the cross-entropy loss with respect to the pre-softmax
/// logits: `probs - target`.
pub fn softmax_xent_gradient<T: Scalar>(
    probs: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<Tensor<T>> {
    check_pair(probs, target)?;
    probs.sub(target)
}
