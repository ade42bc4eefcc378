//! ReLU and numerically safe softmax.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::ZERO { x } else { T::ZERO })
}

/// Subgradient 0 at exactly 0: upstream passes only where the forward input
/// was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch {
            op: "relu_backward",
            left: input.dims().to_vec(),
            right: upstream.dims().to_vec(),
        });
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::ZERO { g } else { T::ZERO })
        .collect();
    Tensor::from_vec(input.shape().clone(), data)
}

/// `out[j] = exp(z[j] - max(z)) / sum_l exp(z[l] - max(z))`.
///
/// The max subtraction keeps `exp` from overflowing; it does not change the
/// result because softmax is shift invariant.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.shape().rank() != 1 {
        return Err(Error::RankMismatch {
            op: "softmax",
            expected: 1,
            dims: logits.dims().to_vec(),
        });
    }
    let mut max = T::neg_infinity();
    for &z in logits.data() {
        max = max.max(z);
    }
    let mut exps: Vec<T> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let mut sum = T::ZERO;
    for &e in &exps {
        sum += e;
    }
    for e in &mut exps {
        *e /= sum;
    }
    let out = Tensor::from_vec(logits.shape().clone(), exps)?;
    out.debug_check_finite("softmax");
    Ok(out)
}
