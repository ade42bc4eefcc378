//! Inverted dropout and the analytic expected-response diagnostic.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::Mode;

/// Dropout with zeroing probability `rate` in `[0, 1)`. Inverted scaling:
/// survivors are multiplied by `1 / (1 - rate)` at train time, so eval mode
/// is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutLayer {
    pub rate: f32,
}

impl DropoutLayer {
    pub fn new(rate: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidDropoutRate(rate as f64));
        }
        Ok(DropoutLayer { rate })
    }

    fn keep_scale<T: Scalar>(&self) -> T {
        T::from_f64(1.0 / (1.0 - self.rate as f64))
    }
}

/// Returns `(output, mask)`. The mask holds 1 for surviving units and 0 for
/// zeroed ones; draws consume the RNG in flat-index order.
pub fn dropout_forward<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    layer: &DropoutLayer,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, Tensor<T>)> {
    match mode {
        Mode::Eval => Ok((
            input.clone(),
            Tensor::filled(input.shape().clone(), T::ONE),
        )),
        Mode::Train => {
            let rate = layer.rate as f64;
            let scale = layer.keep_scale::<T>();
            let mut out = Vec::with_capacity(input.len());
            let mut mask = Vec::with_capacity(input.len());
            for &x in input.data() {
                if rng.random::<f64>() < rate {
                    out.push(T::ZERO);
                    mask.push(T::ZERO);
                } else {
                    out.push(x * scale);
                    mask.push(T::ONE);
                }
            }
            Ok((
                Tensor::from_vec(input.shape().clone(), out)?,
                Tensor::from_vec(input.shape().clone(), mask)?,
            ))
        }
    }
}

/// `grad[i] = upstream[i] * mask[i] / (1 - rate)`.
pub fn dropout_backward<T: Scalar>(
    mask: &Tensor<T>,
    layer: &DropoutLayer,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>> {
    if mask.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch {
            op: "dropout_backward",
            left: mask.dims().to_vec(),
            right: upstream.dims().to_vec(),
        });
    }
    let scale = layer.keep_scale::<T>();
    upstream.mul(mask).map(|g| g.scale(scale))
}

/// Expected response of a dropout-masked linear unit:
/// `E_R = 1/2 (sum_i p_i w_i I_i)^2 + sum_i p_i (1 - p_i) w_i^2 I_i^2`,
/// with `p_i` the retention probability of input `i`.
///
/// The two terms are the squared mean and the variance of
/// `R = sum_i d_i w_i I_i` with `d_i ~ Bernoulli(p_i)`; the Monte-Carlo
/// verification suite checks both components against simulation.
pub fn expected_dropout_response(retain: &[f64], weights: &[f64], inputs: &[f64]) -> Result<f64> {
    if retain.len() != weights.len() || weights.len() != inputs.len() {
        return Err(Error::LengthMismatch {
            left: retain.len(),
            right: if retain.len() != weights.len() {
                weights.len()
            } else {
                inputs.len()
            },
        });
    }
    for &p in retain {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
    }
    let mean: f64 = retain
        .iter()
        .zip(weights)
        .zip(inputs)
        .map(|((&p, &w), &i)| p * w * i)
        .sum();
    let variance: f64 = retain
        .iter()
        .zip(weights)
        .zip(inputs)
        .map(|((&p, &w), &i)| p * (1.0 - p) * w * w * i * i)
        .sum();
    Ok(0.5 * mean * mean + variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_train_is_identity() {
        let layer = DropoutLayer::new(0.0).unwrap();
        let input = Tensor::from_dims(vec![4], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, mask) = dropout_forward(&input, &layer, Mode::Train, &mut rng).unwrap();
        assert_eq!(out, input);
        assert!(mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn eval_mode_is_identity_for_any_rate() {
        let layer = DropoutLayer::new(0.75).unwrap();
        let input = Tensor::from_dims(vec![3], vec![0.5, 0.25, -1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, mask) = dropout_forward(&input, &layer, Mode::Eval, &mut rng).unwrap();
        assert_eq!(out, input);
        assert!(mask.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn rate_one_rejected() {
        assert!(matches!(
            DropoutLayer::new(1.0),
            Err(Error::InvalidDropoutRate(_))
        ));
        assert!(DropoutLayer::new(-0.1).is_err());
    }

    #[test]
    fn train_mode_preserves_expectation() {
        // 1e6 scalar trials at r = 0.5: the sample mean of the inverted-
        // dropout output matches the input within 3 standard errors (and
        // comfortably within the 1% band).
        let layer = DropoutLayer::new(0.5).unwrap();
        let input = Tensor::from_dims(vec![1], vec![3.0f64]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let (out, _) = dropout_forward(&input, &layer, Mode::Train, &mut rng).unwrap();
            sum += out.data()[0];
            sum_sq += out.data()[0] * out.data()[0];
        }
        let mean = sum / trials as f64;
        let var = sum_sq / trials as f64 - mean * mean;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 3.0).abs() <= 3.0 * se, "mean {mean}, 3 SE {}", 3.0 * se);
        assert!((mean - 3.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn backward_identity_when_mask_all_ones() {
        let layer = DropoutLayer::new(0.0).unwrap();
        let mask = Tensor::<f64>::new(vec![3], 1.0).unwrap();
        let up = Tensor::from_dims(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(dropout_backward(&mask, &layer, &up).unwrap(), up);
    }

    #[test]
    fn backward_zero_mask_blocks_everything() {
        let layer = DropoutLayer::new(0.5).unwrap();
        let mask = Tensor::<f64>::zeros(crate::tensor::Shape::new(vec![3]).unwrap());
        let up = Tensor::from_dims(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let g = dropout_backward(&mask, &layer, &up).unwrap();
        assert!(g.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn expected_response_always_retained() {
        // variance term vanishes at p = 1
        assert_eq!(
            expected_dropout_response(&[1.0], &[2.0], &[3.0]).unwrap(),
            18.0
        );
    }

    #[test]
    fn expected_response_half_retention() {
        let e = expected_dropout_response(&[0.5], &[2.0], &[3.0]).unwrap();
        assert!((e - 13.5).abs() < 1e-12);
    }

    #[test]
    fn expected_response_reduces_to_squared_sum_at_full_retention() {
        let w = [0.5, -1.5, 2.0];
        let i = [1.0, 0.25, -0.75];
        let dot: f64 = w.iter().zip(&i).map(|(a, b)| a * b).sum();
        let e = expected_dropout_response(&[1.0, 1.0, 1.0], &w, &i).unwrap();
        assert_eq!(e, 0.5 * dot * dot);
    }

    #[test]
    fn expected_response_length_mismatch() {
        assert!(matches!(
            expected_dropout_response(&[0.5, 0.5], &[1.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn expected_response_bad_probability() {
        assert!(matches!(
            expected_dropout_response(&[1.5], &[1.0], &[1.0]),
            Err(Error::InvalidProbability(_))
        ));
    }
}
