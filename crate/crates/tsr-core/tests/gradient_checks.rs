//! Finite-difference gradient checks, run in f64 so central differences at
//! h = 1e-5 resolve far below the acceptance tolerance.
//!
//! Scalar objective for layer checks: J = sum(upstream * forward(input)),
//! whose gradient with respect to any argument the backward op must match.
//! Error metric: |analytic - numeric| / max(1, |analytic|, |numeric|), the
//! unit-floored normalization that behaves relatively for large gradients
//! and absolutely near zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsr_core::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, maxpool_backward, maxpool_forward, relu, relu_backward, softmax, ConvLayer,
    DenseLayer, DropoutLayer, Mode, PoolSpec,
};
use tsr_core::network::{network_backward, network_forward, LayerSpec, NetworkSpec, Params};
use tsr_core::train::{cross_entropy_loss, softmax_xent_gradient};
use tsr_core::{Shape, Tensor};

const H: f64 = 1e-5;
const LAYER_TOL: f64 = 1e-6;
const NETWORK_TOL: f64 = 1e-5;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

fn rand_tensor(rng: &mut ChaCha8Rng, dims: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = dims.iter().product();
    Tensor::from_dims(dims.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn weighted_sum(out: &Tensor<f64>, upstream: &Tensor<f64>) -> f64 {
    out.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum()
}

/// Central finite difference of `f` with respect to entry `i` of `base`.
fn central_diff(base: &Tensor<f64>, i: usize, mut f: impl FnMut(&Tensor<f64>) -> f64) -> f64 {
    let mut plus = base.clone();
    plus.data_mut()[i] += H;
    let mut minus = base.clone();
    minus.data_mut()[i] -= H;
    (f(&plus) - f(&minus)) / (2.0 * H)
}

fn assert_grad_matches(
    analytic: &Tensor<f64>,
    base: &Tensor<f64>,
    tol: f64,
    what: &str,
    f: impl FnMut(&Tensor<f64>) -> f64 + Copy,
) {
    for i in 0..base.len() {
        let numeric = central_diff(base, i, f);
        let err = rel_err(analytic.data()[i], numeric);
        assert!(
            err <= tol,
            "{what}[{i}]: analytic {} vs numeric {numeric}, err {err}",
            analytic.data()[i]
        );
    }
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let input = rand_tensor(&mut rng, &[6, 6, 2], -1.0, 1.0);
    let layer = ConvLayer::new(
        rand_tensor(&mut rng, &[3, 2, 3, 3], -0.7, 0.7),
        rand_tensor(&mut rng, &[3], -0.3, 0.3),
    )
    .unwrap();
    let out = conv2d_forward(&input, &layer).unwrap();
    let upstream = rand_tensor(&mut rng, out.dims(), -1.0, 1.0);
    let grads = conv2d_backward(&input, &layer, &upstream).unwrap();

    assert_grad_matches(&grads.input, &input, LAYER_TOL, "conv grad_input", |x| {
        weighted_sum(&conv2d_forward(x, &layer).unwrap(), &upstream)
    });
    assert_grad_matches(&grads.kernels, &layer.kernels, LAYER_TOL, "conv grad_kernels", |k| {
        let l = ConvLayer::new(k.clone(), layer.bias.clone()).unwrap();
        weighted_sum(&conv2d_forward(&input, &l).unwrap(), &upstream)
    });
    assert_grad_matches(&grads.bias, &layer.bias, LAYER_TOL, "conv grad_bias", |b| {
        let l = ConvLayer::new(layer.kernels.clone(), b.clone()).unwrap();
        weighted_sum(&conv2d_forward(&input, &l).unwrap(), &upstream)
    });
}

#[test]
fn maxpool_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    // continuous draws make window ties measure-zero
    let input = rand_tensor(&mut rng, &[6, 6, 2], -1.0, 1.0);
    let spec = PoolSpec::new(2, 2, 0).unwrap();
    let (out, map) = maxpool_forward(&input, &spec).unwrap();
    let upstream = rand_tensor(&mut rng, out.dims(), -1.0, 1.0);
    let grad = maxpool_backward(&map, &upstream).unwrap();

    assert_grad_matches(&grad, &input, LAYER_TOL, "maxpool grad_input", |x| {
        let (o, _) = maxpool_forward(x, &spec).unwrap();
        weighted_sum(&o, &upstream)
    });
}

#[test]
fn dense_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let input = rand_tensor(&mut rng, &[8], -1.0, 1.0);
    let layer = DenseLayer::new(
        rand_tensor(&mut rng, &[5, 8], -0.8, 0.8),
        rand_tensor(&mut rng, &[5], -0.3, 0.3),
    )
    .unwrap();
    let out = dense_forward(&input, &layer).unwrap();
    let upstream = rand_tensor(&mut rng, out.dims(), -1.0, 1.0);
    let grads = dense_backward(&input, &layer, &upstream).unwrap();

    assert_grad_matches(&grads.input, &input, LAYER_TOL, "dense grad_input", |a| {
        weighted_sum(&dense_forward(a, &layer).unwrap(), &upstream)
    });
    assert_grad_matches(&grads.weights, &layer.weights, LAYER_TOL, "dense grad_weights", |w| {
        let l = DenseLayer::new(w.clone(), layer.bias.clone()).unwrap();
        weighted_sum(&dense_forward(&input, &l).unwrap(), &upstream)
    });
    assert_grad_matches(&grads.bias, &layer.bias, LAYER_TOL, "dense grad_bias", |b| {
        let l = DenseLayer::new(layer.weights.clone(), b.clone()).unwrap();
        weighted_sum(&dense_forward(&input, &l).unwrap(), &upstream)
    });
}

#[test]
fn relu_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    // keep inputs away from the kink at zero
    let data: Vec<f64> = (0..12)
        .map(|_| {
            let x: f64 = rng.random_range(0.05..1.0);
            if rng.random::<bool>() {
                x
            } else {
                -x
            }
        })
        .collect();
    let input = Tensor::from_dims(vec![12], data).unwrap();
    let upstream = rand_tensor(&mut rng, &[12], -1.0, 1.0);
    let grad = relu_backward(&input, &upstream).unwrap();

    assert_grad_matches(&grad, &input, LAYER_TOL, "relu grad", |x| {
        weighted_sum(&relu(x), &upstream)
    });
}

#[test]
fn dropout_gradient_matches_fixed_mask_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let input = rand_tensor(&mut rng, &[10], -1.0, 1.0);
    let layer = DropoutLayer::new(0.4).unwrap();
    // freeze the mask by reseeding identically before every forward call
    let forward_with_frozen_mask = |x: &Tensor<f64>| -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(999);
        dropout_forward(x, &layer, Mode::Train, &mut rng).unwrap().0
    };
    let mut mask_rng = ChaCha8Rng::seed_from_u64(999);
    let (_, mask) = dropout_forward(&input, &layer, Mode::Train, &mut mask_rng).unwrap();
    let upstream = rand_tensor(&mut rng, &[10], -1.0, 1.0);
    let grad = dropout_backward(&mask, &layer, &upstream).unwrap();

    assert_grad_matches(&grad, &input, LAYER_TOL, "dropout grad", |x| {
        weighted_sum(&forward_with_frozen_mask(x), &upstream)
    });
}

#[test]
fn softmax_xent_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let logits = rand_tensor(&mut rng, &[9], -2.0, 2.0);
    let mut target = Tensor::zeros(Shape::new(vec![9]).unwrap());
    target.data_mut()[4] = 1.0;
    let probs = softmax(&logits).unwrap();
    let grad = softmax_xent_gradient(&probs, &target).unwrap();

    assert_grad_matches(&grad, &logits, LAYER_TOL, "softmax+xent grad", |z| {
        cross_entropy_loss(&softmax(z).unwrap(), &target).unwrap()
    });
}

/// Reduced all-layer-type clone of the production architecture over a
/// 6x6x3 input.
fn reduced_spec() -> NetworkSpec {
    use LayerSpec::*;
    NetworkSpec::new(
        Shape::new(vec![6, 6, 3]).unwrap(),
        vec![
            Conv { out_channels: 4, kernel: 2 },
            Relu,
            Conv { out_channels: 4, kernel: 2 },
            Relu,
            MaxPool { size: 2, stride: 2 },
            Dropout { rate: 0.25 },
            Conv { out_channels: 6, kernel: 2 },
            Relu,
            Flatten,
            Dense { units: 8 },
            Relu,
            Dropout { rate: 0.5 },
            Dense { units: 5 },
            Softmax,
        ],
    )
    .unwrap()
}

#[test]
fn whole_network_gradients_match_finite_differences() {
    let spec = reduced_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let params = Params::<f64>::init(&spec, &mut rng);
    let input = rand_tensor(&mut rng, &[6, 6, 3], 0.0, 1.0);
    let mut target = Tensor::zeros(Shape::new(vec![5]).unwrap());
    target.data_mut()[2] = 1.0;

    // dropout masks are frozen by reseeding the same stream per call
    let loss_of = |params: &Params<f64>| -> f64 {
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(777);
        let (probs, _) =
            network_forward(&spec, params, &input, Mode::Train, Some(&mut dropout_rng)).unwrap();
        cross_entropy_loss(&probs, &target).unwrap()
    };

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(777);
    let (probs, cache) =
        network_forward(&spec, &params, &input, Mode::Train, Some(&mut dropout_rng)).unwrap();
    let grad_logits = softmax_xent_gradient(&probs, &target).unwrap();
    let grads = network_backward(&spec, &params, &cache, &grad_logits).unwrap();
    assert_eq!(grads.len(), params.tensors().len());

    let mut checked = 0usize;
    let mut max_err = 0.0f64;
    for (t_idx, tensor) in params.tensors().iter().enumerate() {
        for i in 0..tensor.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[t_idx].data_mut()[i] += H;
            let mut minus = params.clone();
            minus.tensors_mut()[t_idx].data_mut()[i] -= H;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * H);
            let analytic = grads[t_idx].data()[i];
            let err = rel_err(analytic, numeric);
            max_err = max_err.max(err);
            assert!(
                err <= NETWORK_TOL,
                "param {t_idx}[{i}]: analytic {analytic} vs numeric {numeric}, err {err}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, spec.parameter_count());
    eprintln!("whole-network check: {checked} parameters, max err {max_err:.3e}");
}
