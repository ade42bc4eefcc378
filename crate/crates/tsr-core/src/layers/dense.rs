//! Fully connected layer and its adjoint.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Dense parameters: `weights` has shape `[out, in]`, `bias` `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weights.shape().rank() != 2 {
            return Err(Error::RankMismatch {
                op: "dense weights",
                expected: 2,
                dims: weights.dims().to_vec(),
            });
        }
        if bias.shape().rank() != 1 || bias.dims()[0] != weights.dims()[0] {
            return Err(Error::ShapeMismatch {
                op: "dense bias",
                left: bias.dims().to_vec(),
                right: vec![weights.dims()[0]],
            });
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn out_features(&self) -> usize {
        self.weights.dims()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weights.dims()[1]
    }
}

/// `z[j] = (sum_l w[j, l] * a[l]) + b[j]`, summed over `l` ascending and the
/// bias added last, as the formula reads.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, layer: &DenseLayer<T>) -> Result<Tensor<T>> {
    check_input(input, layer)?;
    let (out, inn) = (layer.out_features(), layer.in_features());
    let w = layer.weights.data();
    let a = input.data();
    let mut z = vec![T::ZERO; out];
    for j in 0..out {
        let mut acc = T::ZERO;
        let row = &w[j * inn..(j + 1) * inn];
        for l in 0..inn {
            acc += row[l] * a[l];
        }
        z[j] = acc + layer.bias.data()[j];
    }
    let result = Tensor::from_vec(Shape::new(vec![out])?, z)?;
    result.debug_check_finite("dense_forward");
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradients<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `grad_b = upstream`, `grad_w[j, l] = upstream[j] * a[l]`,
/// `grad_a[l] = sum_j w[j, l] * upstream[j]`.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &DenseLayer<T>,
    upstream: &Tensor<T>,
) -> Result<DenseGradients<T>> {
    check_input(input, layer)?;
    let (out, inn) = (layer.out_features(), layer.in_features());
    if upstream.shape().rank() != 1 || upstream.dims()[0] != out {
        return Err(Error::ShapeMismatch {
            op: "dense_backward",
            left: upstream.dims().to_vec(),
            right: vec![out],
        });
    }
    let w = layer.weights.data();
    let a = input.data();
    let up = upstream.data();
    let mut g_w = vec![T::ZERO; out * inn];
    let mut g_a = vec![T::ZERO; inn];
    for j in 0..out {
        let g = up[j];
        for l in 0..inn {
            g_w[j * inn + l] = g * a[l];
            g_a[l] += w[j * inn + l] * g;
        }
    }
    Ok(DenseGradients {
        input: Tensor::from_vec(input.shape().clone(), g_a)?,
        weights: Tensor::from_vec(layer.weights.shape().clone(), g_w)?,
        bias: upstream.clone(),
    })
}

fn check_input<T: Scalar>(input: &Tensor<T>, layer: &DenseLayer<T>) -> Result<()> {
    if input.shape().rank() != 1 {
        return Err(Error::RankMismatch {
            op: "dense",
            expected: 1,
            dims: input.dims().to_vec(),
        });
    }
    if input.dims()[0] != layer.in_features() {
        return Err(Error::ShapeMismatch {
            op: "dense",
            left: input.dims().to_vec(),
            right: vec![layer.in_features()],
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[f64], out: usize, inn: usize, b: &[f64]) -> DenseLayer<f64> {
        DenseLayer::new(
            Tensor::from_dims(vec![out, inn], w.to_vec()).unwrap(),
            Tensor::from_dims(vec![out], b.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bias_only() {
        let l = layer(&[0.0, 0.0, 0.0, 0.0], 2, 2, &[1.0, 2.0]);
        let a = Tensor::from_dims(vec![2], vec![5.0, -3.0]).unwrap();
        assert_eq!(dense_forward(&a, &l).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn hand_evaluated() {
        let l = layer(&[1.0, 2.0, 3.0, 4.0], 2, 2, &[0.0, 1.0]);
        let a = Tensor::from_dims(vec![2], vec![1.0, 1.0]).unwrap();
        assert_eq!(dense_forward(&a, &l).unwrap().data(), &[3.0, 8.0]);
    }

    #[test]
    fn identity_weights() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.0, 0.0]);
        let a = Tensor::from_dims(vec![2], vec![4.0, 9.0]).unwrap();
        assert_eq!(dense_forward(&a, &l).unwrap().data(), a.data());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let l = layer(&[1.0, 2.0], 1, 2, &[0.0]);
        let a = Tensor::from_dims(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(dense_forward(&a, &l).is_err());
    }

    #[test]
    fn backward_zero_upstream() {
        let l = layer(&[1.0, 2.0, 3.0, 4.0], 2, 2, &[0.0, 0.0]);
        let a = Tensor::from_dims(vec![2], vec![1.0, 1.0]).unwrap();
        let up = Tensor::zeros(Shape::new(vec![2]).unwrap());
        let g = dense_backward(&a, &l, &up).unwrap();
        assert!(g.input.data().iter().all(|&x| x == 0.0));
        assert!(g.weights.data().iter().all(|&x| x == 0.0));
        assert!(g.bias.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_weights_pass_upstream_back() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[0.0, 0.0]);
        let a = Tensor::from_dims(vec![2], vec![1.0, 1.0]).unwrap();
        let up = Tensor::from_dims(vec![2], vec![3.0, -2.0]).unwrap();
        let g = dense_backward(&a, &l, &up).unwrap();
        assert_eq!(g.input.data(), up.data());
        assert_eq!(g.bias.data(), up.data());
    }
}
