//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::network::Params;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates mirroring the parameter tensors, plus the
/// step counter used for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_params(params: &Params<T>) -> Self {
        let zeros: Vec<Tensor<T>> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape().clone()))
            .collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update:
    /// `t += 1; m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;`
    /// `theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)`.
    pub fn apply(&mut self, params: &mut Params<T>, grads: &[Tensor<T>], lr: T) -> Result<()> {
        if grads.len() != self.m.len() || params.tensors().len() != self.m.len() {
            return Err(Error::LengthMismatch {
                left: params.tensors().len(),
                right: grads.len(),
            });
        }
        self.step += 1;
        let beta1 = T::from_f64(BETA1);
        let beta2 = T::from_f64(BETA2);
        let eps = T::from_f64(EPSILON);
        let one = T::ONE;
        let bc1 = one - beta1.powi(self.step as i32);
        let bc2 = one - beta2.powi(self.step as i32);
        for ((theta, grad), (m, v)) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if theta.shape() != grad.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    left: theta.dims().to_vec(),
                    right: grad.dims().to_vec(),
                });
            }
            let t_data = theta.data_mut();
            let m_data = m.data_mut();
            let v_data = v.data_mut();
            for i in 0..t_data.len() {
                let g = grad.data()[i];
                m_data[i] = beta1 * m_data[i] + (one - beta1) * g;
                v_data[i] = beta2 * v_data[i] + (one - beta2) * g * g;
                let m_hat = m_data[i] / bc1;
                let v_hat = v_data[i] / bc2;
                t_data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
