//! Valid 2D convolution (stride 1, no padding) and its adjoint.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

use super::shape_after;

/// Convolution parameters: `kernels` has shape `[out_c, in_c, f, f]`, `bias`
/// has shape `[out_c]`. Stride is fixed at 1 and padding at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if kernels.shape().rank() != 4 {
            return Err(Error::RankMismatch {
                op: "conv kernels",
                expected: 4,
                dims: kernels.dims().to_vec(),
            });
        }
        if kernels.dims()[2] != kernels.dims()[3] {
            return Err(Error::InvalidShape {
                dims: kernels.dims().to_vec(),
                reason: "conv kernels must be spatially square",
            });
        }
        if bias.shape().rank() != 1 || bias.dims()[0] != kernels.dims()[0] {
            return Err(Error::ShapeMismatch {
                op: "conv bias",
                left: bias.dims().to_vec(),
                right: vec![kernels.dims()[0]],
            });
        }
        Ok(ConvLayer { kernels, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.dims()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.dims()[2]
    }
}

/// `out[x, y, o] = bias[o] + sum_{i, j, k} K[o, k, i, j] * I[x+i, y+j, k]`.
///
/// The accumulator starts at the bias and adds window terms in `(i, j, k)`
/// order, matching a left-to-right reading of the formula; the randomized
/// oracle tests rely on that fixed order for bit-exact agreement.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let (_h, w, c) = input_dims3(input)?;
    let f = layer.kernel_size();
    let (out_c, in_c) = (layer.out_channels(), layer.in_channels());
    if c != in_c {
        return Err(Error::ChannelMismatch {
            input: c,
            kernels: in_c,
        });
    }
    let out_shape = shape_after(input.shape(), f, 1, 0, out_c)?;
    let (oh, ow) = (out_shape.dims()[0], out_shape.dims()[1]);

    let inp = input.data();
    let ker = layer.kernels.data();
    let bias = layer.bias.data();
    let mut out = vec![T::ZERO; oh * ow * out_c];
    for x in 0..oh {
        for y in 0..ow {
            for o in 0..out_c {
                let mut acc = bias[o];
                for i in 0..f {
                    for j in 0..f {
                        let in_row = ((x + i) * w + (y + j)) * c;
                        let k_row = ((o * in_c) * f + i) * f + j;
                        for k in 0..c {
                            acc += ker[k_row + k * f * f] * inp[in_row + k];
                        }
                    }
                }
                out[(x * ow + y) * out_c + o] = acc;
            }
        }
    }
    let result = Tensor::from_vec(out_shape, out)?;
    result.debug_check_finite("conv2d_forward");
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGradients<T> {
    pub input: Tensor<T>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of `sum(upstream * conv2d_forward(input))` with respect to the
/// input, the kernels, and the bias.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGradients<T>> {
    let (_h, w, c) = input_dims3(input)?;
    let f = layer.kernel_size();
    let (out_c, in_c) = (layer.out_channels(), layer.in_channels());
    if c != in_c {
        return Err(Error::ChannelMismatch {
            input: c,
            kernels: in_c,
        });
    }
    let out_shape = shape_after(input.shape(), f, 1, 0, out_c)?;
    if upstream.shape() != &out_shape {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            left: upstream.dims().to_vec(),
            right: out_shape.dims().to_vec(),
        });
    }
    let (oh, ow) = (out_shape.dims()[0], out_shape.dims()[1]);

    let inp = input.data();
    let ker = layer.kernels.data();
    let up = upstream.data();
    let mut g_input = vec![T::ZERO; inp.len()];
    let mut g_kernels = vec![T::ZERO; ker.len()];
    let mut g_bias = vec![T::ZERO; out_c];
    for x in 0..oh {
        for y in 0..ow {
            for o in 0..out_c {
                let g = up[(x * ow + y) * out_c + o];
                g_bias[o] += g;
                for i in 0..f {
                    for j in 0..f {
                        let in_row = ((x + i) * w + (y + j)) * c;
                        let k_row = ((o * in_c) * f + i) * f + j;
                        for k in 0..c {
                            g_kernels[k_row + k * f * f] += g * inp[in_row + k];
                            g_input[in_row + k] += g * ker[k_row + k * f * f];
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGradients {
        input: Tensor::from_vec(input.shape().clone(), g_input)?,
        kernels: Tensor::from_vec(layer.kernels.shape().clone(), g_kernels)?,
        bias: Tensor::from_vec(Shape::new(vec![out_c])?, g_bias)?,
    })
}

fn input_dims3<T: Scalar>(input: &Tensor<T>) -> Result<(usize, usize, usize)> {
    if input.shape().rank() != 3 {
        return Err(Error::RankMismatch {
            op: "conv2d",
            expected: 3,
            dims: input.dims().to_vec(),
        });
    }
    Ok((input.dims()[0], input.dims()[1], input.dims()[2]))
}
