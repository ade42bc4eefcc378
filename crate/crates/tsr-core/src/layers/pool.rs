//! Max pooling with an argmax index map for the backward pass.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

use super::shape_after;

/// Pooling window geometry. Padding cells are treated as negative infinity,
/// so a recorded maximum always points into the real input; `p < f`
/// guarantees every window overlaps the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl PoolSpec {
    pub fn new(size: usize, stride: usize, padding: usize) -> Result<Self> {
        if size < 1 {
            return Err(Error::InvalidPoolSpec("window size must be at least 1"));
        }
        if stride < 1 {
            return Err(Error::InvalidPoolSpec("stride must be at least 1"));
        }
        if padding >= size {
            return Err(Error::InvalidPoolSpec("padding must be smaller than the window"));
        }
        Ok(PoolSpec {
            size,
            stride,
            padding,
        })
    }
}

/// Source of each pooled maximum, recorded by the forward pass. Ties route to
/// the lowest flat input index.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndexMap {
    input_shape: Shape,
    output_shape: Shape,
    indices: Vec<usize>,
}

impl PoolIndexMap {
    pub fn output_shape(&self) -> &Shape {
        &self.output_shape
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

pub fn maxpool_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
) -> Result<(Tensor<T>, PoolIndexMap)> {
    if input.shape().rank() != 3 {
        return Err(Error::RankMismatch {
            op: "maxpool_forward",
            expected: 3,
            dims: input.dims().to_vec(),
        });
    }
    let out_c = input.dims()[2];
    let out_shape = shape_after(input.shape(), spec.size, spec.stride, spec.padding, out_c)?;
    let (h, w, c) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (oh, ow) = (out_shape.dims()[0], out_shape.dims()[1]);

    let inp = input.data();
    let mut out = vec![T::ZERO; oh * ow * c];
    let mut indices = vec![0usize; oh * ow * c];
    for ox in 0..oh {
        for oy in 0..ow {
            for ch in 0..c {
                let mut best = T::neg_infinity();
                let mut best_idx = usize::MAX;
                for i in 0..spec.size {
                    for j in 0..spec.size {
                        let r = (ox * spec.stride + i) as isize - spec.padding as isize;
                        let col = (oy * spec.stride + j) as isize - spec.padding as isize;
                        if r < 0 || col < 0 || r as usize >= h || col as usize >= w {
                            continue; // padding: -infinity never wins
                        }
                        let idx = (r as usize * w + col as usize) * c + ch;
                        // strict > keeps the first (lowest-index) maximum
                        if inp[idx] > best {
                            best = inp[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ox * ow + oy) * c + ch;
                out[o] = best;
                indices[o] = best_idx;
            }
        }
    }
    let output = Tensor::from_vec(out_shape.clone(), out)?;
    Ok((
        output,
        PoolIndexMap {
            input_shape: input.shape().clone(),
            output_shape: out_shape,
            indices,
        },
    ))
}

/// Routes each upstream value to the recorded argmax position; every other
/// input position receives zero. Overlapping windows accumulate.
pub fn maxpool_backward<T: Scalar>(map: &PoolIndexMap, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    if upstream.shape() != &map.output_shape {
        return Err(Error::StaleIndexMap {
            upstream: upstream.dims().to_vec(),
            expected: map.output_shape.dims().to_vec(),
        });
    }
    let mut grad = vec![T::ZERO; map.input_shape.element_count()];
    for (o, &src) in map.indices.iter().enumerate() {
        grad[src] += upstream.data()[o];
    }
    Tensor::from_vec(map.input_shape.clone(), grad)
}
