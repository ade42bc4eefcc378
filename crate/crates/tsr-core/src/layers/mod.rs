//! Forward and backward passes for every layer type in the network, plus
//! the shared output-shape calculus.

mod activation;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{relu, relu_backward, softmax};
pub use conv::{conv2d_backward, conv2d_forward, ConvGradients, ConvLayer};
pub use dense::{dense_backward, dense_forward, DenseGradients, DenseLayer};
pub use dropout::{dropout_backward, dropout_forward, expected_dropout_response, DropoutLayer};
pub use pool::{maxpool_backward, maxpool_forward, PoolIndexMap, PoolSpec};

use crate::error::{Error, Result};
use crate::tensor::Shape;

/// Whether dropout is active and forward caches are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Output shape of a windowed op over a `[h, w, c]` input:
/// `[(h + 2p - f) / s + 1, (w + 2p - f) / s + 1, out_c]` with floor division.
///
/// The same formula covers pooling and valid convolution (`s = 1`, `p = 0`).
pub fn shape_after(input: &Shape, f: usize, s: usize, p: usize, out_c: usize) -> Result<Shape> {
    if input.rank() != 3 {
        return Err(Error::RankMismatch {
            op: "shape_after",
            expected: 3,
            dims: input.dims().to_vec(),
        });
    }
    if f == 0 {
        return Err(Error::InvalidPoolSpec("window size must be at least 1"));
    }
    if s == 0 {
        return Err(Error::InvalidPoolSpec("stride must be at least 1"));
    }
    let (h, w) = (input.dims()[0], input.dims()[1]);
    if h + 2 * p < f || w + 2 * p < f {
        return Err(Error::WindowTooLarge { f, s, p, h, w });
    }
    Shape::new(vec![(h + 2 * p - f) / s + 1, (w + 2 * p - f) / s + 1, out_c])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(dims: &[usize]) -> Shape {
        Shape::new(dims.to_vec()).unwrap()
    }

    #[test]
    fn first_conv_shape() {
        let out = shape_after(&sh(&[30, 30, 3]), 5, 1, 0, 32).unwrap();
        assert_eq!(out.dims(), &[26, 26, 32]);
    }

    #[test]
    fn pool_shape() {
        let out = shape_after(&sh(&[22, 22, 32]), 2, 2, 0, 32).unwrap();
        assert_eq!(out.dims(), &[11, 11, 32]);
    }

    #[test]
    fn canonical_chain() {
        // 30 -> 26 -> 22 -> 11 -> 9 -> 7 -> 3, flatten 3*3*64 = 576
        let mut s = sh(&[30, 30, 3]);
        s = shape_after(&s, 5, 1, 0, 32).unwrap();
        assert_eq!(s.dims(), &[26, 26, 32]);
        s = shape_after(&s, 5, 1, 0, 32).unwrap();
        assert_eq!(s.dims(), &[22, 22, 32]);
        s = shape_after(&s, 2, 2, 0, 32).unwrap();
        assert_eq!(s.dims(), &[11, 11, 32]);
        s = shape_after(&s, 3, 1, 0, 64).unwrap();
        assert_eq!(s.dims(), &[9, 9, 64]);
        s = shape_after(&s, 3, 1, 0, 64).unwrap();
        assert_eq!(s.dims(), &[7, 7, 64]);
        s = shape_after(&s, 2, 2, 0, 64).unwrap();
        assert_eq!(s.dims(), &[3, 3, 64]);
        assert_eq!(s.element_count(), 576);
    }

    #[test]
    fn oversized_window_rejected() {
        assert!(matches!(
            shape_after(&sh(&[4, 4, 1]), 5, 1, 0, 1),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    // shape_after must predict what the forward ops actually produce
    proptest::proptest! {
        #[test]
        fn predicts_observed_pool_shapes(h in 1usize..9, w in 1usize..9,
                                         f in 1usize..4, s in 1usize..4,
                                         p in 0usize..3, c in 1usize..3) {
            proptest::prop_assume!(p < f);
            proptest::prop_assume!(h + 2 * p >= f && w + 2 * p >= f);
            let input = crate::tensor::Tensor::<f64>::new(vec![h, w, c], 0.5).unwrap();
            let spec = PoolSpec::new(f, s, p).unwrap();
            let (out, _) = maxpool_forward(&input, &spec).unwrap();
            let predicted = shape_after(input.shape(), f, s, p, c).unwrap();
            proptest::prop_assert_eq!(out.shape(), &predicted);
        }

        #[test]
        fn predicts_observed_conv_shapes(extra_h in 0usize..5, extra_w in 0usize..5,
                                         f in 1usize..4, c in 1usize..3, oc in 1usize..4) {
            let (h, w) = (f + extra_h, f + extra_w);
            let input = crate::tensor::Tensor::<f64>::new(vec![h, w, c], 0.25).unwrap();
            let layer = ConvLayer::new(
                crate::tensor::Tensor::<f64>::new(vec![oc, c, f, f], 0.1).unwrap(),
                crate::tensor::Tensor::<f64>::new(vec![oc], 0.0).unwrap(),
            ).unwrap();
            let out = conv2d_forward(&input, &layer).unwrap();
            let predicted = shape_after(input.shape(), f, 1, 0, oc).unwrap();
            proptest::prop_assert_eq!(out.shape(), &predicted);
        }
    }
}
