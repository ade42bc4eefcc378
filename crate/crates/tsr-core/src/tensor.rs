//! Dense N-dimensional arrays in row-major order (last axis fastest).
//!
//! Tensors are immutable once returned from an op; every op is a pure
//! function, so values can be shared freely across worker lanes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Extent per axis. Every extent is at least 1 and the element count must be
/// representable in `usize`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidShape {
                dims,
                reason: "rank must be at least 1",
            });
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape {
                dims,
                reason: "every extent must be at least 1",
            });
        }
        let mut count: usize = 1;
        for &d in &dims {
            count = count.checked_mul(d).ok_or(Error::InvalidShape {
                dims: Vec::new(),
                reason: "element count overflows usize",
            })?;
        }
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
}

/// Dense row-major tensor over `f32` (production) or `f64` (verification).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Tensor with every element equal to `fill`.
    pub fn new(dims: impl Into<Vec<usize>>, fill: T) -> Result<Self> {
        Ok(Self::filled(Shape::new(dims)?, fill))
    }

    pub fn filled(shape: Shape, fill: T) -> Self {
        let n = shape.element_count();
        Tensor {
            shape,
            data: vec![fill; n],
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::ZERO)
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if shape.element_count() != data.len() {
            return Err(Error::InvalidShape {
                dims: shape.dims().to_vec(),
                reason: "data length does not match the shape's element count",
            });
        }
        Ok(Tensor { shape, data })
    }

    /// `from_vec` with the shape built inline.
    pub fn from_dims(dims: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        Self::from_vec(Shape::new(dims)?, data)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Convert between scalar precisions.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Element-by-element combination of two same-shaped tensors.
    pub fn elementwise(&self, other: &Self, op: ElemOp) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "elementwise",
                left: self.dims().to_vec(),
                right: other.dims().to_vec(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                ElemOp::Add => a + b,
                ElemOp::Sub => a - b,
                ElemOp::Mul => a * b,
            })
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, ElemOp::Add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, ElemOp::Sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, ElemOp::Mul)
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|x| x * k)
    }

    /// Rank-2 matrix product: `[m, k] x [k, n] -> [m, n]`.
    ///
    /// The inner sum runs over `l` in ascending order, exactly as the
    /// formula `c[i,j] = sum_l a[i,l] * b[l,j]` reads.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.shape.rank() != 2 {
            return Err(Error::RankMismatch {
                op: "matmul",
                expected: 2,
                dims: self.dims().to_vec(),
            });
        }
        if other.shape.rank() != 2 {
            return Err(Error::RankMismatch {
                op: "matmul",
                expected: 2,
                dims: other.dims().to_vec(),
            });
        }
        let (m, k) = (self.dims()[0], self.dims()[1]);
        let (k2, n) = (other.dims()[0], other.dims()[1]);
        if k != k2 {
            return Err(Error::InnerDimMismatch {
                left: self.dims().to_vec(),
                right: other.dims().to_vec(),
            });
        }
        let mut data = vec![T::ZERO; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = T::ZERO;
                for l in 0..k {
                    acc += self.data[i * k + l] * other.data[l * n + j];
                }
                data[i * n + j] = acc;
            }
        }
        Ok(Tensor {
            shape: Shape::new(vec![m, n])?,
            data,
        })
    }

    /// Same flat data under a new shape with an equal element count.
    pub fn reshape(&self, new_shape: Shape) -> Result<Self> {
        if new_shape.element_count() != self.len() {
            return Err(Error::ReshapeCount {
                from: self.dims().to_vec(),
                from_count: self.len(),
                to: new_shape.dims().to_vec(),
                to_count: new_shape.element_count(),
            });
        }
        Ok(Tensor {
            shape: new_shape,
            data: self.data.clone(),
        })
    }

    /// Index of the largest element of a rank-1 tensor; ties resolve to the
    /// lowest index.
    pub fn argmax(&self) -> Result<usize> {
        if self.shape.rank() != 1 {
            return Err(Error::RankMismatch {
                op: "argmax",
                expected: 1,
                dims: self.dims().to_vec(),
            });
        }
        if self.data.is_empty() {
            return Err(Error::EmptyArgmax);
        }
        let mut best = 0;
        for (i, &x) in self.data.iter().enumerate().skip(1) {
            if x > self.data[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    /// Debug-build check of the finiteness invariant.
    #[inline]
    pub(crate) fn debug_check_finite(&self, op: &str) {
        debug_assert!(
            self.data.iter().all(|x| x.is_finite()),
            "non-finite element after {op}"
        );
        let _ = op;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(dims: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_dims(dims.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn filled_zero_case() {
        let z = Tensor::<f64>::new(vec![2, 2], 0.0).unwrap();
        assert_eq!(z.data(), &[0.0; 4]);
    }

    #[test]
    fn filled_singleton() {
        let s = Tensor::<f64>::new(vec![1], 7.5).unwrap();
        assert_eq!(s.data(), &[7.5]);
    }

    #[test]
    fn element_count_is_extent_product() {
        let t = Tensor::<f32>::new(vec![2, 3], 1.0).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.shape().element_count(), 6);
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(matches!(
            Shape::new(vec![2, 0, 3]),
            Err(Error::InvalidShape { .. })
        ));
    }

    #[test]
    fn overflowing_shape_rejected() {
        assert!(matches!(
            Shape::new(vec![usize::MAX, 2]),
            Err(Error::InvalidShape { .. })
        ));
    }

    #[test]
    fn empty_rank_rejected() {
        assert!(Shape::new(Vec::new()).is_err());
    }

    #[test]
    fn elementwise_add() {
        let c = t(&[2], &[1.0, 2.0]).add(&t(&[2], &[3.0, 4.0])).unwrap();
        assert_eq!(c.data(), &[4.0, 6.0]);
    }

    #[test]
    fn mul_by_zeros_annihilates() {
        let x = t(&[3], &[1.5, -2.0, 7.0]);
        let z = Tensor::zeros(x.shape().clone());
        assert_eq!(x.mul(&z).unwrap(), z);
    }

    #[test]
    fn sub_self_is_zero() {
        let x = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(x.sub(&x).unwrap(), Tensor::zeros(x.shape().clone()));
    }

    #[test]
    fn elementwise_shape_mismatch_names_both_shapes() {
        let a = t(&[2], &[1.0, 2.0]);
        let b = t(&[3], &[1.0, 2.0, 3.0]);
        match a.add(&b) {
            Err(Error::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2]);
                assert_eq!(right, vec![3]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn matmul_identity() {
        let i = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let b = t(&[2, 2], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(i.matmul(&b).unwrap(), b);
    }

    #[test]
    fn matmul_dot_product() {
        let a = t(&[1, 2], &[1.0, 2.0]);
        let b = t(&[2, 1], &[3.0, 4.0]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_inner_mismatch() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 2], &[0.0; 4]);
        assert!(matches!(a.matmul(&b), Err(Error::InnerDimMismatch { .. })));
    }

    // Independent oracle: direct triple loop over multi-dimensional indices.
    fn matmul_oracle(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (m, k) = (a.dims()[0], a.dims()[1]);
        let n = b.dims()[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..k {
                    acc += a.data()[i * k + l] * b.data()[l * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = Tensor::from_dims(
            vec![4, 5],
            (0..20).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b = Tensor::from_dims(
            vec![5, 3],
            (0..15).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &matmul_oracle(&a, &b)[..]);
    }

    // 32-bit naive oracle, written against row/column slices rather than
    // flat pointer walks.
    fn matmul_oracle_f32(a: &Tensor<f32>, b: &Tensor<f32>) -> Vec<f32> {
        let (m, k) = (a.dims()[0], a.dims()[1]);
        let n = b.dims()[1];
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let row = &a.data()[i * k..(i + 1) * k];
            for j in 0..n {
                let col = b.data().iter().skip(j).step_by(n);
                out.push(row.iter().zip(col).map(|(x, y)| x * y).sum());
            }
        }
        out
    }

    #[test]
    fn matmul_f32_matches_naive_oracle_at_sizes_up_to_64() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for &(m, k, n) in &[(64usize, 64usize, 64usize), (17, 33, 9), (1, 64, 1)] {
            let a = Tensor::<f32>::from_dims(
                vec![m, k],
                (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let b = Tensor::<f32>::from_dims(
                vec![k, n],
                (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let got = a.matmul(&b).unwrap();
            for (&g, &o) in got.data().iter().zip(&matmul_oracle_f32(&a, &b)) {
                let rel = (g - o).abs() as f64 / (o.abs() as f64).max(1.0);
                assert!(rel <= 1e-6, "{g} vs {o} (rel {rel})");
            }
        }
    }

    #[test]
    fn reshape_preserves_row_major_order() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = x.reshape(Shape::new(vec![6]).unwrap()).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn reshape_flatten_chain() {
        let x = Tensor::<f32>::new(vec![3, 3, 64], 0.5).unwrap();
        let y = x.reshape(Shape::new(vec![576]).unwrap()).unwrap();
        assert_eq!(y.len(), 576);
    }

    #[test]
    fn reshape_count_mismatch() {
        let x = t(&[2, 3], &[0.0; 6]);
        assert!(matches!(
            x.reshape(Shape::new(vec![5]).unwrap()),
            Err(Error::ReshapeCount { .. })
        ));
    }

    #[test]
    fn argmax_unique() {
        assert_eq!(t(&[3], &[0.1, 0.7, 0.2]).argmax().unwrap(), 1);
    }

    #[test]
    fn argmax_tie_breaks_low() {
        assert_eq!(t(&[2], &[0.5, 0.5]).argmax().unwrap(), 0);
    }

    #[test]
    fn argmax_all_tie() {
        let u = Tensor::<f64>::new(vec![43], 1.0 / 43.0).unwrap();
        assert_eq!(u.argmax().unwrap(), 0);
    }

    proptest! {
        #[test]
        fn add_commutes(xs in proptest::collection::vec(-100i32..100, 1..32),
                        ys_seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(ys_seed);
            let ys: Vec<f64> = (0..xs.len()).map(|_| rng.random_range(-100..100) as f64).collect();
            let a = Tensor::from_dims(vec![xs.len()], xs.iter().map(|&x| x as f64).collect::<Vec<_>>()).unwrap();
            let b = Tensor::from_dims(vec![ys.len()], ys).unwrap();
            // exact equality: integer-valued f64 arithmetic
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        }

        #[test]
        fn reshape_roundtrip(dims in proptest::collection::vec(1usize..5, 1..4)) {
            let n: usize = dims.iter().product();
            let data: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let t = Tensor::from_dims(dims.clone(), data).unwrap();
            let flat = t.reshape(Shape::new(vec![n]).unwrap()).unwrap();
            let back = flat.reshape(Shape::new(dims).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn argmax_shift_invariant(xs in proptest::collection::vec(-100.0f64..100.0, 1..64),
                                  c in -50.0f64..50.0) {
            let t = Tensor::from_dims(vec![xs.len()], xs.clone()).unwrap();
            let shifted = t.map(|x| x + c);
            prop_assert_eq!(t.argmax().unwrap(), shifted.argmax().unwrap());
        }

        #[test]
        fn length_matches_shape(dims in proptest::collection::vec(1usize..6, 1..4)) {
            let t = Tensor::<f32>::new(dims.clone(), 1.0).unwrap();
            prop_assert_eq!(t.len(), dims.iter().product::<usize>());
        }
    }
}
