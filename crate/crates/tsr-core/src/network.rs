//! Network description, parameter storage, and whole-network forward and
//! backward passes.
//!
//! The layer sequence is fixed and linear, so the backward pass is a plain
//! reverse walk over per-layer adjoints rather than a general autodiff graph.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, maxpool_backward, maxpool_forward, relu, relu_backward, shape_after, softmax,
    ConvLayer, DenseLayer, DropoutLayer, Mode, PoolIndexMap, PoolSpec,
};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Number of GTSRB traffic-sign classes.
pub const NUM_CLASSES: usize = 43;

/// Side length of the network's square input images.
pub const INPUT_SIZE: usize = 30;

/// One layer of the architecture. Convolutions are valid (padding 0) with
/// stride 1; max pools use padding 0.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv { out_channels: usize, kernel: usize },
    Relu,
    MaxPool { size: usize, stride: usize },
    Dropout { rate: f32 },
    Flatten,
    Dense { units: usize },
    Softmax,
}

/// Ordered layer descriptors plus the input shape; validated so consecutive
/// shapes chain correctly and the network ends in `Dense -> Softmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    input: Shape,
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        if input.rank() != 3 {
            return Err(Error::InvalidNetworkSpec(format!(
                "input must be rank-3 [h, w, c], got {input}"
            )));
        }
        let spec = NetworkSpec { input, layers };
        if spec.layers.len() < 2
            || !matches!(spec.layers.last(), Some(LayerSpec::Softmax))
            || !matches!(spec.layers[spec.layers.len() - 2], LayerSpec::Dense { .. })
        {
            return Err(Error::InvalidNetworkSpec(
                "network must end with Dense -> Softmax".into(),
            ));
        }
        spec.shape_chain()?; // validates every transition
        Ok(spec)
    }

    /// The architecture used throughout: four conv layers (32x5x5 twice,
    /// 64x3x3 twice), two 2x2 max pools, dropout 0.25/0.25/0.5, a 256-unit
    /// dense layer, and a 43-way softmax classifier over 30x30x3 inputs.
    pub fn canonical() -> Self {
        use LayerSpec::*;
        NetworkSpec::new(
            Shape::new(vec![INPUT_SIZE, INPUT_SIZE, 3]).unwrap(),
            vec![
                Conv { out_channels: 32, kernel: 5 },
                Relu,
                Conv { out_channels: 32, kernel: 5 },
                Relu,
                MaxPool { size: 2, stride: 2 },
                Dropout { rate: 0.25 },
                Conv { out_channels: 64, kernel: 3 },
                Relu,
                Conv { out_channels: 64, kernel: 3 },
                Relu,
                MaxPool { size: 2, stride: 2 },
                Dropout { rate: 0.25 },
                Flatten,
                Dense { units: 256 },
                Relu,
                Dropout { rate: 0.5 },
                Dense { units: NUM_CLASSES },
                Softmax,
            ],
        )
        .expect("canonical spec is valid")
    }

    pub fn input_shape(&self) -> &Shape {
        &self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Width of the final dense layer (the class count).
    pub fn output_classes(&self) -> usize {
        match self.layers[self.layers.len() - 2] {
            LayerSpec::Dense { units } => units,
            _ => unreachable!("validated in new"),
        }
    }

    /// Output shape after every layer, in order.
    pub fn shape_chain(&self) -> Result<Vec<Shape>> {
        let mut shape = self.input.clone();
        let mut chain = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = match layer {
                LayerSpec::Conv { out_channels, kernel } => {
                    if *kernel == 0 || *out_channels == 0 {
                        return Err(Error::InvalidNetworkSpec(
                            "conv kernel and channel count must be positive".into(),
                        ));
                    }
                    shape_after(&shape, *kernel, 1, 0, *out_channels)?
                }
                LayerSpec::Relu => shape,
                LayerSpec::MaxPool { size, stride } => {
                    let spec = PoolSpec::new(*size, *stride, 0)?;
                    shape_after(&shape, spec.size, spec.stride, spec.padding, shape.dims()[2])?
                }
                LayerSpec::Dropout { rate } => {
                    DropoutLayer::new(*rate)?;
                    shape
                }
                LayerSpec::Flatten => Shape::new(vec![shape.element_count()])?,
                LayerSpec::Dense { units } => {
                    if shape.rank() != 1 {
                        return Err(Error::InvalidNetworkSpec(
                            "dense layer requires a flattened input".into(),
                        ));
                    }
                    Shape::new(vec![*units])?
                }
                LayerSpec::Softmax => shape,
            };
            chain.push(shape.clone());
        }
        Ok(chain)
    }

    /// Shapes of every parameter tensor in declaration order: for each conv
    /// layer its kernels then bias, for each dense layer its weights then
    /// bias.
    pub fn parameter_shapes(&self) -> Vec<Shape> {
        let mut shapes = Vec::new();
        let mut current = self.input.clone();
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv { out_channels, kernel } => {
                    let in_c = current.dims()[2];
                    shapes.push(Shape::new(vec![*out_channels, in_c, *kernel, *kernel]).unwrap());
                    shapes.push(Shape::new(vec![*out_channels]).unwrap());
                    current = shape_after(&current, *kernel, 1, 0, *out_channels).unwrap();
                }
                LayerSpec::MaxPool { size, stride } => {
                    current =
                        shape_after(&current, *size, *stride, 0, current.dims()[2]).unwrap();
                }
                LayerSpec::Flatten => {
                    current = Shape::new(vec![current.element_count()]).unwrap();
                }
                LayerSpec::Dense { units } => {
                    let in_f = current.dims()[0];
                    shapes.push(Shape::new(vec![*units, in_f]).unwrap());
                    shapes.push(Shape::new(vec![*units]).unwrap());
                    current = Shape::new(vec![*units]).unwrap();
                }
                LayerSpec::Relu | LayerSpec::Dropout { .. } | LayerSpec::Softmax => {}
            }
        }
        shapes
    }

    /// Total learnable scalar count.
    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(Shape::element_count)
            .sum()
    }
}

/// All learnable tensors in declaration order (see
/// [`NetworkSpec::parameter_shapes`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn from_tensors(spec: &NetworkSpec, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = spec.parameter_shapes();
        if shapes.len() != tensors.len() {
            return Err(Error::InvalidNetworkSpec(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (shape, tensor) in shapes.iter().zip(&tensors) {
            if tensor.shape() != shape {
                return Err(Error::ShapeMismatch {
                    op: "params",
                    left: tensor.dims().to_vec(),
                    right: shape.dims().to_vec(),
                });
            }
        }
        Ok(Params { tensors })
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        Params {
            tensors: spec
                .parameter_shapes()
                .into_iter()
                .map(Tensor::zeros)
                .collect(),
        }
    }

    /// He-uniform kernels for ReLU-facing layers, Glorot-uniform for the
    /// softmax-facing dense layer, zero biases. Draws consume `rng` in layer
    /// declaration order, flat-index order within each tensor.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut tensors = Vec::new();
        let mut current = spec.input.clone();
        for (idx, layer) in spec.layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv { out_channels, kernel } => {
                    let in_c = current.dims()[2];
                    let fan_in = (in_c * kernel * kernel) as f64;
                    let bound = (6.0 / fan_in).sqrt();
                    let shape = Shape::new(vec![*out_channels, in_c, *kernel, *kernel]).unwrap();
                    tensors.push(uniform_tensor(shape, bound, rng));
                    tensors.push(Tensor::zeros(Shape::new(vec![*out_channels]).unwrap()));
                    current = shape_after(&current, *kernel, 1, 0, *out_channels).unwrap();
                }
                LayerSpec::MaxPool { size, stride } => {
                    current =
                        shape_after(&current, *size, *stride, 0, current.dims()[2]).unwrap();
                }
                LayerSpec::Flatten => {
                    current = Shape::new(vec![current.element_count()]).unwrap();
                }
                LayerSpec::Dense { units } => {
                    let fan_in = current.dims()[0] as f64;
                    let fan_out = *units as f64;
                    let relu_next = spec.layers[idx + 1..]
                        .iter()
                        .find_map(|l| match l {
                            LayerSpec::Relu => Some(true),
                            LayerSpec::Softmax => Some(false),
                            _ => None,
                        })
                        .unwrap_or(false);
                    let bound = if relu_next {
                        (6.0 / fan_in).sqrt()
                    } else {
                        (6.0 / (fan_in + fan_out)).sqrt()
                    };
                    let shape = Shape::new(vec![*units, current.dims()[0]]).unwrap();
                    tensors.push(uniform_tensor(shape, bound, rng));
                    tensors.push(Tensor::zeros(Shape::new(vec![*units]).unwrap()));
                    current = Shape::new(vec![*units]).unwrap();
                }
                LayerSpec::Relu | LayerSpec::Dropout { .. } | LayerSpec::Softmax => {}
            }
        }
        Params { tensors }
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}

fn uniform_tensor<T: Scalar, R: Rng + ?Sized>(shape: Shape, bound: f64, rng: &mut R) -> Tensor<T> {
    let n = shape.element_count();
    let data = (0..n)
        .map(|_| T::from_f64(rng.random_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Per-layer values recorded by a train-mode forward pass.
#[derive(Debug, Clone)]
enum StageCache<T> {
    Conv { input: Tensor<T> },
    Relu { input: Tensor<T> },
    Pool { map: PoolIndexMap },
    Dropout { mask: Tensor<T> },
    Flatten { input_shape: Shape },
    Dense { input: Tensor<T> },
    Softmax,
}

/// Everything the backward pass needs; produced by a train-mode forward.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    mode: Mode,
    stages: Vec<StageCache<T>>,
}

/// Runs the full layer stack. Train mode records a cache and draws dropout
/// masks from `rng`; eval mode disables dropout and returns an empty cache.
pub fn network_forward<T: Scalar, R: Rng + ?Sized>(
    spec: &NetworkSpec,
    params: &Params<T>,
    input: &Tensor<T>,
    mode: Mode,
    mut rng: Option<&mut R>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    if input.shape() != spec.input_shape() {
        return Err(Error::BadInputShape {
            expected: spec.input_shape().dims().to_vec(),
            got: input.dims().to_vec(),
        });
    }
    let mut cursor = ParamCursor::new(params);
    let mut stages = Vec::with_capacity(if mode == Mode::Train {
        spec.layers.len()
    } else {
        0
    });
    let mut value = input.clone();
    for layer in &spec.layers {
        value = match layer {
            LayerSpec::Conv { .. } => {
                let conv = cursor.conv()?;
                let out = conv2d_forward(&value, &conv)?;
                if mode == Mode::Train {
                    stages.push(StageCache::Conv { input: value });
                }
                out
            }
            LayerSpec::Relu => {
                let out = relu(&value);
                if mode == Mode::Train {
                    stages.push(StageCache::Relu { input: value });
                }
                out
            }
            LayerSpec::MaxPool { size, stride } => {
                let pool = PoolSpec::new(*size, *stride, 0)?;
                let (out, map) = maxpool_forward(&value, &pool)?;
                if mode == Mode::Train {
                    stages.push(StageCache::Pool { map });
                }
                out
            }
            LayerSpec::Dropout { rate } => {
                let layer = DropoutLayer::new(*rate)?;
                match mode {
                    Mode::Eval => value, // identity; nothing recorded
                    Mode::Train => {
                        let rng = rng.as_deref_mut().ok_or(Error::MissingDropoutRng)?;
                        let (out, mask) = dropout_forward(&value, &layer, Mode::Train, rng)?;
                        stages.push(StageCache::Dropout { mask });
                        out
                    }
                }
            }
            LayerSpec::Flatten => {
                let flat = Shape::new(vec![value.len()])?;
                let input_shape = value.shape().clone();
                let out = value.reshape(flat)?;
                if mode == Mode::Train {
                    stages.push(StageCache::Flatten { input_shape });
                }
                out
            }
            LayerSpec::Dense { .. } => {
                let dense = cursor.dense()?;
                let out = dense_forward(&value, &dense)?;
                if mode == Mode::Train {
                    stages.push(StageCache::Dense { input: value });
                }
                out
            }
            LayerSpec::Softmax => {
                let out = softmax(&value)?;
                if mode == Mode::Train {
                    stages.push(StageCache::Softmax);
                }
                out
            }
        };
    }
    cursor.finish()?;
    Ok((value, ForwardCache { mode, stages }))
}

/// Eval-mode class probabilities, no cache.
pub fn network_predict<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    input: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (probs, _) =
        network_forward::<T, rand_chacha::ChaCha8Rng>(spec, params, input, Mode::Eval, None)?;
    Ok(probs)
}

/// Chain-rule composition of the per-layer adjoints in reverse layer order.
///
/// `grad_logits` is the loss gradient with respect to the pre-softmax
/// logits (for cross-entropy that is `probs - target`), so the softmax
/// stage passes it through unchanged. Returns one gradient tensor per
/// parameter tensor, in declaration order.
pub fn network_backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    cache: &ForwardCache<T>,
    grad_logits: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    if cache.mode != Mode::Train {
        return Err(Error::EvalModeCache);
    }
    if cache.stages.len() != spec.layers.len() {
        return Err(Error::EvalModeCache);
    }

    // parameter tensors grouped per layer, walked from the back
    let mut param_iter = params.tensors.iter();
    let mut layer_params: Vec<Option<(&Tensor<T>, &Tensor<T>)>> = Vec::new();
    for layer in &spec.layers {
        match layer {
            LayerSpec::Conv { .. } | LayerSpec::Dense { .. } => {
                let a = param_iter.next().ok_or(Error::EvalModeCache)?;
                let b = param_iter.next().ok_or(Error::EvalModeCache)?;
                layer_params.push(Some((a, b)));
            }
            _ => layer_params.push(None),
        }
    }

    let mut grads_reversed: Vec<Tensor<T>> = Vec::new();
    let mut upstream = grad_logits.clone();
    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        let stage = &cache.stages[idx];
        upstream = match (layer, stage) {
            (LayerSpec::Conv { .. }, StageCache::Conv { input }) => {
                let (kernels, bias) = layer_params[idx].expect("conv params");
                let conv = ConvLayer {
                    kernels: kernels.clone(),
                    bias: bias.clone(),
                };
                let g = conv2d_backward(input, &conv, &upstream)?;
                grads_reversed.push(g.bias);
                grads_reversed.push(g.kernels);
                g.input
            }
            (LayerSpec::Relu, StageCache::Relu { input }) => relu_backward(input, &upstream)?,
            (LayerSpec::MaxPool { .. }, StageCache::Pool { map }) => {
                maxpool_backward(map, &upstream)?
            }
            (LayerSpec::Dropout { rate }, StageCache::Dropout { mask }) => {
                let layer = DropoutLayer::new(*rate)?;
                dropout_backward(mask, &layer, &upstream)?
            }
            (LayerSpec::Flatten, StageCache::Flatten { input_shape }) => {
                upstream.reshape(input_shape.clone())?
            }
            (LayerSpec::Dense { .. }, StageCache::Dense { input }) => {
                let (weights, bias) = layer_params[idx].expect("dense params");
                let dense = DenseLayer {
                    weights: weights.clone(),
                    bias: bias.clone(),
                };
                let g = dense_backward(input, &dense, &upstream)?;
                grads_reversed.push(g.bias);
                grads_reversed.push(g.weights);
                g.input
            }
            (LayerSpec::Softmax, StageCache::Softmax) => upstream,
            _ => return Err(Error::EvalModeCache),
        };
    }
    grads_reversed.reverse();
    Ok(grads_reversed)
}

/// Walks the flat parameter list, handing out per-layer views in order.
struct ParamCursor<'a, T> {
    tensors: &'a [Tensor<T>],
    pos: usize,
}

impl<'a, T: Scalar> ParamCursor<'a, T> {
    fn new(params: &'a Params<T>) -> Self {
        ParamCursor {
            tensors: &params.tensors,
            pos: 0,
        }
    }

    fn pair(&mut self) -> Result<(&'a Tensor<T>, &'a Tensor<T>)> {
        if self.pos + 2 > self.tensors.len() {
            return Err(Error::InvalidNetworkSpec(
                "parameter list shorter than the layer table".into(),
            ));
        }
        let pair = (&self.tensors[self.pos], &self.tensors[self.pos + 1]);
        self.pos += 2;
        Ok(pair)
    }

    fn conv(&mut self) -> Result<ConvLayer<T>> {
        let (kernels, bias) = self.pair()?;
        ConvLayer::new(kernels.clone(), bias.clone())
    }

    fn dense(&mut self) -> Result<DenseLayer<T>> {
        let (weights, bias) = self.pair()?;
        DenseLayer::new(weights.clone(), bias.clone())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.tensors.len() {
            return Err(Error::InvalidNetworkSpec(
                "parameter list longer than the layer table".into(),
            ));
        }
        Ok(())
    }
}
