//! From-scratch CNN engine for 43-class traffic-sign recognition.
//!
//! The crate covers the full pipeline: a minimal dense tensor type, the
//! layer zoo (valid convolution, max pooling, inverted dropout, dense,
//! ReLU/softmax), mini-batch Adam training with plateau LR reduction and
//! early stopping, bit-exact binary checkpoints, a GTSRB-style dataset
//! loader, and evaluation reports (confusion matrix, classification report,
//! per-class accuracy, training curves) as CSV plus self-contained SVG.
//!
//! Production paths run on `f32`; every numeric kernel is generic over
//! [`scalar::Scalar`] so verification suites can instantiate the exact same
//! code with `f64` for finite-difference gradient checks.
//!
//! Training is bit-reproducible for a given seed: all randomness flows from
//! named ChaCha streams (see [`rng`]), and batch work fans out over worker
//! lanes with reductions fixed in example-index order. The `parallel`
//! feature (default) backs the lanes with rayon; without it the same code
//! runs sequentially.

pub mod dataset;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod network;
pub mod par;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use layers::Mode;
pub use network::{NetworkSpec, Params, INPUT_SIZE, NUM_CLASSES};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
pub use train::{fit, Checkpoint, FitReport, TrainConfig};
