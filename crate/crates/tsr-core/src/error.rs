//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ---- tensors ----
    #[error("invalid shape {dims:?}: {reason}")]
    InvalidShape { dims: Vec<usize>, reason: &'static str },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op} expects a rank-{expected} tensor, got shape {dims:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        dims: Vec<usize>,
    },
    #[error("matmul inner dimensions disagree: {left:?} vs {right:?}")]
    InnerDimMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("reshape cannot map {from:?} ({from_count} elements) onto {to:?} ({to_count} elements)")]
    ReshapeCount {
        from: Vec<usize>,
        from_count: usize,
        to: Vec<usize>,
        to_count: usize,
    },
    #[error("argmax over an empty tensor")]
    EmptyArgmax,

    // ---- layers ----
    #[error("channel mismatch: input carries {input} channels, kernels expect {kernels}")]
    ChannelMismatch { input: usize, kernels: usize },
    #[error("{f}x{f} window (stride {s}, padding {p}) does not fit a {h}x{w} input")]
    WindowTooLarge {
        f: usize,
        s: usize,
        p: usize,
        h: usize,
        w: usize,
    },
    #[error("invalid pooling spec: {0}")]
    InvalidPoolSpec(&'static str),
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidDropoutRate(f64),
    #[error("retention probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("pool index map does not match upstream shape {upstream:?} (expected {expected:?})")]
    StaleIndexMap {
        upstream: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("network backward requires a train-mode forward cache")]
    EvalModeCache,
    #[error("train-mode forward requires a dropout RNG")]
    MissingDropoutRng,
    #[error("network input must have shape {expected:?}, got {got:?}")]
    BadInputShape { expected: Vec<usize>, got: Vec<usize> },
    #[error("invalid network spec: {0}")]
    InvalidNetworkSpec(String),

    // ---- loss / training ----
    #[error("target is not one-hot: {0}")]
    NotOneHot(&'static str),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("training requires a non-empty {0} part")]
    EmptySplitPart(&'static str),

    // ---- checkpoints ----
    #[error("not a checkpoint (bad magic)")]
    CheckpointMagic,
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),
    #[error("truncated checkpoint")]
    CheckpointTruncated,
    #[error("checkpoint carries {0} trailing bytes")]
    CheckpointTrailing(usize),
    #[error("corrupt checkpoint: {0}")]
    CheckpointCorrupt(String),

    // ---- dataset ----
    #[error("dataset root not found: {0}")]
    DatasetRootMissing(PathBuf),
    #[error("empty dataset under {0}")]
    EmptyDataset(PathBuf),
    #[error("class directory {name:?} is not an integer class id in 0..={max}")]
    BadClassDirectory { name: String, max: usize },
    #[error("label {label} out of range 0..={max}")]
    LabelOutOfRange { label: usize, max: usize },
    #[error("class {label} has {count} examples but {needed} split parts were requested")]
    ClassTooSmall {
        label: usize,
        count: usize,
        needed: usize,
    },
    #[error("split fraction {value} outside [0, 1) for {name}")]
    BadFraction { name: &'static str, value: f64 },
    #[error("unsupported image format: {path}")]
    UnsupportedImageFormat { path: PathBuf },
    #[error("truncated image payload: {path}")]
    TruncatedImage { path: PathBuf },
    #[error("unsupported PPM maxval {maxval} in {path} (only 255 is supported)")]
    BadMaxval { maxval: u32, path: PathBuf },
    #[error("png decode failed for {path}: {message}")]
    PngDecode { path: PathBuf, message: String },
    #[error("pixel value {0} outside [0, 255]")]
    PixelOutOfRange(f64),

    // ---- metrics / reports ----
    #[error("prediction/truth lists differ in length: {preds} vs {truths}")]
    EvalLengthMismatch { preds: usize, truths: usize },
    #[error("cannot evaluate an empty prediction list")]
    EmptyEvaluation,
    #[error("malformed CSV {path}, line {line}: {reason}")]
    MalformedCsv {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    // ---- io ----
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
