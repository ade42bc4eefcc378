//! GTSRB-style ingestion: directory scan, decode, resize to 30x30,
//! normalization, one-hot labels, and stratified splits.
//!
//! Canonical layout: `root/<class_id>/<image>` with PPM (P6) or PNG files;
//! class directories are integers 0..=42, zero-padded names accepted (so
//! GTSRB's own `00000`..`00042` training tree works unmodified). Non-image
//! files such as GTSRB's per-class annotation CSVs are ignored. An optional
//! `classes.csv` at the root maps ids to human-readable names.

mod decode;
mod resize;

pub use decode::decode_image;
pub use resize::resize_bilinear;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::network::{INPUT_SIZE, NUM_CLASSES};
use crate::par::ordered_map;
use crate::rng::split_rng;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// A normalized 30x30x3 image with its class id and origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    image: Tensor<f32>,
    label: usize,
    source_path: PathBuf,
}

impl LabeledExample {
    /// Validates shape `[30, 30, 3]`, label range, and pixel range `[0, 1]`.
    pub fn new(image: Tensor<f32>, label: usize, source_path: PathBuf) -> Result<Self> {
        let expected = [INPUT_SIZE, INPUT_SIZE, 3];
        if image.dims() != expected {
            return Err(Error::BadInputShape {
                expected: expected.to_vec(),
                got: image.dims().to_vec(),
            });
        }
        if label >= NUM_CLASSES {
            return Err(Error::LabelOutOfRange {
                label,
                max: NUM_CLASSES - 1,
            });
        }
        for &v in image.data() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::PixelOutOfRange(v as f64));
            }
        }
        Ok(LabeledExample {
            image,
            label,
            source_path,
        })
    }

    pub fn image(&self) -> &Tensor<f32> {
        &self.image
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }
}

/// Disjoint train/validation/test parts plus the class-name table.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub class_names: Vec<String>,
}

/// Deterministic `(path, label)` listing sorted by `(label, filename)`.
/// Directory names must parse as integer class ids; files directly under the
/// root are ignored.
pub fn scan_dataset(root: &Path) -> Result<Vec<(PathBuf, usize)>> {
    if !root.is_dir() {
        return Err(Error::DatasetRootMissing(root.to_path_buf()));
    }
    let mut entries = Vec::new();
    let dir = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in dir {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let label: usize = name.parse().map_err(|_| Error::BadClassDirectory {
            name: name.clone(),
            max: NUM_CLASSES - 1,
        })?;
        if label >= NUM_CLASSES {
            return Err(Error::BadClassDirectory {
                name,
                max: NUM_CLASSES - 1,
            });
        }
        let files = fs::read_dir(&path).map_err(|e| Error::io(&path, e))?;
        for file in files {
            let file = file.map_err(|e| Error::io(&path, e))?;
            let file_path = file.path();
            if !file_path.is_file() {
                continue;
            }
            let is_image = file_path
                .extension()
                .map(|e| {
                    let e = e.to_string_lossy().to_lowercase();
                    e == "ppm" || e == "png"
                })
                .unwrap_or(false);
            if is_image {
                entries.push((file_path, label));
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    entries.sort_by(|(pa, la), (pb, lb)| {
        (la, pa.file_name().unwrap_or_default()).cmp(&(lb, pb.file_name().unwrap_or_default()))
    });
    Ok(entries)
}

/// Class-name table from `root/classes.csv` (`id,name` lines, `#` comments);
/// missing entries default to `class_<id>`.
pub fn load_class_names(root: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = (0..NUM_CLASSES).map(|c| format!("class_{c}")).collect();
    let path = root.join("classes.csv");
    if !path.is_file() {
        return Ok(names);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, name) = line.split_once(',').ok_or_else(|| Error::MalformedCsv {
            path: path.clone(),
            line: idx + 1,
            reason: "expected `id,name`".into(),
        })?;
        let id: usize = id.trim().parse().map_err(|_| Error::MalformedCsv {
            path: path.clone(),
            line: idx + 1,
            reason: format!("unparsable class id {id:?}"),
        })?;
        if id >= NUM_CLASSES {
            return Err(Error::MalformedCsv {
                path: path.clone(),
                line: idx + 1,
                reason: format!("class id {id} out of range"),
            });
        }
        names[id] = name.trim().to_string();
    }
    Ok(names)
}

/// Scales 8-bit channel values into `[0, 1]` by dividing by 255.
pub fn normalize(image: &Tensor<f32>) -> Result<Tensor<f32>> {
    for &v in image.data() {
        if !(0.0..=255.0).contains(&v) {
            return Err(Error::PixelOutOfRange(v as f64));
        }
    }
    Ok(image.map(|v| v / 255.0))
}

/// Standard basis vector `e_label` of length `n_classes`.
pub fn one_hot<T: Scalar>(label: usize, n_classes: usize) -> Result<Tensor<T>> {
    if label >= n_classes {
        return Err(Error::LabelOutOfRange {
            label,
            max: n_classes - 1,
        });
    }
    let mut t = Tensor::zeros(Shape::new(vec![n_classes])?);
    t.data_mut()[label] = T::ONE;
    Ok(t)
}

/// Full pipeline for one file: decode, resize to 30x30, normalize, validate.
pub fn load_example(path: &Path, label: usize) -> Result<LabeledExample> {
    let raw = decode_image(path)?;
    let resized = resize_bilinear(&raw, INPUT_SIZE, INPUT_SIZE)?;
    let normalized = normalize(&resized)?;
    LabeledExample::new(normalized, label, path.to_path_buf())
}

/// Loads every example under `root`. Decoding fans out over worker lanes;
/// results keep the canonical `(label, filename)` order.
pub fn load_examples(root: &Path) -> Result<Vec<LabeledExample>> {
    let listing = scan_dataset(root)?;
    ordered_map(&listing, |(path, label)| load_example(path, *label))
        .into_iter()
        .collect()
}

/// Per-class counts of a listing or example set.
fn class_buckets(labels: impl Iterator<Item = usize>) -> Vec<Vec<usize>> {
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, label) in labels.enumerate() {
        buckets[label].push(i);
    }
    buckets
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    Train,
    Val,
    Test,
}

/// Stratified partition. Per class: shuffle with the split stream of `seed`,
/// carve the test part first (`round(n * test_fraction)`, at least 1 when the
/// fraction is positive), then carve validation from the remainder the same
/// way. Rounding to nearest reproduces the 39,209 -> 31,367 / 7,842 split of
/// the full GTSRB training set at `test_fraction = 0.2`.
pub fn stratified_split(
    examples: Vec<LabeledExample>,
    test_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>, Vec<LabeledExample>)> {
    for (name, value) in [("test_fraction", test_fraction), ("val_fraction", val_fraction)] {
        if !(0.0..1.0).contains(&value) {
            return Err(Error::BadFraction { name, value });
        }
    }
    let parts_needed = 1 + usize::from(test_fraction > 0.0) + usize::from(val_fraction > 0.0);
    let mut rng = split_rng(seed);
    let buckets = class_buckets(examples.iter().map(|e| e.label()));
    let mut assignment: Vec<Part> = vec![Part::Train; examples.len()];
    for (label, mut bucket) in buckets.into_iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        let n = bucket.len();
        if n < parts_needed {
            return Err(Error::ClassTooSmall {
                label,
                count: n,
                needed: parts_needed,
            });
        }
        bucket.shuffle(&mut rng);
        let test_n = carve(n, test_fraction, parts_needed - 1);
        let rem = n - test_n;
        let val_n = carve(rem, val_fraction, 1);
        for &i in &bucket[..test_n] {
            assignment[i] = Part::Test;
        }
        for &i in &bucket[test_n..test_n + val_n] {
            assignment[i] = Part::Val;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (example, part) in examples.into_iter().zip(assignment) {
        match part {
            Part::Train => train.push(example),
            Part::Val => val.push(example),
            Part::Test => test.push(example),
        }
    }
    Ok((train, val, test))
}

/// Nearest-rounded share, clamped so the part is non-empty when requested
/// and the other parts keep at least `reserve` examples.
fn carve(n: usize, fraction: f64, reserve: usize) -> usize {
    if fraction == 0.0 {
        return 0;
    }
    let ideal = (n as f64 * fraction).round() as usize;
    ideal.clamp(1, n.saturating_sub(reserve))
}
