//! The four pipeline commands. Machine-readable output (predict CSV lines,
//! `test_accuracy=...`) goes to stdout; progress and diagnostics go to
//! stderr.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use tsr_core::dataset::{
    self, load_class_names, load_examples, scan_dataset, DatasetSplit,
};
use tsr_core::metrics::{
    self, classification_report, read_confusion_csv, read_curves_csv, read_per_class_csv,
    read_report_csv, render_reports, write_curves_csv, ConfusionMatrix, CurvePoint,
};
use tsr_core::network::{network_predict, NetworkSpec};
use tsr_core::train::{
    fit_with_progress, load_checkpoint, predict_examples, save_checkpoint, Checkpoint,
};
use tsr_core::NUM_CLASSES;

use crate::config::RunConfig;

const CURVES_FILE: &str = "curves.csv";
const MANIFEST_FILE: &str = "manifest.txt";

/// Ingest, split, fit, and persist the best checkpoint plus training
/// artifacts.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let root = cfg.require_data_root()?;
    let listing = scan_dataset(root)?;
    let fingerprint = dataset_fingerprint(root, &listing);
    eprintln!("loading {} images from {}", listing.len(), root.display());
    let examples = load_examples(root)?;
    let class_names = load_class_names(root)?;
    let (train, validation, test) = dataset::stratified_split(
        examples,
        cfg.test_fraction,
        cfg.train.val_fraction,
        cfg.train.seed,
    )?;
    eprintln!(
        "split: {} train / {} validation / {} test",
        train.len(),
        validation.len(),
        test.len()
    );
    let split = DatasetSplit {
        train,
        validation,
        test,
        class_names,
    };

    let spec = NetworkSpec::canonical();
    let report = fit_with_progress(&spec, &split, &cfg.train, |p| {
        eprintln!(
            "epoch {}: train_loss={:.6} train_acc={:.6} val_loss={:.6} val_acc={:.6} lr={:.6}",
            p.epoch, p.train_loss, p.train_acc, p.val_loss, p.val_acc, p.lr
        );
    })?;

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let checkpoint_path = cfg.checkpoint_path();
    save_checkpoint(&checkpoint_path, &report.checkpoint)?;
    write_curves_csv(&cfg.out_dir.join(CURVES_FILE), &report.curves)?;
    write_manifest(
        cfg,
        root,
        fingerprint,
        spec.parameter_count(),
        &[
            ("epochs_run", report.epochs_run.to_string()),
            ("best_epoch", report.best_epoch.to_string()),
            (
                "best_val_accuracy",
                format!("{:.6}", report.checkpoint.best_value),
            ),
        ],
    )?;
    eprintln!(
        "best epoch {} (val_acc={:.6}); checkpoint written to {}",
        report.best_epoch,
        report.checkpoint.best_value,
        checkpoint_path.display()
    );
    Ok(())
}

/// Eval-mode inference over the test split; prints `test_accuracy=<6dp>` and
/// writes every metrics artifact.
pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let root = cfg.require_data_root()?;
    let checkpoint = load_checkpoint(&cfg.checkpoint_path())?;
    let examples = load_examples(root)?;
    let (_, _, test) = dataset::stratified_split(
        examples,
        cfg.test_fraction,
        cfg.train.val_fraction,
        cfg.train.seed,
    )?;
    if test.is_empty() {
        bail!("test split is empty (test_fraction = {})", cfg.test_fraction);
    }
    eprintln!("evaluating {} test images", test.len());

    let predictions = predict_examples(&checkpoint.spec, &checkpoint.params, &test)?;
    let truths: Vec<usize> = test.iter().map(|e| e.label()).collect();
    let cm = ConfusionMatrix::from_predictions(&predictions, &truths, NUM_CLASSES)?;
    let report = classification_report(&cm);

    // keep training curves alongside the eval artifacts when present
    let curves = read_curves_csv(&cfg.out_dir.join(CURVES_FILE)).unwrap_or_default();
    render_reports(&cm, &report, &curves, &cfg.out_dir)?;

    println!("test_accuracy={:.6}", report.accuracy);
    Ok(())
}

/// Classifies individual image files; one stdout CSV line per image.
pub fn cmd_predict(cfg: &RunConfig, images: &[PathBuf]) -> Result<()> {
    if images.is_empty() {
        bail!("predict requires at least one image path");
    }
    let checkpoint = load_checkpoint(&cfg.checkpoint_path())?;
    let class_names = match &cfg.data_root {
        Some(root) => load_class_names(root)?,
        None => (0..NUM_CLASSES).map(|c| format!("class_{c}")).collect(),
    };
    let mut failures = 0usize;
    for path in images {
        match predict_one(&checkpoint, path) {
            Ok((class_id, probability)) => {
                println!(
                    "{},{},{},{:.6}",
                    path.display(),
                    class_id,
                    class_names[class_id],
                    probability
                );
            }
            Err(err) => {
                failures += 1;
                eprintln!("error: {}: {err}", path.display());
            }
        }
    }
    if failures == images.len() {
        bail!("all {failures} image(s) failed to classify");
    }
    Ok(())
}

fn predict_one(checkpoint: &Checkpoint, path: &Path) -> Result<(usize, f32)> {
    let raw = dataset::decode_image(path)?;
    let resized = dataset::resize_bilinear(&raw, 30, 30)?;
    let image = dataset::normalize(&resized)?;
    let probs = network_predict(&checkpoint.spec, &checkpoint.params, &image)?;
    let class_id = probs.argmax()?;
    Ok((class_id, probs.data()[class_id]))
}

/// Regenerates the SVG charts from whichever CSV artifacts exist in
/// `out_dir`, without recomputing anything.
pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.out_dir;
    let mut regenerated = 0usize;

    let curves_csv = dir.join(metrics::CURVES_CSV);
    if curves_csv.is_file() {
        let curves: Vec<CurvePoint> = read_curves_csv(&curves_csv)?;
        write_svg(dir, metrics::CURVES_SVG, metrics::svg_curves_chart(&curves))?;
        regenerated += 1;
    }
    let cm_csv = dir.join(metrics::CONFUSION_CSV);
    if cm_csv.is_file() {
        let cm = read_confusion_csv(&cm_csv)?;
        write_svg(
            dir,
            metrics::CONFUSION_SVG,
            metrics::svg_confusion_heatmap("confusion matrix", &cm),
        )?;
        regenerated += 1;
    }
    let report_csv = dir.join(metrics::REPORT_CSV);
    if report_csv.is_file() {
        let report = read_report_csv(&report_csv)?;
        write_svg(
            dir,
            metrics::REPORT_SVG,
            metrics::svg_report_chart("classification report", &report),
        )?;
        regenerated += 1;
    }
    let pca_csv = dir.join(metrics::PER_CLASS_CSV);
    if pca_csv.is_file() {
        let values = read_per_class_csv(&pca_csv)?;
        write_svg(
            dir,
            metrics::PER_CLASS_SVG,
            metrics::svg_bar_chart("per-class accuracy", &values),
        )?;
        regenerated += 1;
    }

    if regenerated == 0 {
        bail!(
            "no report CSVs found in {} (expected curves.csv, confusion_matrix.csv, \
             classification_report.csv, or per_class_accuracy.csv)",
            dir.display()
        );
    }
    eprintln!("regenerated {regenerated} chart(s) in {}", dir.display());
    Ok(())
}

fn write_svg(dir: &Path, name: &str, contents: String) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// FNV-1a over the sorted listing: relative path, label, and file size of
/// every image. Identifies the dataset composition in the run manifest.
fn dataset_fingerprint(root: &Path, listing: &[(PathBuf, usize)]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    for (path, label) in listing {
        let rel = path.strip_prefix(root).unwrap_or(path);
        eat(rel.to_string_lossy().as_bytes());
        eat(&(*label as u64).to_le_bytes());
        let size = fs::metadata(path).map(|m| m.len()).unwrap_or(0);
        eat(&size.to_le_bytes());
    }
    hash
}

fn write_manifest(
    cfg: &RunConfig,
    root: &Path,
    fingerprint: u64,
    parameter_count: usize,
    extra: &[(&str, String)],
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("version = {}\n", version_string()));
    out.push_str("command = train\n");
    out.push_str(&format!("data_root = {}\n", root.display()));
    out.push_str(&format!("data_root_hash = {fingerprint:016x}\n"));
    out.push_str(&format!("parameter_count = {parameter_count}\n"));
    for (key, value) in cfg.echo() {
        out.push_str(&format!("{key} = {value}\n"));
    }
    for (key, value) in extra {
        out.push_str(&format!("{key} = {value}\n"));
    }
    let path = cfg.out_dir.join(MANIFEST_FILE);
    fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// `tsr-0.1.0` style version tag.
pub fn version_string() -> String {
    format!("tsr-{}", env!("CARGO_PKG_VERSION"))
}
