//! Run configuration: `key = value` config files with CLI flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tsr_core::TrainConfig;

use crate::CommonArgs;

/// Everything a command needs: training hyperparameters plus paths.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub test_fraction: f64,
    pub data_root: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            test_fraction: 0.2,
            data_root: None,
            out_dir: PathBuf::from("tsr-out"),
            checkpoint: None,
        }
    }
}

impl RunConfig {
    /// Checkpoint path: explicit setting or `<out_dir>/checkpoint.tsrn`.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("checkpoint.tsrn"))
    }

    pub fn require_data_root(&self) -> Result<&Path> {
        self.data_root
            .as_deref()
            .context("dataset root is required (pass --data-root or set data_root in the config file)")
    }

    /// Key/value echo used for the run manifest; one line per setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        let t = &self.train;
        vec![
            ("learning_rate".into(), format!("{:.6}", t.learning_rate)),
            ("batch_size".into(), t.batch_size.to_string()),
            ("max_epochs".into(), t.max_epochs.to_string()),
            ("early_stop_patience".into(), t.early_stop_patience.to_string()),
            ("lr_factor".into(), format!("{:.6}", t.lr_factor)),
            ("lr_patience".into(), t.lr_patience.to_string()),
            ("min_lr".into(), format!("{:.6}", t.min_lr)),
            ("seed".into(), t.seed.to_string()),
            ("val_fraction".into(), format!("{:.6}", t.val_fraction)),
            ("test_fraction".into(), format!("{:.6}", self.test_fraction)),
        ]
    }
}

/// Parses the optional config file, then applies CLI overrides on top.
/// Defaults (initial LR 0.001, batch 32, 100 epochs, patience 10, ...) fill
/// whatever neither source sets.
pub fn parse_config(file: Option<&Path>, cli: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        apply_file(&mut cfg, path, &text)?;
    }
    apply_cli(&mut cfg, cli);
    cfg.train
        .validate()
        .map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        bail!("invalid config: test_fraction must lie in [0, 1)");
    }
    Ok(cfg)
}

fn apply_file(cfg: &mut RunConfig, path: &Path, text: &str) -> Result<()> {
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "config {}, line {line_no}: expected `key = value`, got {raw:?}",
                path.display()
            );
        };
        let key = key.trim();
        let value = value.trim();
        let parse_err = |what: &str| {
            anyhow::anyhow!(
                "config {}, line {line_no}: cannot parse {value:?} as {what} for key `{key}`",
                path.display()
            )
        };
        match key {
            "learning_rate" => cfg.train.learning_rate = value.parse().map_err(|_| parse_err("a float"))?,
            "batch_size" => cfg.train.batch_size = value.parse().map_err(|_| parse_err("an integer"))?,
            "max_epochs" => cfg.train.max_epochs = value.parse().map_err(|_| parse_err("an integer"))?,
            "early_stop_patience" => {
                cfg.train.early_stop_patience = value.parse().map_err(|_| parse_err("an integer"))?
            }
            "lr_factor" => cfg.train.lr_factor = value.parse().map_err(|_| parse_err("a float"))?,
            "lr_patience" => cfg.train.lr_patience = value.parse().map_err(|_| parse_err("an integer"))?,
            "min_lr" => cfg.train.min_lr = value.parse().map_err(|_| parse_err("a float"))?,
            "seed" => cfg.train.seed = value.parse().map_err(|_| parse_err("an unsigned integer"))?,
            "val_fraction" => cfg.train.val_fraction = value.parse().map_err(|_| parse_err("a float"))?,
            "test_fraction" => cfg.test_fraction = value.parse().map_err(|_| parse_err("a float"))?,
            "data_root" => cfg.data_root = Some(PathBuf::from(value)),
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "checkpoint" => cfg.checkpoint = Some(PathBuf::from(value)),
            other => bail!(
                "config {}, line {line_no}: unknown key `{other}`",
                path.display()
            ),
        }
    }
    Ok(())
}

fn apply_cli(cfg: &mut RunConfig, cli: &CommonArgs) {
    if let Some(v) = &cli.data_root {
        cfg.data_root = Some(v.clone());
    }
    if let Some(v) = &cli.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &cli.checkpoint {
        cfg.checkpoint = Some(v.clone());
    }
    if let Some(v) = cli.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = cli.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = cli.epochs {
        cfg.train.max_epochs = v;
    }
    if let Some(v) = cli.lr {
        cfg.train.learning_rate = v;
    }
}
