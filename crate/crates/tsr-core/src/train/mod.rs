//! Loss, optimizer, schedules, checkpoints, and the epoch loop.

mod adam;
mod checkpoint;
mod loss;
mod schedule;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState, MAGIC, VERSION};
pub use loss::{cross_entropy_loss, softmax_xent_gradient, LOG_CLAMP};
pub use schedule::{early_stopping_check, PlateauScheduler, StopDecision};

use rand::seq::SliceRandom;

use crate::dataset::{one_hot, DatasetSplit, LabeledExample};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::metrics::CurvePoint;
use crate::network::{network_backward, network_forward, network_predict, NetworkSpec, Params};
use crate::par::ordered_map_indexed;
use crate::rng;
use crate::tensor::Tensor;

/// Every training hyperparameter. The monitored quantity for LR reduction,
/// early stopping, and best-checkpoint selection is fixed: validation
/// accuracy, where only strict improvements count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub lr_factor: f32,
    pub lr_patience: usize,
    pub min_lr: f32,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 10,
            lr_factor: 0.5,
            lr_patience: 5,
            min_lr: 1e-5,
            seed: 42,
            val_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidTrainConfig(msg.to_string()));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return fail("learning_rate must be positive");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return fail("lr_factor must lie in (0, 1)");
        }
        if !self.min_lr.is_finite() || self.min_lr <= 0.0 {
            return fail("min_lr must be positive");
        }
        if self.early_stop_patience < 1 {
            return fail("early_stop_patience must be at least 1");
        }
        if self.lr_patience < 1 {
            return fail("lr_patience must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return fail("val_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Result of [`fit`]: the best-validation-accuracy checkpoint plus the full
/// per-epoch curve log.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub checkpoint: Checkpoint,
    pub curves: Vec<CurvePoint>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Mean of the per-example parameter gradients over one batch.
///
/// Examples fan out over worker lanes; each one derives its dropout
/// generator from `(seed, epoch, ordinal)` and the reduction runs in
/// example-index order, so the result is bit-identical for any lane count.
pub fn batch_mean_gradients(
    spec: &NetworkSpec,
    params: &Params<f32>,
    batch: &[&LabeledExample],
    seed: u64,
    epoch: u64,
    ordinal_base: u64,
) -> Result<Vec<Tensor<f32>>> {
    let n_classes = spec.output_classes();
    let per_example: Vec<Result<Vec<Tensor<f32>>>> =
        ordered_map_indexed(batch, |pos, example| {
            let mut dropout_rng = rng::dropout_rng(seed, epoch, ordinal_base + pos as u64);
            let (probs, cache) = network_forward(
                spec,
                params,
                example.image(),
                Mode::Train,
                Some(&mut dropout_rng),
            )?;
            let target = one_hot::<f32>(example.label(), n_classes)?;
            let grad_logits = softmax_xent_gradient(&probs, &target)?;
            network_backward(spec, params, &cache, &grad_logits)
        });

    let mut summed: Option<Vec<Tensor<f32>>> = None;
    for grads in per_example {
        let grads = grads?;
        summed = Some(match summed {
            None => grads,
            Some(acc) => acc
                .iter()
                .zip(&grads)
                .map(|(a, g)| a.add(g))
                .collect::<Result<Vec<_>>>()?,
        });
    }
    let summed = summed.ok_or(Error::EmptySplitPart("batch"))?;
    let scale = 1.0 / batch.len() as f32;
    Ok(summed.into_iter().map(|t| t.scale(scale)).collect())
}

/// Eval-mode mean loss and accuracy over a set of examples. The loss sum
/// accumulates in f64 in example order, so the value is lane-count
/// independent.
pub fn evaluate_examples(
    spec: &NetworkSpec,
    params: &Params<f32>,
    examples: &[LabeledExample],
) -> Result<(f32, f32)> {
    if examples.is_empty() {
        return Err(Error::EmptySplitPart("evaluation"));
    }
    let n_classes = spec.output_classes();
    let per_example: Vec<Result<(f64, bool)>> = ordered_map_indexed(examples, |_, example| {
        let probs = network_predict(spec, params, example.image())?;
        let target = one_hot::<f32>(example.label(), n_classes)?;
        let loss = cross_entropy_loss(&probs, &target)?;
        let correct = probs.argmax()? == example.label();
        Ok((loss as f64, correct))
    });
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    for r in per_example {
        let (loss, ok) = r?;
        loss_sum += loss;
        correct += usize::from(ok);
    }
    Ok((
        (loss_sum / examples.len() as f64) as f32,
        correct as f32 / examples.len() as f32,
    ))
}

/// Eval-mode argmax predictions for a set of examples.
pub fn predict_examples(
    spec: &NetworkSpec,
    params: &Params<f32>,
    examples: &[LabeledExample],
) -> Result<Vec<usize>> {
    ordered_map_indexed(examples, |_, example| {
        network_predict(spec, params, example.image())?.argmax()
    })
    .into_iter()
    .collect()
}

/// Mini-batch training loop.
///
/// Per epoch: shuffle the train part with the seeded shuffle stream, walk
/// batches of `batch_size` (the final short batch included), average each
/// batch's gradients and take one Adam step; then score train and validation
/// parts in eval mode, log a curve point, update the plateau scheduler, and
/// apply the early-stopping rule. Returns the parameters from the epoch with
/// the best validation accuracy (strict improvements only).
pub fn fit(spec: &NetworkSpec, split: &DatasetSplit, cfg: &TrainConfig) -> Result<FitReport> {
    fit_with_progress(spec, split, cfg, |_| {})
}

/// [`fit`] with a per-epoch callback (used by the CLI for stderr logs).
pub fn fit_with_progress(
    spec: &NetworkSpec,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&CurvePoint),
) -> Result<FitReport> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptySplitPart("train"));
    }
    if split.validation.is_empty() {
        return Err(Error::EmptySplitPart("validation"));
    }

    let mut init_rng = rng::init_rng(cfg.seed);
    let mut params = Params::<f32>::init(spec, &mut init_rng);
    let mut adam = AdamState::for_params(&params);
    let mut shuffle_rng = rng::shuffle_rng(cfg.seed);
    let mut scheduler = PlateauScheduler::new(
        cfg.learning_rate,
        cfg.lr_factor,
        cfg.lr_patience,
        cfg.min_lr,
    );
    let mut curves: Vec<CurvePoint> = Vec::new();
    let mut val_history: Vec<f32> = Vec::new();

    let snapshot = |params: &Params<f32>, adam: &AdamState<f32>, shuffle_rng: &rng::RunRng, epoch: u32, best: f32| {
        Checkpoint {
            spec: spec.clone(),
            params: params.clone(),
            adam: adam.clone(),
            rng: RngState {
                master_seed: cfg.seed,
                shuffle_word_pos: shuffle_rng.get_word_pos(),
            },
            epoch,
            best_value: best,
        }
    };

    let mut best_acc = f32::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_checkpoint = snapshot(&params, &adam, &shuffle_rng, 0, 0.0);

    let mut epochs_run = 0usize;
    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let lr = scheduler.current_lr();

        let mut ordinal_base = 0u64;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&LabeledExample> = chunk.iter().map(|&i| &split.train[i]).collect();
            let grads =
                batch_mean_gradients(spec, &params, &batch, cfg.seed, epoch as u64, ordinal_base)?;
            adam.apply(&mut params, &grads, lr)?;
            ordinal_base += batch.len() as u64;
        }

        let (train_loss, train_acc) = evaluate_examples(spec, &params, &split.train)?;
        let (val_loss, val_acc) = evaluate_examples(spec, &params, &split.validation)?;
        let point = CurvePoint {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            lr,
        };
        curves.push(point);
        on_epoch(&point);
        val_history.push(val_acc);

        if val_acc > best_acc {
            best_acc = val_acc;
            best_epoch = epoch;
            best_checkpoint = snapshot(&params, &adam, &shuffle_rng, epoch as u32, val_acc);
        }

        scheduler.observe(val_acc);
        if let StopDecision::Stop { best_epoch: stop_best } =
            early_stopping_check(&val_history, cfg.early_stop_patience)
        {
            debug_assert_eq!(stop_best, best_epoch);
            break;
        }
    }

    Ok(FitReport {
        checkpoint: best_checkpoint,
        curves,
        best_epoch,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LayerSpec, NetworkSpec, INPUT_SIZE};
    use crate::tensor::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    /// Small architecture over the production input size, for fast tests.
    fn small_spec(classes: usize) -> NetworkSpec {
        use LayerSpec::*;
        NetworkSpec::new(
            Shape::new(vec![INPUT_SIZE, INPUT_SIZE, 3]).unwrap(),
            vec![
                Conv { out_channels: 4, kernel: 5 },
                Relu,
                MaxPool { size: 2, stride: 2 },
                Dropout { rate: 0.25 },
                Flatten,
                Dense { units: 16 },
                Relu,
                Dense { units: classes },
                Softmax,
            ],
        )
        .unwrap()
    }

    /// Strongly color-separated classes; trivially learnable.
    fn toy_split(per_class: usize, classes: usize, seed: u64) -> DatasetSplit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut examples = Vec::new();
        for label in 0..classes {
            for i in 0..per_class {
                let mut data = Vec::with_capacity(INPUT_SIZE * INPUT_SIZE * 3);
                for _ in 0..INPUT_SIZE * INPUT_SIZE {
                    for ch in 0..3 {
                        let base = if ch == label % 3 { 0.8 } else { 0.15 };
                        let tweak = 0.1 * ((label / 3) as f32 + 1.0) * (ch as f32 + 1.0) / 4.0;
                        let noise: f32 = rng.random_range(-0.05..0.05);
                        data.push((base + tweak + noise).clamp(0.0, 1.0));
                    }
                }
                let image =
                    crate::tensor::Tensor::from_dims(vec![INPUT_SIZE, INPUT_SIZE, 3], data)
                        .unwrap();
                examples.push(
                    LabeledExample::new(image, label, PathBuf::from(format!("mem/{label}/{i}")))
                        .unwrap(),
                );
            }
        }
        let (train, validation, test) =
            crate::dataset::stratified_split(examples, 0.0, 0.25, seed).unwrap();
        DatasetSplit {
            train,
            validation,
            test,
            class_names: (0..classes).map(|c| format!("class_{c}")).collect(),
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let spec = small_spec(3);
        let split = toy_split(4, 3, 1);
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let report = fit(&spec, &split, &cfg).unwrap();
        assert!(report.curves.is_empty());
        assert_eq!(report.epochs_run, 0);
        let mut init_rng = rng::init_rng(cfg.seed);
        let expected = Params::<f32>::init(&spec, &mut init_rng);
        assert_eq!(report.checkpoint.params, expected);
    }

    #[test]
    fn empty_parts_rejected() {
        let spec = small_spec(3);
        let mut split = toy_split(4, 3, 1);
        split.validation.clear();
        assert!(matches!(
            fit(&spec, &split, &TrainConfig::default()),
            Err(Error::EmptySplitPart("validation"))
        ));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = small_spec(3);
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let r1 = fit(&spec, &toy_split(8, 3, 2), &cfg).unwrap();
        let r2 = fit(&spec, &toy_split(8, 3, 2), &cfg).unwrap();
        assert_eq!(r1.curves, r2.curves);
        assert_eq!(r1.checkpoint, r2.checkpoint);
    }

    #[test]
    fn toy_set_is_learnable() {
        let spec = small_spec(3);
        let split = toy_split(10, 3, 3);
        let cfg = TrainConfig {
            max_epochs: 25,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let report = fit(&spec, &split, &cfg).unwrap();
        let best = report
            .curves
            .iter()
            .map(|p| p.train_acc)
            .fold(0.0f32, f32::max);
        assert!(best >= 0.99, "train accuracy only reached {best}");
    }

    #[test]
    fn training_loss_trend_is_non_increasing() {
        // over any 20-epoch window the robust (median-of-3) loss level at
        // the end must not exceed the level at the start
        let spec = small_spec(3);
        let split = toy_split(10, 3, 6);
        let cfg = TrainConfig {
            max_epochs: 30,
            early_stop_patience: 100,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let report = fit(&spec, &split, &cfg).unwrap();
        assert_eq!(report.curves.len(), 30);
        let losses: Vec<f32> = report.curves.iter().map(|p| p.train_loss).collect();
        let median3 = |w: &[f32]| -> f32 {
            let mut v = [w[0], w[1], w[2]];
            v.sort_by(f32::total_cmp);
            v[1]
        };
        for start in 0..=losses.len() - 20 {
            let head = median3(&losses[start..start + 3]);
            let tail = median3(&losses[start + 17..start + 20]);
            assert!(
                tail <= head + 1e-4,
                "window {start}: loss rose from {head} to {tail}"
            );
        }
    }

    #[test]
    fn batch_gradients_are_chunking_invariant() {
        // mean over one batch == weighted mean over its sub-batches
        let spec = small_spec(3);
        let split = toy_split(4, 3, 4);
        let mut init_rng = rng::init_rng(7);
        let params = Params::<f32>::init(&spec, &mut init_rng);
        let batch: Vec<&LabeledExample> = split.train.iter().collect();
        let full = batch_mean_gradients(&spec, &params, &batch, 7, 0, 0).unwrap();
        let (a, b) = batch.split_at(batch.len() / 2);
        let ga = batch_mean_gradients(&spec, &params, a, 7, 0, 0).unwrap();
        let gb = batch_mean_gradients(&spec, &params, b, 7, 0, a.len() as u64).unwrap();
        for ((f, ga), gb) in full.iter().zip(&ga).zip(&gb) {
            let wa = a.len() as f32 / batch.len() as f32;
            let wb = b.len() as f32 / batch.len() as f32;
            for ((&fv, &av), &bv) in f.data().iter().zip(ga.data()).zip(gb.data()) {
                assert!((fv - (av * wa + bv * wb)).abs() < 1e-6);
            }
        }
    }
}
