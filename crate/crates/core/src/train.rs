//! Training loop: shuffled mini-batches, online augmentation, validation
//! MCC tracking with early stopping, plateau LR reduction and best-model
//! retention, plus the multi-run mean/SD protocol.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::adam::AdamState;
use crate::augment::{augment_sample, AugmentSpec};
use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::grey::GreyImage;
use crate::loss::{cross_entropy_loss, smoothed_targets, LossConfig};
use crate::mask::ClassMask;
use crate::metrics::{confusion_from_masks, mcc, ConfusionCounts, PositiveRule};
use crate::seeds::{self, stream};
use crate::tensor::{Shape, Tensor};
use crate::unet::{self, RunMode, UNetConfig, UNetParams};

/// An epoch counts as improving only if it beats the best MCC by this much.
pub const IMPROVEMENT_DELTA: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 8,
            learning_rate: 1e-3,
            early_stop_patience: 3,
            plateau_patience: 3,
            plateau_factor: 0.5,
            min_lr: 1e-6,
            runs: 1,
            base_seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0 < self.plateau_factor && self.plateau_factor < 1.0) {
            return Err(Error::Config(format!(
                "plateau factor must be in (0, 1), got {}",
                self.plateau_factor
            )));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// EarlyStopping + ReduceLROnPlateau + best-model tracking, decoupled from
/// the training loop so the scheduling rules are testable on their own.
#[derive(Clone, Debug)]
pub struct CallbackState {
    pub lr: f64,
    pub best_mcc: f64,
    pub best_epoch: usize,
    es_wait: usize,
    lr_wait: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CallbackDecision {
    pub improved: bool,
    pub stop: bool,
}

impl CallbackState {
    pub fn new(initial_lr: f64) -> Self {
        CallbackState {
            lr: initial_lr,
            best_mcc: f64::NEG_INFINITY,
            best_epoch: 0,
            es_wait: 0,
            lr_wait: 0,
        }
    }

    /// Feed one epoch's validation MCC; LR never increases and never drops
    /// below `min_lr`.
    pub fn observe(&mut self, epoch: usize, val_mcc: f64, cfg: &TrainConfig) -> CallbackDecision {
        if val_mcc >= self.best_mcc + IMPROVEMENT_DELTA {
            self.best_mcc = val_mcc;
            self.best_epoch = epoch;
            self.es_wait = 0;
            self.lr_wait = 0;
            return CallbackDecision {
                improved: true,
                stop: false,
            };
        }
        self.es_wait += 1;
        self.lr_wait += 1;
        if self.lr_wait > cfg.plateau_patience {
            self.lr = (self.lr * cfg.plateau_factor).max(cfg.min_lr);
            self.lr_wait = 0;
        }
        CallbackDecision {
            improved: false,
            stop: self.es_wait > cfg.early_stop_patience,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct EpochRow {
    pub run: usize,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_mcc: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub epochs_ran: usize,
    pub best_epoch: usize,
    pub best_val_mcc: f64,
    pub rows: Vec<EpochRow>,
    /// Filled in by the caller once the checkpoint is written to disk.
    pub checkpoint_path: Option<String>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TrainReport {
    pub runs: Vec<RunReport>,
    pub failed_runs: Vec<String>,
    pub mean_mcc: f64,
    pub sd_mcc: f64,
    /// True when at least one run aborted; the aggregate then covers only
    /// the completed runs.
    pub partial: bool,
}

/// Mean and population standard deviation.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

fn random_crop(sample: &Sample, crop: (usize, usize), rng: &mut impl Rng) -> Result<Sample> {
    let (h, w) = sample.image.dims();
    let (ch, cw) = crop;
    if h < ch || w < cw {
        return Err(Error::Config(format!(
            "training image {h}x{w} smaller than crop {ch}x{cw}"
        )));
    }
    if (h, w) == (ch, cw) {
        return Ok(sample.clone());
    }
    let oy = rng.random_range(0..=h - ch);
    let ox = rng.random_range(0..=w - cw);
    let mut image = GreyImage::zeros(ch, cw)?;
    let mut mask = ClassMask::zeros(ch, cw)?;
    for y in 0..ch {
        for x in 0..cw {
            image.set(y, x, sample.image.at(oy + y, ox + x));
            mask.set(y, x, sample.mask.at(oy + y, ox + x));
        }
    }
    Sample::new(image, mask, sample.source_id.clone())
}

fn batch_tensor(samples: &[Sample]) -> Result<(Tensor<f32>, Vec<&ClassMask>)> {
    let (h, w) = samples[0].image.dims();
    let mut data = Vec::with_capacity(samples.len() * h * w);
    for s in samples {
        if s.image.dims() != (h, w) {
            return Err(Error::Shape("batch images differ in size".into()));
        }
        data.extend_from_slice(s.image.data());
    }
    let tensor = Tensor::from_vec(Shape::new(samples.len(), 1, h, w), data)?;
    Ok((tensor, samples.iter().map(|s| &s.mask).collect()))
}

/// Pooled validation confusion counts (skyrmion positive) over full images.
pub fn validation_counts(
    params: &UNetParams<f32>,
    config: &UNetConfig,
    samples: &[Sample],
) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    let rule = PositiveRule::default();
    for s in samples {
        let pred = unet::predict(params, config, s.image.to_tensor())?;
        counts.merge(&confusion_from_masks(&pred, &s.mask, &rule)?);
    }
    Ok(counts)
}

/// One full training run. Returns the per-epoch report and the checkpoint
/// of the best-validation-MCC parameters seen.
pub fn fit(
    config: &UNetConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    augment: &AugmentSpec,
    run_index: usize,
) -> Result<(RunReport, Checkpoint)> {
    config.validate()?;
    train_cfg.validate()?;
    loss_cfg.validate(config.num_classes)?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config(
            "training and validation sets must be non-empty".into(),
        ));
    }
    for s in train_set.iter().chain(val_set) {
        if s.mask.max_class() as usize >= config.num_classes {
            return Err(Error::Config(format!(
                "sample {} holds class {} but the model has {} classes",
                s.source_id,
                s.mask.max_class(),
                config.num_classes
            )));
        }
    }

    let run_seed = train_cfg.base_seed + run_index as u64;
    let weights = loss_cfg.weights(config.num_classes);
    let mut params: UNetParams<f32> = unet::init_params(config, run_seed)?;
    let mut adam = AdamState::new(&params);
    let mut callbacks = CallbackState::new(train_cfg.learning_rate);
    let mut rows = Vec::new();
    // The retained checkpoint tracks the strict maximum MCC; the callbacks
    // use the 1e-4 improvement delta for scheduling only.
    let mut best: Option<Checkpoint> = None;
    let mut best_exact = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_ran = 0;

    for epoch in 1..=train_cfg.epochs {
        epochs_ran = epoch;
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seeds::rng(seeds::mix(&[
            run_seed,
            stream::SHUFFLE,
            epoch as u64,
        ])));

        let mut loss_sum = 0.0f64;
        let mut loss_pixels = 0.0f64;
        for (step, chunk) in order.chunks(train_cfg.batch_size).enumerate() {
            let mut batch = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let aug_seed = seeds::mix(&[run_seed, epoch as u64, idx as u64]);
                let augmented = augment_sample(&train_set[idx], augment, aug_seed)?;
                let mut crop_rng = seeds::rng(seeds::mix(&[
                    run_seed,
                    stream::CROP,
                    epoch as u64,
                    idx as u64,
                ]));
                batch.push(random_crop(&augmented, config.input_size, &mut crop_rng)?);
            }
            let (input, masks) = batch_tensor(&batch)?;
            let targets =
                smoothed_targets(&masks, config.num_classes, loss_cfg.smoothing_alpha)?;
            let fwd_seed = seeds::mix(&[run_seed, stream::DROPOUT, epoch as u64, step as u64]);
            let (probs, tape) =
                unet::forward(&params, config, input, RunMode::Train, fwd_seed)?;
            let out = cross_entropy_loss(&probs, &targets, &weights)?;
            if !out.loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch} step {step}"
                )));
            }
            let grads = unet::backward(&params, config, &tape, &out.grad_logits)?;
            adam.step(&mut params, &grads.params, callbacks.lr)?;
            let px = (chunk.len() * config.input_size.0 * config.input_size.1) as f64;
            loss_sum += out.loss * px;
            loss_pixels += px;
        }

        let val_mcc = mcc(&validation_counts(&params, config, val_set)?);
        rows.push(EpochRow {
            run: run_index,
            epoch,
            lr: callbacks.lr,
            train_loss: loss_sum / loss_pixels,
            val_mcc,
        });
        if val_mcc > best_exact {
            best_exact = val_mcc;
            best_epoch = epoch;
            best = Some(Checkpoint {
                config: config.clone(),
                params: params.clone(),
                meta: CheckpointMeta {
                    epoch,
                    best_val_mcc: val_mcc,
                    seed: run_seed,
                },
            });
        }
        let decision = callbacks.observe(epoch, val_mcc, train_cfg);
        if decision.stop {
            break;
        }
    }

    let best = best.ok_or_else(|| Error::Internal("no epoch ever completed".into()))?;
    Ok((
        RunReport {
            run: run_index,
            seed: run_seed,
            epochs_ran,
            best_epoch,
            best_val_mcc: best_exact,
            rows,
            checkpoint_path: None,
        },
        best,
    ))
}

/// The five-runs protocol: run `fit` with seeds base+0 … base+runs−1 and
/// aggregate the best validation MCCs (mean, population SD). A failed run
/// marks the report partial instead of discarding the others.
pub fn multi_run(
    config: &UNetConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    augment: &AugmentSpec,
) -> Result<(TrainReport, Vec<Checkpoint>)> {
    train_cfg.validate()?;
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    let mut checkpoints = Vec::new();
    for run_index in 0..train_cfg.runs {
        match fit(
            config, train_set, val_set, train_cfg, loss_cfg, augment, run_index,
        ) {
            Ok((report, ckpt)) => {
                runs.push(report);
                checkpoints.push(ckpt);
            }
            Err(e) => failed.push(format!("run {run_index}: {e}")),
        }
    }
    let mccs: Vec<f64> = runs.iter().map(|r| r.best_val_mcc).collect();
    let (mean, sd) = mean_and_sd(&mccs);
    Ok((
        TrainReport {
            partial: !failed.is_empty(),
            runs,
            failed_runs: failed,
            mean_mcc: mean,
            sd_mcc: sd,
        },
        checkpoints,
    ))
}

/// One CSV row per epoch per run.
pub fn report_csv(report: &TrainReport) -> String {
    let mut s = String::from("run,epoch,lr,train_loss,val_mcc\n");
    for run in &report.runs {
        for row in &run.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                row.run, row.epoch, row.lr, row.train_loss, row.val_mcc
            ));
        }
    }
    s
}
