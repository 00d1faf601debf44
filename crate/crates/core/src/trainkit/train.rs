use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::{backward, build_model, forward, forward_pass, ImageSet, ModelDef, ModelParams, Result, TrainError};
use crate::optim::{adam_update, bce_loss, compute_metrics, AdamState, MetricsReport};
use crate::rng::{splitmix64, SplitMix64};
use crate::tensor::{Element, Mode};

/// Batch size used for inference passes. Results do not depend on it;
/// small batches keep buffers small enough for the allocator to reuse.
pub const EVAL_BATCH: usize = 1;

/// Sampler stream is kept apart from the initialisation stream.
const SAMPLER_STREAM: u64 = 0x5341_4d50_4c45_5231;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Adam => "adam",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adam" => Ok(Self::Adam),
            other => Err(format!("unknown optimizer `{other}` (only `adam` is supported)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub steps_per_epoch: u32,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            epochs: 50,
            steps_per_epoch: 15,
            optimizer: Optimizer::Adam,
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.steps_per_epoch == 0 {
            return bad("steps per epoch must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        Ok(())
    }

    /// One-line run header.
    pub fn header(&self) -> String {
        format!(
            "lr={} batch={} epochs={} steps={} optimizer={}",
            self.learning_rate, self.batch_size, self.epochs, self.steps_per_epoch, self.optimizer
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub val_precision: f64,
    pub val_recall: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub rows: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.rows.last()
    }
}

/// Seeded shuffle that reshuffles and wraps around when exhausted.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: SplitMix64,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        Self { order, cursor: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.cursor == self.order.len() {
                    self.rng.shuffle(&mut self.order);
                    self.cursor = 0;
                }
                self.cursor += 1;
                self.order[self.cursor - 1]
            })
            .collect()
    }
}

/// Inference-mode probabilities for every item, in order.
pub fn predict<T: Element>(def: &ModelDef, params: &ModelParams<T>, set: &ImageSet, batch_size: usize) -> Result<Vec<T>> {
    let batch_size = batch_size.max(1);
    let indices: Vec<usize> = (0..set.len()).collect();
    let chunks = indices
        .par_chunks(batch_size)
        .map(|chunk| {
            let x = set.batch::<T>(chunk)?;
            Ok(forward(def, params, &x, Mode::Inference)?.into_data())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

pub fn evaluate<T: Element>(
    def: &ModelDef,
    params: &ModelParams<T>,
    set: &ImageSet,
    threshold: f64,
    batch_size: usize,
) -> Result<MetricsReport> {
    if set.is_empty() {
        return Err(TrainError::EmptyFold("evaluation"));
    }
    let probs = predict(def, params, set, batch_size)?;
    let labels: Vec<T> = set.labels().iter().map(|&l| T::from_f64(f64::from(l))).collect();
    Ok(compute_metrics(&probs, &labels, threshold)?)
}

/// Trains from a seeded initialisation. `seconds` is recorded as 0 so that
/// histories are reproducible; see [`train_observed`] for timing.
pub fn train(
    def: &ModelDef,
    config: &TrainConfig,
    train_set: &ImageSet,
    val_set: &ImageSet,
) -> Result<(ModelParams<f32>, TrainHistory)> {
    train_observed(def, config, train_set, val_set, false, |_| {})
}

/// [`train`] with optional wall-clock timing and a per-epoch callback.
pub fn train_observed(
    def: &ModelDef,
    config: &TrainConfig,
    train_set: &ImageSet,
    val_set: &ImageSet,
    record_timing: bool,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams<f32>, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyFold("training"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptyFold("validation"));
    }
    let mut params: ModelParams<f32> = build_model(def, config.seed)?;
    let mut learnable = params.learnable();
    let mut adam = AdamState::new(config.learning_rate, &learnable);
    let mut sampler = BatchSampler::new(train_set.len(), splitmix64(config.seed ^ SAMPLER_STREAM));
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        for step in 1..=config.steps_per_epoch {
            let idx = sampler.next_batch(config.batch_size);
            let x = train_set.batch::<f32>(&idx)?;
            let y: Vec<f32> = idx.iter().map(|&i| train_set.labels()[i]).collect();
            let pass = forward_pass(def, &params, &x, Mode::Training, true)?;
            let (loss, grad) = bce_loss(&pass.probabilities, &y)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, step, loss });
            }
            let grads = backward(&params, &pass, &grad)?;
            params.norms = pass.norms;
            adam_update(&mut learnable, &grads, &mut adam)?;
            params.set_learnable(learnable.clone())?;
        }
        let tr = evaluate(def, &params, train_set, config.threshold, EVAL_BATCH)?;
        let va = evaluate(def, &params, val_set, config.threshold, EVAL_BATCH)?;
        let row = EpochRecord {
            epoch,
            train_loss: tr.loss,
            train_acc: tr.accuracy,
            val_loss: va.loss,
            val_acc: va.accuracy,
            val_precision: va.precision,
            val_recall: va.recall,
            seconds: if record_timing { started.elapsed().as_secs_f64() } else { 0.0 },
        };
        on_epoch(&row);
        history.rows.push(row);
    }
    Ok((params, history))
}
