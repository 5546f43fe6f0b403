//! Sample assembly and training.
//!
//! Each epoch shuffles the samples with a seeded permutation and walks them in
//! mini-batches (the last partial batch is kept). Per-sample gradients of a
//! batch are computed independently, possibly in parallel, and summed in batch
//! order, so results do not depend on the thread count. Every sample gets its
//! own dropout stream keyed by `(phase, epoch, target hour)`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureTable, Normalizer};
use crate::model::{GradientOptions, LossWeights, ModelConfig, ModelError, SampleGraph, SamplePlan, SbnModel};
use crate::nn::{adam_step, AdamState, Mode, NnError, Rng, Stream};
use crate::par::{self, Execution};
use crate::series::HourlySeries;

/// Batches per epoch of a five-year hourly training set with batch size 256:
/// `ceil((5·8760 − 516) / 256)`.
pub const REFERENCE_BATCHES_PER_EPOCH: usize = 170;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training samples: {0}")]
    NoSamples(String),
    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Model(ModelError::Nn(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    #[default]
    JointWeighted,
    FinalOnly,
    StagedFrozen,
    StagedUnfrozen,
}

impl TrainMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "joint_weighted" | "joint" => Some(Self::JointWeighted),
            "final_only" => Some(Self::FinalOnly),
            "staged_frozen" => Some(Self::StagedFrozen),
            "staged_unfrozen" => Some(Self::StagedUnfrozen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss_weight_final: f64,
    /// Applied to each non-final output individually.
    pub loss_weight_earlier: f64,
    pub base_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Per-epoch decay on the reference (five-year) dataset.
    pub reference_decay: f64,
    pub reference_batches_per_epoch: usize,
    pub seed: u64,
    pub mode: TrainMode,
    pub stop_history_gradients: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_weight_final: 0.9,
            loss_weight_earlier: 0.1,
            base_lr: 0.0025,
            batch_size: 256,
            epochs: 100,
            reference_decay: 0.98,
            reference_batches_per_epoch: REFERENCE_BATCHES_PER_EPOCH,
            seed: 0,
            mode: TrainMode::JointWeighted,
            stop_history_gradients: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("base_lr", self.base_lr),
            ("reference_decay", self.reference_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrainError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.reference_decay > 1.0 {
            return Err(TrainError::Config("reference_decay must not exceed 1".into()));
        }
        if self.loss_weight_final < 0.0 || self.loss_weight_earlier < 0.0 {
            return Err(TrainError::Config("loss weights must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if self.reference_batches_per_epoch == 0 {
            return Err(TrainError::Config("reference_batches_per_epoch must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training samples sharing one precomputed feature table.
#[derive(Debug, Clone)]
pub struct SampleSet {
    table: FeatureTable,
    plan: SamplePlan,
    targets: Vec<usize>,
    skipped: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn plan(&self) -> &SamplePlan {
        &self.plan
    }

    pub fn table(&self) -> &FeatureTable {
        &self.table
    }

    pub fn batches_per_epoch(&self, batch_size: usize) -> usize {
        self.targets.len().div_ceil(batch_size.max(1))
    }
}

/// One sample per target hour in `first..=last` whose graph only reads observed hours.
pub fn build_samples(
    series: &HourlySeries,
    config: &ModelConfig,
    normalizer: &Normalizer,
    first: usize,
    last: usize,
) -> Result<SampleSet, TrainError> {
    config.validate()?;
    let table = FeatureTable::build(series, normalizer);
    let plan = SamplePlan::new(config);
    let last = last.min(series.len().saturating_sub(1));
    if series.is_empty() || first > last {
        return Err(TrainError::NoSamples(format!(
            "empty target range {first}..={last} on a series of {} hours",
            series.len()
        )));
    }
    let feasible = par::map_indexed(Execution::default(), last - first + 1, |i| {
        plan.is_feasible(&table, first + i)
    });
    let targets: Vec<usize> = feasible
        .iter()
        .enumerate()
        .filter_map(|(i, &ok)| ok.then_some(first + i))
        .collect();
    let skipped = feasible.len() - targets.len();
    if targets.is_empty() {
        return Err(TrainError::NoSamples(format!(
            "none of the {} target hours in {first}..={last} has a complete history; \
             the earliest feasible target is hour {}",
            feasible.len(),
            config.required_history()
        )));
    }
    Ok(SampleSet {
        table,
        plan,
        targets,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub per_batch_decay: f64,
    /// Decay over one epoch of the dataset being trained on.
    pub per_epoch_factor: f64,
}

/// Per-batch decay chosen so one reference epoch decays by `reference_decay`.
pub fn lr_schedule(cfg: &TrainConfig, dataset_batches_per_epoch: usize) -> Result<Schedule, TrainError> {
    if dataset_batches_per_epoch == 0 || cfg.reference_batches_per_epoch == 0 {
        return Err(TrainError::Config("batches per epoch must be at least 1".into()));
    }
    let per_batch_decay = cfg.reference_decay.powf(1.0 / cfg.reference_batches_per_epoch as f64);
    Ok(Schedule {
        per_batch_decay,
        per_epoch_factor: per_batch_decay.powf(dataset_batches_per_epoch as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: usize,
    pub epoch: usize,
    /// Mean squared error of each stage output over the epoch (standardized, train mode).
    pub stage_mse: Vec<f64>,
    pub weighted_loss: f64,
    /// Learning rate of the last batch of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub records: Vec<EpochRecord>,
}

impl LossHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// CSV with columns `phase,epoch,mse_0..mse_S,weighted_loss,lr`. Shorter
    /// phases leave trailing stage columns empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let width = self.records.iter().map(|r| r.stage_mse.len()).max().unwrap_or(1);
        let stage_cols: Vec<String> = (0..width).map(|s| format!("mse_{s}")).collect();
        writeln!(out, "phase,epoch,{},weighted_loss,lr", stage_cols.join(","))?;
        for r in &self.records {
            let mut cols: Vec<String> = r.stage_mse.iter().map(|v| v.to_string()).collect();
            cols.resize(width, String::new());
            writeln!(out, "{},{},{},{},{}", r.phase, r.epoch, cols.join(","), r.weighted_loss, r.lr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SbnModel,
    pub history: LossHistory,
}

struct Phase<'a> {
    index: usize,
    weights: LossWeights,
    trainable: Option<Vec<bool>>,
    plan: &'a SamplePlan,
}

fn run_phase(
    model: &mut SbnModel,
    samples: &SampleSet,
    cfg: &TrainConfig,
    phase: Phase<'_>,
    exec: Execution,
    history: &mut LossHistory,
) -> Result<(), TrainError> {
    let n_params = model.parameter_count();
    let schedule = lr_schedule(cfg, samples.batches_per_epoch(cfg.batch_size))?;
    let mut adam = AdamState::new(n_params, cfg.base_lr, schedule.per_batch_decay)?;
    let opts = GradientOptions {
        stop_history: cfg.stop_history_gradients,
    };
    let shuffle_root = Rng::substream(cfg.seed, Stream::Shuffle).derive(&[phase.index as u64]);
    let dropout_root = Rng::substream(cfg.seed, Stream::Dropout).derive(&[phase.index as u64]);
    let n_out = model.stages.len() + 1;
    let weights = &phase.weights.0;
    let mut params = model.params();

    for epoch in 0..cfg.epochs {
        let mut order = samples.targets.clone();
        shuffle_root.derive(&[epoch as u64]).shuffle(&mut order);
        let mut sq_sum = vec![0.0; n_out];
        let mut lr = adam.current_lr();
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let current: &SbnModel = model;
            let results = par::map_slice(exec, batch, |&t| -> Result<(Vec<f64>, Vec<f64>), ModelError> {
                let mut rng = dropout_root.derive(&[epoch as u64, t as u64]);
                let graph = SampleGraph::forward(current, phase.plan, &samples.table, t, Mode::Train, &mut rng)?;
                let y = graph.target_actual();
                let outputs = graph.outputs();
                let out_grads: Vec<f64> = outputs
                    .iter()
                    .zip(weights)
                    .map(|(o, w)| 2.0 * w * (o - y) * scale)
                    .collect();
                let mut grads = vec![0.0; n_params];
                graph.backward(current, phase.plan, &out_grads, opts, &mut grads)?;
                let sq: Vec<f64> = outputs.iter().map(|o| (o - y) * (o - y)).collect();
                Ok((sq, grads))
            });
            let mut grads = vec![0.0; n_params];
            let mut batch_sq = vec![0.0; n_out];
            for r in results {
                let (sq, g) = r?;
                for (acc, v) in batch_sq.iter_mut().zip(&sq) {
                    *acc += v;
                }
                for (acc, v) in grads.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            let batch_loss: f64 = batch_sq.iter().zip(weights).map(|(s, w)| w * s * scale).sum();
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            for (acc, v) in sq_sum.iter_mut().zip(&batch_sq) {
                *acc += v;
            }
            lr = adam.current_lr();
            adam_step(&mut params, &grads, &mut adam, phase.trainable.as_deref()).map_err(|e| match e {
                NnError::Numeric(_) => TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                },
                other => other.into(),
            })?;
            model.set_params(&params)?;
        }
        let n = samples.len() as f64;
        let stage_mse: Vec<f64> = sq_sum.iter().map(|s| s / n).collect();
        let weighted_loss = stage_mse.iter().zip(weights).map(|(m, w)| w * m).sum();
        history.records.push(EpochRecord {
            phase: phase.index,
            epoch,
            stage_mse,
            weighted_loss,
            lr,
        });
    }
    Ok(())
}

fn check_samples(model: &SbnModel, samples: &SampleSet) -> Result<(), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::NoSamples("sample set is empty".into()));
    }
    if samples.plan.stage_count() != model.stages.len()
        || samples.plan != SamplePlan::new(model.config())
    {
        return Err(TrainError::Config("samples were built for a different model configuration".into()));
    }
    Ok(())
}

/// Trains according to `cfg.mode`.
pub fn train(model: SbnModel, samples: &SampleSet, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with(model, samples, cfg, Execution::default())
}

pub fn train_with(
    mut model: SbnModel,
    samples: &SampleSet,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_samples(&model, samples)?;
    let n_out = model.stages.len() + 1;
    let weights = match cfg.mode {
        TrainMode::JointWeighted => LossWeights::joint(n_out, cfg.loss_weight_earlier, cfg.loss_weight_final),
        TrainMode::FinalOnly => LossWeights::joint(n_out, 0.0, cfg.loss_weight_final),
        TrainMode::StagedFrozen | TrainMode::StagedUnfrozen => {
            return train_staged_with(model, samples, cfg, exec);
        }
    };
    let mut history = LossHistory::default();
    let plan = samples.plan.clone();
    run_phase(
        &mut model,
        samples,
        cfg,
        Phase {
            index: 0,
            weights,
            trainable: None,
            plan: &plan,
        },
        exec,
        &mut history,
    )?;
    Ok(TrainOutcome { model, history })
}

/// Instant forecaster first, then one booster at a time. `StagedFrozen` keeps
/// all earlier parameters fixed; any other mode keeps training them. Each
/// phase minimizes `loss_weight_final · mse` of its newest output with a fresh
/// optimizer.
pub fn train_staged(model: SbnModel, samples: &SampleSet, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_staged_with(model, samples, cfg, Execution::default())
}

pub fn train_staged_with(
    mut model: SbnModel,
    samples: &SampleSet,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    check_samples(&model, samples)?;
    let frozen = cfg.mode == TrainMode::StagedFrozen;
    let mut history = LossHistory::default();
    for k in 0..=model.stages.len() {
        let mut sub = model.prefix(k);
        let plan = SamplePlan::new(sub.config());
        let trainable = (frozen && k > 0).then(|| {
            let start = sub.param_offsets()[2 + (k - 1)];
            (0..sub.parameter_count()).map(|i| i >= start).collect()
        });
        run_phase(
            &mut sub,
            samples,
            cfg,
            Phase {
                index: k,
                weights: LossWeights::joint(k + 1, 0.0, cfg.loss_weight_final),
                trainable,
                plan: &plan,
            },
            exec,
            &mut history,
        )?;
        model.absorb_prefix(&sub)?;
    }
    Ok(TrainOutcome { model, history })
}

/// Per-stage mean squared error over the samples in inference mode (standardized units).
pub fn evaluate_samples(model: &SbnModel, samples: &SampleSet) -> Result<Vec<f64>, TrainError> {
    check_samples(model, samples)?;
    let mut rng = Rng::new(0);
    let n_out = model.stages.len() + 1;
    let mut sums = vec![0.0; n_out];
    for &t in &samples.targets {
        let g = SampleGraph::forward(model, &samples.plan, &samples.table, t, Mode::Infer, &mut rng)?;
        let y = g.target_actual();
        for (s, o) in sums.iter_mut().zip(g.outputs()) {
            *s += (o - y) * (o - y);
        }
    }
    Ok(sums.iter().map(|s| s / samples.len() as f64).collect())
}
