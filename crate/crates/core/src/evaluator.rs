//! Rolling-origin evaluation, the seasonal-naive baseline and sweeps.
//!
//! Forecast origins sit at midnights in the evaluation range, one every
//! `ceil(H / 24)` days for horizon `H`, so every evaluation hour is predicted by
//! exactly one rollout. The pooled error covers the same hours for every
//! horizon, which makes the instant forecaster's score horizon-invariant.

use std::io::Write;

use chrono::Timelike;
use serde::Serialize;
use thiserror::Error;

use crate::features::{FeatureError, FeatureTable, Normalizer};
use crate::model::{Forecaster, ModelConfig, ModelError, SbnModel};
use crate::par::{self, Execution};
use crate::series::HourlySeries;
use crate::trainer::{self, TrainConfig, TrainError, TrainMode};

pub const WEEK_HOURS: usize = 168;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no predictions to score")]
    Empty,
    #[error("length mismatch: {0} predictions, {1} actuals")]
    Length(usize, usize),
    #[error("actual values have zero range")]
    ZeroRange,
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// RMSE over range, or the squared error over range for comparison with
/// scores computed that way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum NrmseKind {
    #[default]
    Rmse,
    LiteralMse,
}

pub fn nrmse(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    nrmse_with(pred, actual, NrmseKind::Rmse)
}

pub fn nrmse_with(pred: &[f64], actual: &[f64], kind: NrmseKind) -> Result<f64, EvalError> {
    if pred.len() != actual.len() {
        return Err(EvalError::Length(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let (lo, hi) = actual
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(EvalError::ZeroRange);
    }
    let mse = pred.iter().zip(actual).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / pred.len() as f64;
    Ok(match kind {
        NrmseKind::Rmse => mse.sqrt() / range,
        NrmseKind::LiteralMse => mse / range,
    })
}

/// Energy one whole number of weeks before `hour`, far enough back to be known
/// at a forecast `lead` hours ahead.
pub fn seasonal_naive(series: &HourlySeries, hour: usize, lead: usize) -> Option<f64> {
    let weeks = lead.max(1).div_ceil(WEEK_HOURS);
    let lag = hour.checked_sub(weeks * WEEK_HOURS)?;
    series.is_valid(lag).then(|| series.energy()[lag])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub horizon: usize,
    /// Evaluation hours are `start..end` of the series.
    pub start: usize,
    pub end: usize,
    pub kind: NrmseKind,
    pub exec: Execution,
}

impl EvalConfig {
    pub fn new(horizon: usize, start: usize, end: usize) -> Self {
        Self {
            horizon,
            start,
            end,
            kind: NrmseKind::Rmse,
            exec: Execution::default(),
        }
    }

    pub fn origin_spacing(&self) -> usize {
        self.horizon.div_ceil(24).max(1) * 24
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    /// Last observed hour.
    pub origin: usize,
    pub hour: usize,
    pub lead: usize,
    pub actual: f64,
    /// `ŷ₀ … ŷ_S`, kWh.
    pub forecasts: Vec<f64>,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    /// Pooled NRMSE of `ŷ₀ … ŷ_S`, as fractions.
    pub stage_nrmse: Vec<f64>,
    pub baseline_nrmse: f64,
    pub n_origins: usize,
    pub n_predictions: usize,
    pub rows: Vec<PredictionRow>,
}

impl EvalReport {
    pub fn final_nrmse(&self) -> f64 {
        *self.stage_nrmse.last().expect("at least one stage")
    }

    pub fn write_predictions_csv<W: Write>(&self, series: &HourlySeries, mut out: W) -> std::io::Result<()> {
        write!(out, "origin,timestamp,lead,actual")?;
        for l in &self.labels {
            write!(out, ",{l}")?;
        }
        writeln!(out, ",seasonal_naive")?;
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{}",
                series.timestamp(r.origin).format(crate::io::TIMESTAMP_FORMAT),
                series.timestamp(r.hour).format(crate::io::TIMESTAMP_FORMAT),
                r.lead,
                r.actual
            )?;
            for f in &r.forecasts {
                write!(out, ",{f}")?;
            }
            writeln!(out, ",{}", r.baseline)?;
        }
        Ok(())
    }
}

/// Stage labels `instant`, `+weekly`, … for the cumulative forecasts.
pub fn stage_labels(config: &ModelConfig) -> Vec<String> {
    std::iter::once("instant".to_string())
        .chain(config.stages.iter().map(|s| format!("+{}", s.kind)))
        .collect()
}

/// Rollout origins: the hour before each scheduled midnight in `start..end`.
pub fn origins(series: &HourlySeries, cfg: &EvalConfig, earliest: usize) -> Vec<usize> {
    let end = cfg.end.min(series.len());
    let first_midnight = (cfg.start..end).find(|&h| series.timestamp(h).hour() == 0);
    let Some(first) = first_midnight else {
        return Vec::new();
    };
    (first..end)
        .step_by(cfg.origin_spacing())
        .filter_map(|m| m.checked_sub(1))
        .filter(|&o| o >= earliest)
        .collect()
}

pub fn rolling_evaluate(model: &SbnModel, series: &HourlySeries, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    if cfg.horizon == 0 {
        return Err(EvalError::Config("horizon must be positive".into()));
    }
    if cfg.start >= cfg.end.min(series.len()) {
        return Err(EvalError::Config(format!(
            "evaluation range {}..{} is empty for a series of {} hours",
            cfg.start,
            cfg.end,
            series.len()
        )));
    }
    let end = cfg.end.min(series.len());
    let table = FeatureTable::build_with(series, &model.normalizer, cfg.exec);
    let fc = Forecaster::from_table(model, table)?;
    let origins = origins(series, cfg, fc.earliest_origin());
    let per_origin = par::map_slice(cfg.exec, &origins, |&origin| -> Result<Vec<PredictionRow>, EvalError> {
        let horizon = cfg.horizon.min(end - 1 - origin);
        let mut rows = Vec::with_capacity(horizon);
        for (i, f) in fc.rollout(origin, horizon)?.into_iter().enumerate() {
            let hour = origin + 1 + i;
            let lead = i + 1;
            let (Some(f), true) = (f, series.is_valid(hour)) else {
                continue;
            };
            let Some(baseline) = seasonal_naive(series, hour, lead) else {
                continue;
            };
            rows.push(PredictionRow {
                origin,
                hour,
                lead,
                actual: series.energy()[hour],
                forecasts: f.forecasts,
                baseline,
            });
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_origin {
        rows.extend(r?);
    }
    if rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let n_out = model.stages.len() + 1;
    let stage_nrmse = (0..n_out)
        .map(|s| {
            let pred: Vec<f64> = rows.iter().map(|r| r.forecasts[s]).collect();
            nrmse_with(&pred, &actual, cfg.kind)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let base: Vec<f64> = rows.iter().map(|r| r.baseline).collect();
    Ok(EvalReport {
        labels: stage_labels(model.config()),
        stage_nrmse,
        baseline_nrmse: nrmse_with(&base, &actual, cfg.kind)?,
        n_origins: origins.len(),
        n_predictions: rows.len(),
        rows,
    })
}

/// Hours in a training-size label: `6mo`, `1y`, `90d`, `500h`.
pub fn parse_size(label: &str) -> Option<usize> {
    let label = label.trim();
    let split = label.find(|c: char| !c.is_ascii_digit())?;
    let n: usize = label[..split].parse().ok()?;
    let unit = match &label[split..] {
        "y" => 8760,
        "mo" => 730,
        "w" => 168,
        "d" => 24,
        "h" => 1,
        _ => return None,
    };
    (n > 0).then_some(n * unit)
}

/// Model configurations trained on several training-set sizes and scored at
/// several horizons.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub configs: Vec<ModelConfig>,
    /// Label and length in hours, taken from the end of the training range.
    pub train_sizes: Vec<(String, usize)>,
    pub horizons: Vec<usize>,
    pub train: TrainConfig,
    /// Training hours are `..train_end`.
    pub train_end: usize,
    pub eval_start: usize,
    pub eval_end: usize,
    pub kind: NrmseKind,
    pub keep_models: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub model: String,
    pub parameters: usize,
    pub train_size: String,
    pub horizon: usize,
    /// Pooled NRMSE of the final forecast, fraction; `None` when the cell failed.
    pub nrmse: Option<f64>,
    pub baseline_nrmse: Option<f64>,
    pub stage_nrmse: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// Trained models by (model label, size label), when requested.
    pub models: Vec<(String, String, SbnModel)>,
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "failed".to_string(), |v| format!("{:.2}", 100.0 * v))
}

impl SweepResult {
    pub fn find(&self, model: &str, train_size: &str, horizon: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.train_size == train_size && c.horizon == horizon)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    /// Long format, one row per cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "model,parameters,train_size,horizon,nrmse_percent,baseline_percent,error")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.model,
                c.parameters,
                c.train_size,
                c.horizon,
                percent(c.nrmse),
                percent(c.baseline_nrmse),
                c.error.as_deref().unwrap_or("").replace(',', ";")
            )?;
        }
        Ok(())
    }

    fn models(&self) -> Vec<(String, usize)> {
        let mut models: Vec<(String, usize)> = Vec::new();
        for c in &self.cells {
            if !models.iter().any(|(m, _)| *m == c.model) {
                models.push((c.model.clone(), c.parameters));
            }
        }
        models
    }

    fn pivot<'a, W: Write>(
        &'a self,
        mut out: W,
        corner: &str,
        columns: &[String],
        cell: impl Fn(&str, usize) -> Option<&'a SweepCell>,
    ) -> std::io::Result<()> {
        write!(out, "{corner},parameters")?;
        for c in columns {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
        for (m, p) in self.models() {
            write!(out, "{m},{p}")?;
            for i in 0..columns.len() {
                write!(out, ",{}", cell(&m, i).map_or("-".to_string(), |c| percent(c.nrmse)))?;
            }
            writeln!(out)?;
        }
        write!(out, "seasonal-naive,0")?;
        for i in 0..columns.len() {
            let base = self
                .models()
                .iter()
                .find_map(|(m, _)| cell(m, i).and_then(|c| c.baseline_nrmse));
            write!(out, ",{}", percent(base))?;
        }
        writeln!(out)
    }

    fn sizes(&self) -> Vec<String> {
        let mut sizes = Vec::new();
        for c in &self.cells {
            if !sizes.contains(&c.train_size) {
                sizes.push(c.train_size.clone());
            }
        }
        sizes
    }

    fn horizons(&self) -> Vec<usize> {
        let mut hs = Vec::new();
        for c in &self.cells {
            if !hs.contains(&c.horizon) {
                hs.push(c.horizon);
            }
        }
        hs
    }

    /// Models by training size at one horizon, NRMSE in percent.
    pub fn write_size_table<W: Write>(&self, horizon: usize, out: W) -> std::io::Result<()> {
        let sizes = self.sizes();
        self.pivot(out, "method/training size", &sizes, |m, i| self.find(m, &sizes[i], horizon))
    }

    /// Models by horizon at one training size, NRMSE in percent.
    pub fn write_horizon_table<W: Write>(&self, train_size: &str, out: W) -> std::io::Result<()> {
        let hs = self.horizons();
        let labels: Vec<String> = hs.iter().map(|h| format!("{h}h")).collect();
        self.pivot(out, "method/horizon", &labels, |m, i| self.find(m, train_size, hs[i]))
    }
}

/// Trains one model on the last `size` hours before `train_end`, normalizer
/// fitted on the same window.
pub fn train_on_window(
    series: &HourlySeries,
    config: &ModelConfig,
    train: &TrainConfig,
    train_end: usize,
    size: usize,
    exec: Execution,
) -> Result<SbnModel, EvalError> {
    let start = train_end
        .checked_sub(size)
        .ok_or_else(|| EvalError::Config(format!("training size {size} h exceeds the {train_end} training hours")))?;
    let window = series.slice(start, train_end).map_err(|e| EvalError::Config(e.to_string()))?;
    let norm = Normalizer::fit(&window, 0, window.len())?;
    let samples = trainer::build_samples(&window, config, &norm, 0, window.len())?;
    let model = SbnModel::init(config.clone(), norm, train.seed)?;
    let outcome = match train.mode {
        TrainMode::StagedFrozen | TrainMode::StagedUnfrozen => trainer::train_staged_with(model, &samples, train, exec)?,
        _ => trainer::train_with(model, &samples, train, exec)?,
    };
    Ok(outcome.model)
}

/// Every (configuration, size) pair is trained once and scored at every
/// horizon. Jobs run in parallel; a failing job marks its cells and the rest
/// carry on.
pub fn sweep(series: &HourlySeries, spec: &SweepSpec, exec: Execution) -> SweepResult {
    let jobs: Vec<(&ModelConfig, &(String, usize))> = spec
        .configs
        .iter()
        .flat_map(|c| spec.train_sizes.iter().map(move |s| (c, s)))
        .collect();
    let results = par::map_slice(exec, &jobs, |&(config, (label, size))| {
        let cell = |scores: Result<EvalReport, String>, h: usize| SweepCell {
            model: config.label(),
            parameters: config.parameter_count(),
            train_size: label.clone(),
            horizon: h,
            nrmse: scores.as_ref().ok().map(EvalReport::final_nrmse),
            baseline_nrmse: scores.as_ref().ok().map(|r| r.baseline_nrmse),
            stage_nrmse: scores.as_ref().map(|r| r.stage_nrmse.clone()).unwrap_or_default(),
            error: scores.err(),
        };
        let model = match train_on_window(series, config, &spec.train, spec.train_end, *size, exec) {
            Ok(m) => m,
            Err(e) => return (spec.horizons.iter().map(|&h| cell(Err(e.to_string()), h)).collect(), None),
        };
        let cells: Vec<SweepCell> = spec
            .horizons
            .iter()
            .map(|&h| {
                let cfg = EvalConfig {
                    kind: spec.kind,
                    exec,
                    ..EvalConfig::new(h, spec.eval_start, spec.eval_end)
                };
                cell(rolling_evaluate(&model, series, &cfg).map_err(|e| e.to_string()), h)
            })
            .collect();
        (cells, spec.keep_models.then(|| (config.label(), label.clone(), model)))
    });
    let mut out = SweepResult::default();
    for (cells, model) in results {
        out.cells.extend(cells);
        out.models.extend(model);
    }
    out
}
