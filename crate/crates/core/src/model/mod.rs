//! The stacked booster network.
//!
//! An instant forecaster maps exogenous features to a load forecast `ŷ₀`.
//! Each booster stage `s` reads a window of the previous stage's residuals
//! (`r = forecast − actual`) at its period (168 h, 24 h or 1 h) and estimates
//! the residual `ê_s` of the current hour, giving `ŷ_s = ŷ_{s−1} − ê_s`.
//! Every stage is one weight set shared across all hours it is applied to.
//!
//! Flat parameter layout: temperature reducer (12 weights, 1 bias), then the
//! instant head layer by layer, then each stage net in stacking order. Within a
//! layer, weights are row-major `(out, in)` followed by biases.

mod graph;
mod inference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Normalizer, StageKind, CALENDAR_INPUTS, INSTANT_INPUTS, TEMP_WINDOW};
use crate::nn::{init_glorot, Activation, DenseLayer, DenseNet, Matrix, Mode, NnError, Rng, Stream};

pub use graph::{GradientOptions, LossWeights, SampleGraph, SamplePlan};
pub use inference::{forecast, historical_residuals, Forecaster, HourForecast, Tracks};

pub const HIDDEN_UNITS: usize = 32;
pub const DEFAULT_DROPOUT: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("insufficient history: origin {origin} is too early, earliest feasible origin is hour {earliest}")]
    InsufficientHistory { origin: usize, earliest: usize },
    #[error("hour {0} lacks the data needed for a forecast")]
    Unavailable(usize),
    #[error("horizon must be at least one hour (got {0})")]
    Horizon(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub kind: StageKind,
    pub n_inputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub stages: Vec<StageSpec>,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_hidden() -> usize {
    HIDDEN_UNITS
}

fn default_dropout() -> f64 {
    DEFAULT_DROPOUT
}

/// Window length of a booster. A booster alone sees the full window; inside a
/// stack the weekly and daily boosters see one residual fewer, the hourly
/// booster always sees 24.
pub fn default_inputs(kind: StageKind, stacked: bool) -> usize {
    match (kind, stacked) {
        (StageKind::Weekly, false) => 3,
        (StageKind::Weekly, true) => 2,
        (StageKind::Daily, false) => 7,
        (StageKind::Daily, true) => 6,
        (StageKind::Hourly, _) => 24,
    }
}

impl ModelConfig {
    pub fn instant_only() -> Self {
        Self {
            stages: Vec::new(),
            hidden_units: HIDDEN_UNITS,
            dropout: DEFAULT_DROPOUT,
        }
    }

    /// Boosters in weekly → daily → hourly order with default window lengths.
    pub fn from_boosters(kinds: &[StageKind]) -> Result<Self, ModelError> {
        let stacked = kinds.len() > 1;
        let stages = kinds
            .iter()
            .map(|&kind| StageSpec {
                kind,
                n_inputs: default_inputs(kind, stacked),
            })
            .collect();
        let cfg = Self {
            stages,
            ..Self::instant_only()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_units == 0 {
            return Err(ModelError::Config("hidden_units must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        for pair in self.stages.windows(2) {
            if pair[0].kind >= pair[1].kind {
                return Err(ModelError::Config(format!(
                    "stages must be distinct and ordered weekly, daily, hourly (got {} before {})",
                    pair[0].kind, pair[1].kind
                )));
            }
        }
        if let Some(s) = self.stages.iter().find(|s| s.n_inputs == 0) {
            return Err(ModelError::Config(format!("{} booster needs at least one input", s.kind)));
        }
        Ok(())
    }

    /// Furthest hour back any residual window reaches, counted from the target.
    pub fn lag_depth(&self) -> usize {
        self.stages.iter().map(|s| s.kind.period_hours() * s.n_inputs).sum()
    }

    /// Hours of history a target needs: the lag depth plus the temperature window.
    pub fn required_history(&self) -> usize {
        self.lag_depth() + TEMP_WINDOW
    }

    pub fn parameter_count(&self) -> usize {
        let h = self.hidden_units;
        let instant = (TEMP_WINDOW + 1) + h * (1 + CALENDAR_INPUTS + 1) + (h + 1);
        instant + self.stages.iter().map(|s| h * (s.n_inputs + 1) + h + 1).sum::<usize>()
    }

    /// Trainable layers along the deepest path: reducer, hidden and output of
    /// the instant forecaster, plus two per booster.
    pub fn layer_count(&self) -> usize {
        3 + 2 * self.stages.len()
    }

    pub fn label(&self) -> String {
        if self.stages.is_empty() {
            "instant".to_string()
        } else {
            self.stages.iter().map(|s| s.kind.name()).collect::<Vec<_>>().join("+")
        }
    }

    /// Same config restricted to the first `k` stages.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            stages: self.stages[..k.min(self.stages.len())].to_vec(),
            ..self.clone()
        }
    }
}

fn check_row(row: &[f64]) -> Result<(), ModelError> {
    if row.len() != INSTANT_INPUTS {
        return Err(ModelError::Config(format!(
            "instant forecaster expects {INSTANT_INPUTS} inputs, got {}",
            row.len()
        )));
    }
    Ok(())
}

/// Linear 12→1 temperature reducer feeding a 5→32→1 head.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantForecaster {
    pub reducer: DenseNet,
    pub head: DenseNet,
}

impl InstantForecaster {
    fn new(hidden: usize, dropout: f64) -> Result<Self, ModelError> {
        let reducer = DenseNet::new(vec![DenseLayer::new(TEMP_WINDOW, 1, Activation::Linear, 0.0)?])?;
        let head = DenseNet::mlp(1 + CALENDAR_INPUTS, &[hidden], 1, dropout)?;
        Ok(Self { reducer, head })
    }

    pub fn parameter_count(&self) -> usize {
        self.reducer.parameter_count() + self.head.parameter_count()
    }

    /// Standardized forecast from a flat feature row (temperatures, day type, hour).
    pub fn forward(&self, row: &[f64], mode: Mode, rng: &mut Rng) -> Result<f64, ModelError> {
        if mode == Mode::Infer {
            return self.predict(row);
        }
        check_row(row)?;
        let (z, _) = self
            .reducer
            .forward_batch(&Matrix::row_vector(&row[..TEMP_WINDOW]), mode, rng)?;
        let mut head_in = [0.0; 1 + CALENDAR_INPUTS];
        head_in[0] = z.as_slice()[0];
        head_in[1..].copy_from_slice(&row[TEMP_WINDOW..TEMP_WINDOW + CALENDAR_INPUTS]);
        let (y, _) = self.head.forward_batch(&Matrix::row_vector(&head_in), mode, rng)?;
        Ok(y.as_slice()[0])
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64, ModelError> {
        check_row(row)?;
        let z = self.reducer.predict(&row[..TEMP_WINDOW])?[0];
        let mut head_in = [0.0; 1 + CALENDAR_INPUTS];
        head_in[0] = z;
        head_in[1..].copy_from_slice(&row[TEMP_WINDOW..TEMP_WINDOW + CALENDAR_INPUTS]);
        Ok(self.head.predict(&head_in)?[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoosterStage {
    pub kind: StageKind,
    pub n_inputs: usize,
    pub net: DenseNet,
}

impl BoosterStage {
    pub fn period_hours(&self) -> usize {
        self.kind.period_hours()
    }

    pub fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    /// Residual estimate from a window of previous-stage residuals, oldest first.
    pub fn forward(&self, window: &[f64], mode: Mode, rng: &mut Rng) -> Result<f64, ModelError> {
        if window.len() != self.n_inputs {
            return Err(ModelError::Config(format!(
                "{} booster expects {} residuals, got {}",
                self.kind,
                self.n_inputs,
                window.len()
            )));
        }
        if mode == Mode::Infer {
            return Ok(self.net.predict(window)?[0]);
        }
        let (y, _) = self.net.forward_batch(&Matrix::row_vector(window), mode, rng)?;
        Ok(y.as_slice()[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbnModel {
    config: ModelConfig,
    pub instant: InstantForecaster,
    pub stages: Vec<BoosterStage>,
    pub normalizer: Normalizer,
}

impl SbnModel {
    /// All parameters zero.
    pub fn zeros(config: ModelConfig, normalizer: Normalizer) -> Result<Self, ModelError> {
        config.validate()?;
        let instant = InstantForecaster::new(config.hidden_units, config.dropout)?;
        let stages = config
            .stages
            .iter()
            .map(|s| {
                Ok(BoosterStage {
                    kind: s.kind,
                    n_inputs: s.n_inputs,
                    net: DenseNet::mlp(s.n_inputs, &[config.hidden_units], 1, config.dropout)?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Self {
            config,
            instant,
            stages,
            normalizer,
        })
    }

    /// Glorot-initialized model drawn from the weight-init stream of `seed`.
    pub fn init(config: ModelConfig, normalizer: Normalizer, seed: u64) -> Result<Self, ModelError> {
        let mut model = Self::zeros(config, normalizer)?;
        let mut rng = Rng::substream(seed, Stream::WeightInit);
        init_glorot(&mut model.instant.reducer, &mut rng);
        init_glorot(&mut model.instant.head, &mut rng);
        for stage in &mut model.stages {
            init_glorot(&mut stage.net, &mut rng);
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn parameter_count(&self) -> usize {
        self.instant.parameter_count() + self.stages.iter().map(BoosterStage::parameter_count).sum::<usize>()
    }

    pub fn layer_count(&self) -> usize {
        self.instant.reducer.layers().len()
            + self.instant.head.layers().len()
            + self.stages.iter().map(|s| s.net.layers().len()).sum::<usize>()
    }

    fn nets(&self) -> impl Iterator<Item = &DenseNet> {
        [&self.instant.reducer, &self.instant.head]
            .into_iter()
            .chain(self.stages.iter().map(|s| &s.net))
    }

    fn nets_mut(&mut self) -> impl Iterator<Item = &mut DenseNet> {
        [&mut self.instant.reducer, &mut self.instant.head]
            .into_iter()
            .chain(self.stages.iter_mut().map(|s| &mut s.net))
    }

    /// Start offsets of reducer, head and each stage in the flat layout.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 + self.stages.len());
        let mut off = 0;
        for net in self.nets() {
            out.push(off);
            off += net.parameter_count();
        }
        out
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.parameter_count()];
        let mut off = 0;
        for net in self.nets() {
            let n = net.parameter_count();
            net.write_params(&mut out[off..off + n]);
            off += n;
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), ModelError> {
        if params.len() != self.parameter_count() {
            return Err(ModelError::Config(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for net in self.nets_mut() {
            let n = net.parameter_count();
            net.read_params(&params[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Model with only the first `k` stages, sharing this model's weights.
    pub fn prefix(&self, k: usize) -> Self {
        let k = k.min(self.stages.len());
        Self {
            config: self.config.prefix(k),
            instant: self.instant.clone(),
            stages: self.stages[..k].to_vec(),
            normalizer: self.normalizer,
        }
    }

    /// Copies the weights of a prefix model back into this model.
    pub fn absorb_prefix(&mut self, prefix: &SbnModel) -> Result<(), ModelError> {
        let k = prefix.stages.len();
        if k > self.stages.len() || prefix.config.stages[..] != self.config.stages[..k] {
            return Err(ModelError::Config("prefix does not match this model's stages".into()));
        }
        self.instant = prefix.instant.clone();
        for (dst, src) in self.stages.iter_mut().zip(&prefix.stages) {
            dst.net = src.net.clone();
        }
        Ok(())
    }

    pub fn set_dropout(&mut self, rate: f64) -> Result<(), ModelError> {
        for net in self.nets_mut() {
            for layer in net.layers_mut() {
                if layer.activation() == Activation::Relu {
                    layer.set_dropout(rate)?;
                }
            }
        }
        self.config.dropout = rate;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.nets().all(DenseNet::all_finite)
    }

    pub fn instant_forward(&self, row: &[f64], mode: Mode, rng: &mut Rng) -> Result<f64, ModelError> {
        self.instant.forward(row, mode, rng)
    }

    pub fn stage_forward(&self, stage: usize, window: &[f64], mode: Mode, rng: &mut Rng) -> Result<f64, ModelError> {
        let st = self
            .stages
            .get(stage)
            .ok_or_else(|| ModelError::Config(format!("no stage {stage}")))?;
        st.forward(window, mode, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use StageKind::*;

    fn table1() -> Vec<(Vec<StageKind>, usize, usize)> {
        vec![
            (vec![], 238, 3),
            (vec![Daily], 527, 5),
            (vec![Weekly], 399, 5),
            (vec![Weekly, Daily], 624, 7),
            (vec![Weekly, Daily, Hourly], 1457, 9),
        ]
    }

    #[test]
    fn parameter_and_layer_counts() {
        for (kinds, params, layers) in table1() {
            let cfg = ModelConfig::from_boosters(&kinds).unwrap();
            let model = SbnModel::zeros(cfg.clone(), Normalizer::identity()).unwrap();
            assert_eq!(model.parameter_count(), params, "{}", cfg.label());
            assert_eq!(cfg.parameter_count(), params);
            assert_eq!(model.layer_count(), layers);
            assert_eq!(cfg.layer_count(), layers);
            assert_eq!(model.params().len(), params);
        }
    }

    #[test]
    fn stage_sizes() {
        let cfg = ModelConfig {
            stages: vec![StageSpec { kind: Daily, n_inputs: 7 }],
            ..ModelConfig::instant_only()
        };
        let m = SbnModel::zeros(cfg, Normalizer::identity()).unwrap();
        assert_eq!(m.stages[0].parameter_count(), 289);
        let full = SbnModel::zeros(
            ModelConfig::from_boosters(&[Weekly, Daily, Hourly]).unwrap(),
            Normalizer::identity(),
        )
        .unwrap();
        assert_eq!(full.stages[2].parameter_count(), 833);
        assert_eq!(full.instant.parameter_count(), 238);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(ModelConfig::from_boosters(&[Daily, Weekly]).is_err());
        assert!(ModelConfig::from_boosters(&[Daily, Daily]).is_err());
    }

    #[test]
    fn history_requirements() {
        let full = ModelConfig::from_boosters(&[Weekly, Daily, Hourly]).unwrap();
        assert_eq!(full.lag_depth(), 504);
        assert_eq!(full.required_history(), 516);
        assert_eq!(ModelConfig::from_boosters(&[Weekly]).unwrap().lag_depth(), 504);
        assert_eq!(ModelConfig::instant_only().required_history(), 12);
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = SbnModel::zeros(
            ModelConfig::from_boosters(&[Weekly, Daily, Hourly]).unwrap(),
            Normalizer::identity(),
        )
        .unwrap();
        let row = [0.7; 16];
        let mut rng = Rng::new(0);
        assert_eq!(m.instant_forward(&row, Mode::Infer, &mut rng).unwrap(), 0.0);
        assert_eq!(m.stage_forward(2, &[1.5; 24], Mode::Infer, &mut rng).unwrap(), 0.0);
        assert!(matches!(
            m.stage_forward(0, &[1.0; 3], Mode::Infer, &mut rng),
            Err(ModelError::Config(_))
        ));
    }

    #[test]
    fn day_type_swap_symmetry() {
        let m = SbnModel::init(ModelConfig::instant_only(), Normalizer::identity(), 5).unwrap();
        let mut row = [0.0; 16];
        for (i, v) in row.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let mut swapped_model = m.clone();
        let layer = &mut swapped_model.instant.head.layers_mut()[0];
        let in_dim = layer.in_dim();
        let w = layer.weights_mut();
        for o in 0..HIDDEN_UNITS {
            w.swap(o * in_dim + 1, o * in_dim + 2);
        }
        let mut swapped_row = row;
        swapped_row.swap(12, 13);
        let a = m.instant.predict(&row).unwrap();
        let b = swapped_model.instant.predict(&swapped_row).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn params_round_trip_and_prefix() {
        let cfg = ModelConfig::from_boosters(&[Weekly, Daily, Hourly]).unwrap();
        let m = SbnModel::init(cfg, Normalizer::identity(), 9).unwrap();
        let p = m.params();
        let mut z = SbnModel::zeros(m.config().clone(), Normalizer::identity()).unwrap();
        z.set_params(&p).unwrap();
        assert_eq!(z, m);
        let pre = m.prefix(1);
        assert_eq!(pre.parameter_count(), 238 + 129);
        assert_eq!(&p[..pre.parameter_count()], &pre.params()[..]);
        let mut target = SbnModel::zeros(m.config().clone(), Normalizer::identity()).unwrap();
        target.absorb_prefix(&pre).unwrap();
        assert_eq!(target.instant, m.instant);
        assert_eq!(target.stages[0], m.stages[0]);
        assert_eq!(target.stages[1].net.params(), vec![0.0; 257]);
    }
}
