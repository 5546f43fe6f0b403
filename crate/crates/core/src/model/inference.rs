//! Inference over a series: historical residual tracks and multi-hour rollout.
//!
//! Residual tracks are built forward in time. At an observed hour the stage
//! residual is `ŷ_s − y`. At an hour without an actual (a gap, or any hour
//! after the forecast origin) it is replaced by the model's own estimate of
//! that residual, `ê_{s+1}`. Everything up to an origin depends only on hours up
//! to that origin, so one historical pass serves every origin and each origin
//! only recomputes its own horizon.

use crate::features::FeatureTable;
use crate::series::HourlySeries;

use super::{ModelError, SbnModel};

/// Per-hour stage forecasts, residual estimates and residuals, standardized.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracks {
    yhat: Vec<Vec<Option<f64>>>,
    est: Vec<Vec<Option<f64>>>,
    rho: Vec<Vec<Option<f64>>>,
}

struct HourState {
    yhat: Vec<Option<f64>>,
    est: Vec<Option<f64>>,
    rho: Vec<Option<f64>>,
}

fn step_hour(
    model: &SbnModel,
    table: &FeatureTable,
    hour: usize,
    actual: Option<f64>,
    rho_at: impl Fn(usize, usize) -> Option<f64>,
) -> Result<HourState, ModelError> {
    let n_stages = model.stages.len();
    let mut yhat = Vec::with_capacity(n_stages + 1);
    let mut est = Vec::with_capacity(n_stages);
    yhat.push(match table.features(hour) {
        Some(row) => Some(model.instant.predict(row)?),
        None => None,
    });
    let mut window = Vec::new();
    for (si, stage) in model.stages.iter().enumerate() {
        let p = stage.period_hours();
        window.clear();
        let complete = (1..=stage.n_inputs).rev().all(|j| {
            match hour.checked_sub(p * j).and_then(|h| rho_at(si, h)) {
                Some(r) => {
                    window.push(r);
                    true
                }
                None => false,
            }
        });
        let e = if complete { Some(stage.net.predict(&window)?[0]) } else { None };
        est.push(e);
        yhat.push(match (yhat[si], e) {
            (Some(y), Some(e)) => Some(y - e),
            _ => None,
        });
    }
    let rho = (0..=n_stages)
        .map(|s| match actual {
            Some(y) => yhat[s].map(|f| f - y),
            None => est.get(s).copied().flatten(),
        })
        .collect();
    Ok(HourState { yhat, est, rho })
}

impl Tracks {
    /// Tracks over every hour of `table`, using actuals wherever they exist.
    pub fn historical(model: &SbnModel, table: &FeatureTable) -> Result<Self, ModelError> {
        Self::historical_until(model, table, table.len())
    }

    /// Tracks over hours `0..end`.
    pub fn historical_until(model: &SbnModel, table: &FeatureTable, end: usize) -> Result<Self, ModelError> {
        let n_stages = model.stages.len();
        let end = end.min(table.len());
        let mut tracks = Self {
            yhat: vec![Vec::with_capacity(end); n_stages + 1],
            est: vec![Vec::with_capacity(end); n_stages],
            rho: vec![Vec::with_capacity(end); n_stages + 1],
        };
        for hour in 0..end {
            let actual = if table.observed(hour) { table.actual(hour) } else { None };
            let state = step_hour(model, table, hour, actual, |s, h| tracks.rho[s][h])?;
            tracks.push(state);
        }
        Ok(tracks)
    }

    fn push(&mut self, state: HourState) {
        for (t, v) in self.yhat.iter_mut().zip(state.yhat) {
            t.push(v);
        }
        for (t, v) in self.est.iter_mut().zip(state.est) {
            t.push(v);
        }
        for (t, v) in self.rho.iter_mut().zip(state.rho) {
            t.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.yhat[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forecast(&self, stage: usize, hour: usize) -> Option<f64> {
        self.yhat.get(stage)?.get(hour).copied().flatten()
    }

    /// `ê_stage` for `stage ≥ 1`.
    pub fn estimate(&self, stage: usize, hour: usize) -> Option<f64> {
        self.est.get(stage.checked_sub(1)?)?.get(hour).copied().flatten()
    }

    pub fn residual(&self, stage: usize, hour: usize) -> Option<f64> {
        self.rho.get(stage)?.get(hour).copied().flatten()
    }
}

/// Forecast for one target hour, in kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct HourForecast {
    pub hour: usize,
    /// `ŷ₀ … ŷ_S`.
    pub forecasts: Vec<f64>,
    /// `ê₁ … ê_S`.
    pub residual_estimates: Vec<f64>,
}

impl HourForecast {
    pub fn final_forecast(&self) -> f64 {
        *self.forecasts.last().expect("at least the instant forecast")
    }
}

/// One model bound to one series, with the historical pass precomputed.
#[derive(Debug, Clone)]
pub struct Forecaster<'a> {
    model: &'a SbnModel,
    table: FeatureTable,
    base: Tracks,
}

impl<'a> Forecaster<'a> {
    pub fn new(model: &'a SbnModel, series: &HourlySeries) -> Result<Self, ModelError> {
        Self::from_table(model, FeatureTable::build(series, &model.normalizer))
    }

    pub fn from_table(model: &'a SbnModel, table: FeatureTable) -> Result<Self, ModelError> {
        let base = Tracks::historical(model, &table)?;
        Ok(Self { model, table, base })
    }

    pub fn tracks(&self) -> &Tracks {
        &self.base
    }

    pub fn table(&self) -> &FeatureTable {
        &self.table
    }

    pub fn earliest_origin(&self) -> usize {
        self.model.config().required_history() - 1
    }

    /// Rollout from `origin` (last observed hour) for hours `origin+1 ..= origin+horizon`.
    /// Hours that cannot be forecast (missing temperatures, past the series end)
    /// come back as `None`.
    pub fn rollout(&self, origin: usize, horizon: usize) -> Result<Vec<Option<HourForecast>>, ModelError> {
        if horizon == 0 {
            return Err(ModelError::Horizon(horizon));
        }
        if origin < self.earliest_origin() {
            return Err(ModelError::InsufficientHistory {
                origin,
                earliest: self.earliest_origin(),
            });
        }
        let n_stages = self.model.stages.len();
        let norm = &self.model.normalizer;
        let mut overlay: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(horizon); n_stages + 1];
        let mut out = Vec::with_capacity(horizon);
        for hour in origin + 1..=origin + horizon {
            let state = step_hour(self.model, &self.table, hour, None, |s, h| {
                if h <= origin {
                    self.base.residual(s, h)
                } else {
                    overlay[s][h - origin - 1]
                }
            })?;
            let complete = state.yhat.iter().all(Option::is_some) && state.est.iter().all(Option::is_some);
            out.push(complete.then(|| HourForecast {
                hour,
                forecasts: state.yhat.iter().map(|y| norm.energy_inverse(y.unwrap())).collect(),
                residual_estimates: state.est.iter().map(|e| e.unwrap() * norm.energy_std).collect(),
            }));
            for (o, r) in overlay.iter_mut().zip(state.rho) {
                o.push(r);
            }
        }
        Ok(out)
    }
}

/// Rollout forecast from `origin` for `horizon` hours; fails if any target hour
/// cannot be forecast.
pub fn forecast(
    model: &SbnModel,
    series: &HourlySeries,
    origin: usize,
    horizon: usize,
) -> Result<Vec<HourForecast>, ModelError> {
    let end = (origin + horizon + 1).min(series.len());
    let table = FeatureTable::build(&series.slice(0, end).map_err(|_| ModelError::Unavailable(origin))?, &model.normalizer);
    let fc = Forecaster::from_table(model, table)?;
    fc.rollout(origin, horizon)?
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or(ModelError::Unavailable(origin + 1 + i)))
        .collect()
}

/// Standardized residuals `ŷ_upto − y` at `hours`, every lag taken from actuals.
pub fn historical_residuals(
    model: &SbnModel,
    series: &HourlySeries,
    hours: &[usize],
    upto_stage: usize,
) -> Result<Vec<f64>, ModelError> {
    if upto_stage > model.stages.len() {
        return Err(ModelError::Config(format!("model has no stage {upto_stage}")));
    }
    let end = hours.iter().copied().max().map_or(0, |h| h + 1).min(series.len());
    let table = FeatureTable::build(&series.slice(0, end).map_err(|_| ModelError::Unavailable(end))?, &model.normalizer);
    let tracks = Tracks::historical(model, &table)?;
    hours
        .iter()
        .map(|&h| {
            if !table.observed(h) {
                return Err(ModelError::Unavailable(h));
            }
            tracks.residual(upto_stage, h).ok_or(ModelError::Unavailable(h))
        })
        .collect()
}
