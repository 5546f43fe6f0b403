//! Instant-forecaster inputs and booster residual windows.
//!
//! The instant forecaster sees only exogenous data: the twelve standardized
//! temperatures before the target hour (oldest first), a Saturday/Sunday
//! one-hot with weekdays as the all-zero level, and the hour of day on the
//! unit circle. It never reads energy.

use std::f64::consts::PI;

use chrono::Weekday;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};
use crate::series::HourlySeries;

pub const TEMP_WINDOW: usize = 12;
/// Calendar inputs: day type (2) and hour encoding (2).
pub const CALENDAR_INPUTS: usize = 4;
pub const INSTANT_INPUTS: usize = TEMP_WINDOW + CALENDAR_INPUTS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("hour of day {0} outside 0..=23")]
    HourOutOfRange(u32),
    #[error("cannot fit normalizer: {0}")]
    Degenerate(String),
}

/// Why a target hour cannot produce features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    InsufficientHistory,
    InvalidHour(usize),
}

pub fn encode_hour(hour: u32) -> Result<[f64; 2], FeatureError> {
    if hour > 23 {
        return Err(FeatureError::HourOutOfRange(hour));
    }
    let angle = 2.0 * PI * hour as f64 / 24.0;
    Ok([angle.cos(), angle.sin()])
}

pub fn encode_day(weekday: Weekday) -> [f64; 2] {
    match weekday {
        Weekday::Sat => [1.0, 0.0],
        Weekday::Sun => [0.0, 1.0],
        _ => [0.0, 0.0],
    }
}

/// Z-score statistics fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub temp_mean: f64,
    pub temp_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let n = values.clone().count();
    if n == 0 {
        return None;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Some((mean, var.sqrt()))
}

impl Normalizer {
    pub fn identity() -> Self {
        Self {
            temp_mean: 0.0,
            temp_std: 1.0,
            energy_mean: 0.0,
            energy_std: 1.0,
        }
    }

    /// Statistics over the valid hours of `series[start..end]`.
    pub fn fit(series: &HourlySeries, start: usize, end: usize) -> Result<Self, FeatureError> {
        let end = end.min(series.len());
        let idx = (start..end).filter(|&i| series.is_valid(i));
        let (temp_mean, temp_std) = mean_std(idx.clone().map(|i| series.temperature()[i]))
            .ok_or_else(|| FeatureError::Degenerate("no valid hours in range".into()))?;
        let (energy_mean, energy_std) = mean_std(idx.map(|i| series.energy()[i]))
            .ok_or_else(|| FeatureError::Degenerate("no valid hours in range".into()))?;
        if temp_std <= 0.0 || energy_std <= 0.0 {
            return Err(FeatureError::Degenerate(format!(
                "zero spread (temperature std {temp_std}, energy std {energy_std})"
            )));
        }
        Ok(Self {
            temp_mean,
            temp_std,
            energy_mean,
            energy_std,
        })
    }

    pub fn temp(&self, celsius: f64) -> f64 {
        (celsius - self.temp_mean) / self.temp_std
    }

    pub fn energy(&self, kwh: f64) -> f64 {
        (kwh - self.energy_mean) / self.energy_std
    }

    pub fn energy_inverse(&self, z: f64) -> f64 {
        z * self.energy_std + self.energy_mean
    }

    pub fn temp_inverse(&self, z: f64) -> f64 {
        z * self.temp_std + self.temp_mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantFeatures {
    pub temp_window: [f64; TEMP_WINDOW],
    pub day_type: [f64; 2],
    pub hour_enc: [f64; 2],
}

impl InstantFeatures {
    /// Flat input row: temperatures, then day type, then hour encoding.
    pub fn to_row(&self) -> [f64; INSTANT_INPUTS] {
        let mut row = [0.0; INSTANT_INPUTS];
        row[..TEMP_WINDOW].copy_from_slice(&self.temp_window);
        row[TEMP_WINDOW..TEMP_WINDOW + 2].copy_from_slice(&self.day_type);
        row[TEMP_WINDOW + 2..].copy_from_slice(&self.hour_enc);
        row
    }
}

/// Features for target hour `t`: temperatures at `t-12..t-1` plus the calendar of `t`.
pub fn instant_features(series: &HourlySeries, t: usize, norm: &Normalizer) -> Result<InstantFeatures, Skip> {
    if t < TEMP_WINDOW || t >= series.len() {
        return Err(Skip::InsufficientHistory);
    }
    let mut temp_window = [0.0; TEMP_WINDOW];
    for (k, slot) in temp_window.iter_mut().enumerate() {
        let h = t - TEMP_WINDOW + k;
        if !series.is_valid(h) {
            return Err(Skip::InvalidHour(h));
        }
        *slot = norm.temp(series.temperature()[h]);
    }
    let hour_enc = encode_hour(series.hour_of_day(t)).expect("chrono hour is always 0..=23");
    Ok(InstantFeatures {
        temp_window,
        day_type: encode_day(series.weekday(t)),
        hour_enc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Weekly,
    Daily,
    Hourly,
}

impl StageKind {
    pub const ALL: [StageKind; 3] = [StageKind::Weekly, StageKind::Daily, StageKind::Hourly];

    pub fn period_hours(self) -> usize {
        match self {
            StageKind::Weekly => 168,
            StageKind::Daily => 24,
            StageKind::Hourly => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StageKind::Weekly => "weekly",
            StageKind::Daily => "daily",
            StageKind::Hourly => "hourly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weekly" => Some(StageKind::Weekly),
            "daily" => Some(StageKind::Daily),
            "hourly" => Some(StageKind::Hourly),
            _ => None,
        }
    }
}

impl std::fmt::Display for StageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hours `t - period*j` for `j = n..=1` (oldest first), or `None` when the
/// window reaches before hour zero.
pub fn residual_lags(kind: StageKind, t: usize, n_inputs: usize) -> Option<Vec<usize>> {
    let p = kind.period_hours();
    (1..=n_inputs).rev().map(|j| t.checked_sub(p * j)).collect()
}

/// Per-hour instant inputs and standardized actuals, precomputed once per
/// series so training and evaluation never touch raw data.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    rows: Vec<Option<[f64; INSTANT_INPUTS]>>,
    actual: Vec<Option<f64>>,
}

impl FeatureTable {
    pub fn build(series: &HourlySeries, norm: &Normalizer) -> Self {
        Self::build_with(series, norm, Execution::default())
    }

    pub fn build_with(series: &HourlySeries, norm: &Normalizer, exec: Execution) -> Self {
        let rows = par::map_indexed(exec, series.len(), |t| {
            instant_features(series, t, norm).ok().map(|f| f.to_row())
        });
        let actual = (0..series.len())
            .map(|t| series.is_valid(t).then(|| norm.energy(series.energy()[t])))
            .collect();
        Self { rows, actual }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self, t: usize) -> Option<&[f64; INSTANT_INPUTS]> {
        self.rows.get(t).and_then(Option::as_ref)
    }

    pub fn actual(&self, t: usize) -> Option<f64> {
        self.actual.get(t).copied().flatten()
    }

    /// Hour has both instant features and a known actual.
    pub fn observed(&self, t: usize) -> bool {
        self.features(t).is_some() && self.actual(t).is_some()
    }
}
