//! Deterministic synthetic office-building load.
//!
//! ```text
//! energy(t) = base + slope·max(0, threshold − T(t)) + office(t) + weekly_event(t)
//!           + oscillation(t) + level_shift(t) + noise
//! ```
//!
//! Temperature is a seasonal sinusoid plus a daily sinusoid plus AR(1) weather
//! noise. The level-shift term is a piecewise-constant occupancy drift that
//! resets to a fresh normal draw at exponentially distributed intervals; it is
//! off by default.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::nn::{Rng, Stream};
use crate::series::HourlySeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeeklyEvent {
    pub weekday: Weekday,
    pub hour: u32,
    pub magnitude_kw: f64,
    /// Added to the magnitude from `step_date` on.
    pub step_change_kw: f64,
    pub step_date: Option<NaiveDateTime>,
}

impl Default for WeeklyEvent {
    fn default() -> Self {
        Self {
            weekday: Weekday::Sat,
            hour: 10,
            magnitude_kw: 15.0,
            step_change_kw: 10.0,
            step_date: Some(date(2016, 7, 1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Oscillation {
    pub period_hours: f64,
    pub amplitude_kw: f64,
}

impl Default for Oscillation {
    fn default() -> Self {
        Self {
            period_hours: 5.0,
            amplitude_kw: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureModel {
    pub annual_mean_c: f64,
    pub seasonal_amplitude_c: f64,
    /// Day of year (1-based) of the seasonal minimum.
    pub coldest_day: f64,
    pub daily_amplitude_c: f64,
    pub warmest_hour: f64,
    pub noise_sigma_c: f64,
    /// Hour-to-hour AR(1) coefficient of the weather noise.
    pub noise_persistence: f64,
}

impl Default for TemperatureModel {
    fn default() -> Self {
        Self {
            annual_mean_c: 5.5,
            seasonal_amplitude_c: 11.0,
            coldest_day: 20.0,
            daily_amplitude_c: 3.0,
            warmest_hour: 15.0,
            noise_sigma_c: 3.0,
            noise_persistence: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelShifts {
    pub sigma_kw: f64,
    pub mean_interval_hours: f64,
    /// No shifts from this time on.
    pub until: Option<NaiveDateTime>,
}

impl Default for LevelShifts {
    fn default() -> Self {
        Self {
            sigma_kw: 0.0,
            mean_interval_hours: 1344.0,
            until: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub start: NaiveDateTime,
    pub n_hours: usize,
    pub base_load_kw: f64,
    pub heating_slope_kw_per_deg: f64,
    pub heating_threshold_c: f64,
    pub office_load_kw: f64,
    /// Weekday occupancy covers `office_start_hour..office_end_hour`.
    pub office_start_hour: u32,
    pub office_end_hour: u32,
    pub weekly_event: WeeklyEvent,
    pub oscillation: Oscillation,
    pub noise_sigma_kw: f64,
    pub temperature: TemperatureModel,
    pub level_shifts: LevelShifts,
    pub seed: u64,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid calendar date")
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: date(2016, 1, 1),
            n_hours: 8760,
            base_load_kw: 50.0,
            heating_slope_kw_per_deg: 2.0,
            heating_threshold_c: 17.0,
            office_load_kw: 20.0,
            office_start_hour: 8,
            office_end_hour: 17,
            weekly_event: WeeklyEvent::default(),
            oscillation: Oscillation::default(),
            noise_sigma_kw: 2.0,
            temperature: TemperatureModel::default(),
            level_shifts: LevelShifts::default(),
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Defaults plus occupancy drift: the distribution-shift benchmark.
    pub fn benchmark(start: NaiveDateTime, n_hours: usize, seed: u64) -> Self {
        Self {
            start,
            n_hours,
            seed,
            level_shifts: LevelShifts {
                sigma_kw: 6.0,
                mean_interval_hours: 1344.0,
                until: None,
            },
            ..Self::default()
        }
    }

    /// Warning when the oscillation period is a whole number of days, which the
    /// hourly booster cannot be told apart from daily or weekly structure.
    pub fn hourly_booster_warning(&self) -> Option<String> {
        let p = self.oscillation.period_hours;
        (self.oscillation.amplitude_kw != 0.0 && p > 0.0 && (p % 24.0).abs() < 1e-9).then(|| {
            format!("oscillation period {p} h is divisible by 24 h; the hourly booster has nothing of its own to correct")
        })
    }
}

/// Outdoor temperature without noise.
pub fn deterministic_temperature(model: &TemperatureModel, ts: NaiveDateTime) -> f64 {
    let day = ts.ordinal() as f64 + ts.hour() as f64 / 24.0;
    let seasonal = -model.seasonal_amplitude_c * (2.0 * PI * (day - model.coldest_day) / 365.25).cos();
    let daily = model.daily_amplitude_c * (2.0 * PI * (ts.hour() as f64 - model.warmest_hour) / 24.0).cos();
    model.annual_mean_c + seasonal + daily
}

/// Load from everything but temperature and noise.
pub fn scheduled_load(cfg: &SynthConfig, ts: NaiveDateTime, index: usize) -> f64 {
    let mut load = 0.0;
    let weekday = ts.weekday();
    let is_workday = !matches!(weekday, Weekday::Sat | Weekday::Sun);
    if is_workday && (cfg.office_start_hour..cfg.office_end_hour).contains(&ts.hour()) {
        load += cfg.office_load_kw;
    }
    let ev = &cfg.weekly_event;
    if weekday == ev.weekday && ts.hour() == ev.hour {
        load += ev.magnitude_kw;
        if ev.step_date.is_some_and(|d| ts >= d) {
            load += ev.step_change_kw;
        }
    }
    let osc = &cfg.oscillation;
    if osc.amplitude_kw != 0.0 && osc.period_hours > 0.0 {
        load += osc.amplitude_kw * (2.0 * PI * index as f64 / osc.period_hours).sin();
    }
    load
}

pub fn generate_synthetic(cfg: &SynthConfig) -> HourlySeries {
    let root = Rng::substream(cfg.seed, Stream::Synthetic);
    let mut temp_rng = root.derive(&[1]);
    let mut load_rng = root.derive(&[2]);
    let mut shift_rng = root.derive(&[3]);
    let tm = &cfg.temperature;
    let innovation = tm.noise_sigma_c * (1.0 - tm.noise_persistence * tm.noise_persistence).max(0.0).sqrt();
    let mut weather = tm.noise_sigma_c * temp_rng.normal();
    let shifts = &cfg.level_shifts;
    let mut level = shifts.sigma_kw * shift_rng.normal();
    let switch_prob = if shifts.mean_interval_hours > 0.0 {
        1.0 / shifts.mean_interval_hours
    } else {
        0.0
    };

    let mut energy = Vec::with_capacity(cfg.n_hours);
    let mut temperature = Vec::with_capacity(cfg.n_hours);
    for i in 0..cfg.n_hours {
        let ts = cfg.start + Duration::hours(i as i64);
        if i > 0 {
            weather = tm.noise_persistence * weather + innovation * temp_rng.normal();
            if shift_rng.uniform() < switch_prob {
                level = shifts.sigma_kw * shift_rng.normal();
            }
        }
        let temp = deterministic_temperature(tm, ts) + weather;
        let heating = cfg.heating_slope_kw_per_deg * (cfg.heating_threshold_c - temp).max(0.0);
        let shift = if shifts.until.is_some_and(|u| ts >= u) { 0.0 } else { level };
        let noise = cfg.noise_sigma_kw * load_rng.normal();
        energy.push(cfg.base_load_kw + heating + scheduled_load(cfg, ts, i) + shift + noise);
        temperature.push(temp);
    }
    HourlySeries::fully_valid(cfg.start, energy, temperature).expect("generator emits finite values on the hour")
}
