//! TOML run configuration. Every command-line flag has a key here; flags win.

use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{NaiveDate, NaiveDateTime};
use serde::Deserialize;

use sbn_core::features::StageKind;
use sbn_core::io::SynthConfig;
use sbn_core::model::{ModelConfig, DEFAULT_DROPOUT};
use sbn_core::TrainConfig;

use crate::error::usage;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub io: IoSection,
    pub synth: SynthConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub data: DataSection,
    pub eval: EvalSection,
    pub forecast: ForecastSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub loss_out: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Booster names in any order, or empty for the instant forecaster alone.
    pub boosters: Vec<String>,
    pub dropout: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            boosters: vec!["weekly".into(), "daily".into(), "hourly".into()],
            dropout: DEFAULT_DROPOUT,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub max_gap_hours: usize,
    pub train_start: Option<String>,
    pub train_end: Option<String>,
    pub eval_start: Option<String>,
    pub eval_end: Option<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            max_gap_hours: sbn_core::io::ingest::DEFAULT_MAX_GAP_HOURS,
            train_start: None,
            train_end: None,
            eval_start: None,
            eval_end: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub horizons: Vec<usize>,
    pub literal_mse: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            horizons: vec![24, 48, 96],
            literal_mse: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub origin: Option<String>,
    pub horizon: usize,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            origin: None,
            horizon: 24,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sizes: Vec<String>,
    /// Booster sets, each `none` or names joined by `+`.
    pub configs: Vec<String>,
    pub horizon_table_size: Option<String>,
    pub save_models: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sizes: vec!["6mo".into(), "1y".into(), "2y".into()],
            configs: vec![
                "none".into(),
                "daily".into(),
                "weekly".into(),
                "weekly+daily".into(),
                "weekly+daily+hourly".into(),
            ],
            horizon_table_size: Some("1y".into()),
            save_models: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }
}

/// Booster list from names split on `,` or `+`; `none` or empty means no boosters.
pub fn parse_boosters(names: &[String]) -> anyhow::Result<Vec<StageKind>> {
    let mut kinds = Vec::new();
    for name in names.iter().flat_map(|n| n.split([',', '+'])) {
        let name = name.trim();
        if name.is_empty() || name.eq_ignore_ascii_case("none") {
            continue;
        }
        let kind = StageKind::parse(name).ok_or_else(|| usage(format!("unknown booster `{name}`")))?;
        if kinds.contains(&kind) {
            return Err(usage(format!("booster `{name}` listed twice")));
        }
        kinds.push(kind);
    }
    kinds.sort();
    Ok(kinds)
}

pub fn model_config(boosters: &[String], dropout: f64) -> anyhow::Result<ModelConfig> {
    let kinds = parse_boosters(boosters)?;
    let cfg = ModelConfig::from_boosters(&kinds)
        .map_err(|e| usage(e.to_string()))?
        .with_dropout(dropout);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

/// `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS]` or the same with a space.
pub fn parse_datetime(s: &str) -> anyhow::Result<NaiveDateTime> {
    let s = s.trim();
    for f in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Ok(t);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| usage(format!("cannot parse date `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn booster_lists() {
        let k = parse_boosters(&["hourly,weekly".into()]).unwrap();
        assert_eq!(k, vec![StageKind::Weekly, StageKind::Hourly]);
        assert!(parse_boosters(&["none".into()]).unwrap().is_empty());
        assert!(parse_boosters(&["weekly+daily".into()]).unwrap().len() == 2);
        assert!(parse_boosters(&["monthly".into()]).is_err());
        assert!(parse_boosters(&["daily,daily".into()]).is_err());
    }

    #[test]
    fn dates() {
        assert_eq!(parse_datetime("2018-01-01").unwrap().to_string(), "2018-01-01 00:00:00");
        assert_eq!(parse_datetime("2018-01-01T05:00").unwrap().to_string(), "2018-01-01 05:00:00");
        assert!(parse_datetime("01/01/2018").is_err());
    }

    #[test]
    fn config_sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [io]
            data = "load.csv"
            [model]
            boosters = ["weekly"]
            dropout = 0.1
            [train]
            epochs = 3
            seed = 9
            [synth]
            n_hours = 100
            [synth.oscillation]
            period_hours = 7.0
            [eval]
            horizons = [24]
            [sweep]
            sizes = ["6mo"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.base_lr, 0.0025);
        assert_eq!(cfg.synth.n_hours, 100);
        assert_eq!(cfg.synth.oscillation.period_hours, 7.0);
        assert_eq!(cfg.synth.base_load_kw, 50.0);
        assert_eq!(cfg.model.boosters, vec!["weekly"]);
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3\n").is_err());
    }
}
