//! Stacked booster network for short-term building energy load forecasting.
//!
//! An instant forecaster maps recent temperatures and calendar features to an
//! hourly energy forecast. Booster stages then correct it in order (weekly,
//! daily, hourly), each estimating the next residual of the stage before it
//! from that stage's residuals one period back.

pub mod evaluator;
pub mod features;
pub mod io;
pub mod model;
pub mod nn;
pub mod par;
pub mod series;
pub mod trainer;

pub use features::{FeatureTable, Normalizer, StageKind};
pub use model::{ModelConfig, SbnModel};
pub use par::Execution;
pub use series::HourlySeries;
pub use trainer::{TrainConfig, TrainMode};
