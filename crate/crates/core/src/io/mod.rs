//! Data in and out: CSV series, synthetic data and model archives.

pub mod archive;
pub mod ingest;
pub mod synth;

pub use archive::{load_model, save_model, ArchiveError};
pub use ingest::{
    ingest_csv, ingest_reader, write_series, write_series_csv, IngestError, IngestOptions, IngestSummary,
    TIMESTAMP_FORMAT,
};
pub use synth::{generate_synthetic, LevelShifts, Oscillation, SynthConfig, TemperatureModel, WeeklyEvent};
