//! CSV ingestion onto a strict hourly grid, and CSV output.
//!
//! Input columns are `timestamp,energy_kwh,temperature_c`. Timestamps are
//! floored to the hour. Rows that land on the same hour (daylight-saving
//! repeats, sub-hourly logging) are averaged per channel. Short gaps are
//! linearly interpolated per channel; longer gaps become invalid hours.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::Serialize;
use thiserror::Error;

use crate::series::HourlySeries;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const ACCEPTED_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
pub const HEADER: [&str; 3] = ["timestamp", "energy_kwh", "temperature_c"];
pub const DEFAULT_MAX_GAP_HOURS: usize = 6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp {found} precedes {previous}")]
    NotIncreasing {
        line: u64,
        found: NaiveDateTime,
        previous: NaiveDateTime,
    },
    #[error("no data rows")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    /// Longest run of missing hours that is interpolated.
    pub max_gap_hours: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_gap_hours: DEFAULT_MAX_GAP_HOURS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    /// Rows folded into an earlier row of the same hour.
    pub rows_merged: usize,
    pub hours: usize,
    /// Hours where at least one channel was interpolated.
    pub hours_interpolated: usize,
    pub hours_invalid: usize,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ACCEPTED_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn floor_to_hour(ts: NaiveDateTime) -> NaiveDateTime {
    ts.with_minute(0)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .expect("zero is a valid minute, second and nanosecond")
}

fn parse_value(field: &str, line: u64, column: &str) -> Result<Option<f64>, IngestError> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(IngestError::Parse {
            line,
            message: format!("{column}: cannot parse `{field}`"),
        }),
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.n += 1;
        }
    }

    fn value(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Fills interior runs of `None` up to `max_gap` long by linear interpolation.
/// Returns a flag per hour telling whether it was filled.
fn interpolate(channel: &mut [Option<f64>], max_gap: usize) -> Vec<bool> {
    let mut filled = vec![false; channel.len()];
    let mut last: Option<usize> = None;
    for i in 0..channel.len() {
        if channel[i].is_none() {
            continue;
        }
        if let Some(a) = last {
            let gap = i - a - 1;
            if gap > 0 && gap <= max_gap {
                let (va, vb) = (channel[a].unwrap(), channel[i].unwrap());
                for k in a + 1..i {
                    let w = (k - a) as f64 / (i - a) as f64;
                    channel[k] = Some(va + w * (vb - va));
                    filled[k] = true;
                }
            }
        }
        last = Some(i);
    }
    filled
}

pub fn ingest_reader<R: Read>(reader: R, opts: IngestOptions) -> Result<(HourlySeries, IngestSummary), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(IngestError::MissingColumn(name))
    };
    let (ts_col, e_col, t_col) = (column(HEADER[0])?, column(HEADER[1])?, column(HEADER[2])?);

    let mut summary = IngestSummary::default();
    let mut hours: Vec<(NaiveDateTime, Mean, Mean)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let field = |c: usize| record.get(c).unwrap_or("");
        let raw = parse_timestamp(field(ts_col)).ok_or_else(|| IngestError::Parse {
            line,
            message: format!("timestamp: cannot parse `{}`", field(ts_col)),
        })?;
        let ts = floor_to_hour(raw);
        let energy = parse_value(field(e_col), line, HEADER[1])?;
        let temp = parse_value(field(t_col), line, HEADER[2])?;
        summary.rows_read += 1;
        match hours.last_mut() {
            Some((prev, e, t)) if *prev == ts => {
                e.add(energy);
                t.add(temp);
                summary.rows_merged += 1;
            }
            Some((prev, _, _)) if *prev > ts => {
                return Err(IngestError::NotIncreasing {
                    line,
                    found: raw,
                    previous: *prev,
                });
            }
            _ => {
                let (mut e, mut t) = (Mean::default(), Mean::default());
                e.add(energy);
                t.add(temp);
                hours.push((ts, e, t));
            }
        }
    }
    let start = hours.first().ok_or(IngestError::Empty)?.0;
    let end = hours.last().unwrap().0;
    let n = ((end - start).num_hours() + 1) as usize;
    let mut energy = vec![None; n];
    let mut temp = vec![None; n];
    for (ts, e, t) in &hours {
        let i = (*ts - start).num_hours() as usize;
        energy[i] = e.value();
        temp[i] = t.value();
    }
    let fe = interpolate(&mut energy, opts.max_gap_hours);
    let ft = interpolate(&mut temp, opts.max_gap_hours);
    let valid: Vec<bool> = (0..n).map(|i| energy[i].is_some() && temp[i].is_some()).collect();
    summary.hours = n;
    summary.hours_interpolated = (0..n).filter(|&i| valid[i] && (fe[i] || ft[i])).count();
    summary.hours_invalid = valid.iter().filter(|v| !**v).count();
    let series = HourlySeries::new(
        start,
        energy.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        temp.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        valid,
    )
    .expect("grid is consistent by construction");
    Ok((series, summary))
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: IngestOptions) -> Result<(HourlySeries, IngestSummary), IngestError> {
    ingest_reader(File::open(path)?, opts)
}

/// Writes the series with invalid hours as empty fields.
pub fn write_series<W: Write>(series: &HourlySeries, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for i in 0..series.len() {
        let ts = series.timestamp(i).format(TIMESTAMP_FORMAT).to_string();
        if series.is_valid(i) {
            w.write_record([ts, series.energy()[i].to_string(), series.temperature()[i].to_string()])?;
        } else {
            w.write_record([ts, String::new(), String::new()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(series: &HourlySeries, path: impl AsRef<Path>) -> Result<(), IngestError> {
    write_series(series, File::create(path)?)
}

/// Default hour label for an index, used in forecast output.
pub fn format_timestamp(series_start: NaiveDateTime, hour: usize) -> String {
    (series_start + Duration::hours(hour as i64)).format(TIMESTAMP_FORMAT).to_string()
}
