use chrono::{Datelike, Duration, NaiveDateTime, Timelike, Weekday};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("channel lengths differ: energy {energy}, temperature {temperature}, mask {valid}")]
    LengthMismatch {
        energy: usize,
        temperature: usize,
        valid: usize,
    },
    #[error("series start {0} is not on a whole hour")]
    NotOnHour(NaiveDateTime),
    #[error("hour {index} is marked valid but holds a non-finite value")]
    NonFiniteValid { index: usize },
    #[error("range {start}..{end} outside series of {len} hours")]
    OutOfRange { start: usize, end: usize, len: usize },
}

/// Hourly energy (kWh) and temperature (°C) on a strict hourly grid.
///
/// Index `i` is the hour starting at `start + i h`. Hours with `valid[i] ==
/// false` carry `NaN` in both channels and never feed a sample or a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start: NaiveDateTime,
    energy: Vec<f64>,
    temperature: Vec<f64>,
    valid: Vec<bool>,
}

impl HourlySeries {
    pub fn new(
        start: NaiveDateTime,
        mut energy: Vec<f64>,
        mut temperature: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, SeriesError> {
        if energy.len() != temperature.len() || energy.len() != valid.len() {
            return Err(SeriesError::LengthMismatch {
                energy: energy.len(),
                temperature: temperature.len(),
                valid: valid.len(),
            });
        }
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(SeriesError::NotOnHour(start));
        }
        for i in 0..valid.len() {
            if valid[i] {
                if !energy[i].is_finite() || !temperature[i].is_finite() {
                    return Err(SeriesError::NonFiniteValid { index: i });
                }
            } else {
                energy[i] = f64::NAN;
                temperature[i] = f64::NAN;
            }
        }
        Ok(Self {
            start,
            energy,
            temperature,
            valid,
        })
    }

    /// Series with every hour valid.
    pub fn fully_valid(start: NaiveDateTime, energy: Vec<f64>, temperature: Vec<f64>) -> Result<Self, SeriesError> {
        let valid = vec![true; energy.len()];
        Self::new(start, energy, temperature, valid)
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::hours(i as i64)
    }

    /// Hour index of `ts`, if it lies on this grid (it may lie past the end).
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let diff = ts - self.start;
        if diff.num_seconds() < 0 || diff.num_seconds() % 3600 != 0 {
            return None;
        }
        Some(diff.num_hours() as usize)
    }

    pub fn weekday(&self, i: usize) -> Weekday {
        self.timestamp(i).weekday()
    }

    pub fn hour_of_day(&self, i: usize) -> u32 {
        self.timestamp(i).hour()
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn temperature(&self) -> &[f64] {
        &self.temperature
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid.get(i).copied().unwrap_or(false)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Marks hour `i` invalid and clears both channels.
    pub fn invalidate(&mut self, i: usize) {
        self.valid[i] = false;
        self.energy[i] = f64::NAN;
        self.temperature[i] = f64::NAN;
    }

    /// Copy of hours `start..end`, re-indexed from zero.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, SeriesError> {
        if start > end || end > self.len() {
            return Err(SeriesError::OutOfRange {
                start,
                end,
                len: self.len(),
            });
        }
        Ok(Self {
            start: self.timestamp(start),
            energy: self.energy[start..end].to_vec(),
            temperature: self.temperature[start..end].to_vec(),
            valid: self.valid[start..end].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    #[test]
    fn calendar_lookup() {
        let s = HourlySeries::fully_valid(at(2018, 1, 1, 0), vec![0.0; 48], vec![0.0; 48]).unwrap();
        assert_eq!(s.weekday(0), Weekday::Mon);
        assert_eq!(s.weekday(24), Weekday::Tue);
        assert_eq!(s.hour_of_day(30), 6);
        assert_eq!(s.index_of(at(2018, 1, 2, 1)), Some(25));
        assert_eq!(s.index_of(at(2017, 12, 31, 23)), None);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(HourlySeries::fully_valid(at(2018, 1, 1, 0), vec![0.0; 3], vec![0.0; 2]).is_err());
        let half = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap().and_hms_opt(0, 30, 0).unwrap();
        assert!(HourlySeries::fully_valid(half, vec![0.0], vec![0.0]).is_err());
        assert!(HourlySeries::fully_valid(at(2018, 1, 1, 0), vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn invalid_hours_hold_nan() {
        let s = HourlySeries::new(at(2018, 1, 1, 0), vec![1.0, 2.0], vec![3.0, 4.0], vec![true, false]).unwrap();
        assert!(s.energy()[1].is_nan());
        assert_eq!(s.valid_count(), 1);
        let sl = s.slice(1, 2).unwrap();
        assert_eq!(sl.start(), at(2018, 1, 1, 1));
        assert!(!sl.is_valid(0));
    }
}
