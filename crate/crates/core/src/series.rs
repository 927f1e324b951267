//! Uniformly sampled power profiles and their CSV form.
//!
//! The CSV layout is a two-column file with header `timestamp,power_kw`.
//! Timestamps may be plain numbers (hours since the start of the record) or
//! calendar datetimes (`2016-01-01 00:00:00`, `2016-01-01T00:00:00`, with or
//! without seconds). Spacing between consecutive rows must be uniform.
//! Exported files always use numeric hours.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours in the reference year used for annual energy and LOLE scaling.
pub const HOURS_PER_YEAR: f64 = 8760.0;

const SPACING_TOLERANCE_HOURS: f64 = 1e-6;

/// Power samples in kW taken every `interval_hours`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    interval_hours: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, interval_hours: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("time series"));
        }
        if !(interval_hours.is_finite() && interval_hours > 0.0) {
            return Err(Error::domain(format!(
                "sample interval must be positive, got {interval_hours}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            interval_hours,
        })
    }

    pub fn constant(value: f64, len: usize, interval_hours: f64) -> Result<Self> {
        Self::new(vec![value; len], interval_hours)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn interval_hours(&self) -> f64 {
        self.interval_hours
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_hours(&self) -> f64 {
        self.samples.len() as f64 * self.interval_hours
    }

    pub fn peak(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn trough(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Σ P[i]·T in kWh.
    pub fn energy_kwh(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.interval_hours
    }

    /// Same interval, new samples. Used by transforms that preserve sampling.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.samples.len() {
            return Err(Error::LengthMismatch {
                what: "replacement samples",
                left: self.samples.len(),
                right: samples.len(),
            });
        }
        Self::new(samples, self.interval_hours)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|&v| f(v)).collect(),
            self.interval_hours,
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    pub fn ensure_compatible(&self, other: &TimeSeries) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                what: "time series",
                left: self.len(),
                right: other.len(),
            });
        }
        if (self.interval_hours - other.interval_hours).abs() > 1e-12 {
            return Err(Error::IntervalMismatch {
                left: self.interval_hours,
                right: other.interval_hours,
            });
        }
        Ok(())
    }

    pub fn ensure_nonnegative(&self) -> Result<()> {
        match self.samples.iter().position(|&v| v < 0.0) {
            Some(index) => Err(Error::NegativeSample {
                index,
                value: self.samples[index],
            }),
            None => Ok(()),
        }
    }

    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let fail = |reason: String| Error::SeriesFormat {
            path: source.to_path_buf(),
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "power_kw" {
            return Err(fail(format!(
                "expected header `timestamp,power_kw`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut stamps = Vec::new();
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let line = row + 2;
            let stamp = parse_timestamp(&record[0]).ok_or_else(|| {
                fail(format!(
                    "line {line}: unparseable timestamp `{}`",
                    &record[0]
                ))
            })?;
            let power: f64 = record[1]
                .parse()
                .map_err(|_| fail(format!("line {line}: unparseable power `{}`", &record[1])))?;
            stamps.push(stamp);
            samples.push(power);
        }
        if samples.len() < 2 {
            return Err(fail(
                "need at least two rows to infer the sample interval".into(),
            ));
        }

        let interval = stamps[1] - stamps[0];
        if interval <= 0.0 {
            return Err(fail("timestamps must be strictly increasing".into()));
        }
        for (i, pair) in stamps.windows(2).enumerate() {
            let step = pair[1] - pair[0];
            if (step - interval).abs() > SPACING_TOLERANCE_HOURS {
                return Err(fail(format!(
                    "non-uniform spacing between rows {} and {}: {step} h vs {interval} h",
                    i + 2,
                    i + 3
                )));
            }
        }
        Self::new(samples, interval).map_err(|e| fail(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["timestamp", "power_kw"])?;
        for (i, v) in self.samples.iter().enumerate() {
            let t = i as f64 * self.interval_hours;
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, path)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }
}

/// Hours, either numeric or relative to the Unix epoch for datetimes. Only
/// differences between rows are used.
fn parse_timestamp(raw: &str) -> Option<f64> {
    if let Ok(hours) = raw.parse::<f64>() {
        return hours.is_finite().then_some(hours);
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ];
    FORMATS.iter().find_map(|fmt| {
        NaiveDateTime::parse_from_str(raw, fmt)
            .ok()
            .map(|dt| dt.and_utc().timestamp() as f64 / 3600.0)
    })
}
