//! Time series, forecast-error streams and the training/monitoring split.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A univariate series with its seasonal period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    frequency: usize,
    timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, frequency: usize) -> Result<Self> {
        Self::with_timestamps(values, frequency, None)
    }

    pub fn with_timestamps(
        values: Vec<f64>,
        frequency: usize,
        timestamps: Option<Vec<String>>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSeries("no observations".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite value at index {i}")));
        }
        if frequency == 0 {
            return Err(Error::InvalidSeries("frequency must be at least 1".into()));
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() {
                return Err(Error::InvalidSeries(format!(
                    "{} timestamps for {} values",
                    ts.len(),
                    values.len()
                )));
            }
            if !strictly_increasing(ts) {
                return Err(Error::InvalidSeries("timestamps not strictly increasing".into()));
            }
        }
        Ok(Self {
            values,
            frequency,
            timestamps,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frequency(&self) -> usize {
        self.frequency
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `n` observations as a new series.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::with_timestamps(
            self.values[..n].to_vec(),
            self.frequency,
            self.timestamps.as_ref().map(|t| t[..n].to_vec()),
        )
    }
}

// Numeric labels compare numerically, anything else lexicographically.
fn strictly_increasing(labels: &[String]) -> bool {
    let numeric: Option<Vec<f64>> = labels.iter().map(|s| s.trim().parse().ok()).collect();
    match numeric {
        Some(v) => v.windows(2).all(|w| w[0] < w[1]),
        None => labels.windows(2).all(|w| w[0] < w[1]),
    }
}

/// Where an error stream came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    ModelGenerated,
    ExternallySupplied,
}

/// One-step-ahead forecast errors split into a training prefix of length `m`
/// and a monitoring suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStream {
    errors: Vec<f64>,
    m: usize,
    origin: Origin,
}

impl ErrorStream {
    pub fn new(errors: Vec<f64>, m: usize, origin: Origin) -> Result<Self> {
        let n = errors.len();
        if m < 2 || m > n {
            return Err(Error::SplitOutOfRange { m, n });
        }
        if let Some(i) = errors.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite error at index {i}")));
        }
        Ok(Self { errors, m, origin })
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn training(&self) -> &[f64] {
        &self.errors[..self.m]
    }

    pub fn monitoring(&self) -> &[f64] {
        &self.errors[self.m..]
    }

    /// Writes `t,error,phase` rows; values use the shortest round-trip
    /// decimal representation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "error", "phase"])?;
        for (i, e) in self.errors.iter().enumerate() {
            let phase = if i < self.m { "train" } else { "monitor" };
            w.write_record([(i + 1).to_string(), e.to_string(), phase.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reloads a stream written by [`ErrorStream::save_csv`]; `m` is the
    /// number of `train` rows.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let table = read_table(path)?;
        let errors = table.numeric_column("error")?;
        let phase = table.column_index("phase")?;
        let m = table.rows.iter().filter(|r| r.get(phase) == Some("train")).count();
        Self::new(errors, m, Origin::ModelGenerated)
    }
}

/// Training size given as a count or as a fraction of the stream length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSpec {
    Count(usize),
    Fraction(f64),
}

impl SplitSpec {
    /// Resolves against a stream of `n` observations. Fractions map to
    /// `floor(f * n)` clamped to `[2, n - 1]`.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let m = match *self {
            SplitSpec::Count(m) => m,
            SplitSpec::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "training fraction {f} not in (0, 1)"
                    )));
                }
                if n < 3 {
                    return Err(Error::SplitOutOfRange { m: 0, n });
                }
                ((f * n as f64).floor() as usize).clamp(2, n - 1)
            }
        };
        if m < 2 || m >= n {
            return Err(Error::SplitOutOfRange { m, n });
        }
        Ok(m)
    }
}

/// Splits a raw error list into training and monitoring parts.
pub fn split_errors(errors: Vec<f64>, spec: SplitSpec) -> Result<ErrorStream> {
    if errors.len() < 3 {
        return Err(Error::SplitOutOfRange {
            m: 0,
            n: errors.len(),
        });
    }
    let m = spec.resolve(errors.len())?;
    ErrorStream::new(errors, m, Origin::ExternallySupplied)
}

/// Loads one numeric column of a headed CSV file.
pub fn load_series(path: &Path, column: &str, frequency: usize) -> Result<TimeSeries> {
    load_series_with_timestamps(path, column, None, frequency)
}

/// Like [`load_series`], optionally attaching a label column.
pub fn load_series_with_timestamps(
    path: &Path,
    column: &str,
    timestamp_column: Option<&str>,
    frequency: usize,
) -> Result<TimeSeries> {
    let table = read_table(path)?;
    let values = table.numeric_column(column)?;
    let timestamps = match timestamp_column {
        Some(name) => {
            let idx = table.column_index(name)?;
            Some(
                table
                    .rows
                    .iter()
                    .map(|r| r.get(idx).unwrap_or("").to_string())
                    .collect(),
            )
        }
        None => None,
    };
    TimeSeries::with_timestamps(values, frequency, timestamps)
}

struct Table {
    headers: csv::StringRecord,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path) -> Result<Table> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let rows = reader.records().collect::<Result<Vec<_>, _>>()?;
    Ok(Table { headers, rows })
}

impl Table {
    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        if self.rows.is_empty() {
            return Err(Error::EmptyColumn(name.to_string()));
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r.get(idx).unwrap_or("");
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::UnparseableCell {
                        row: i + 1,
                        column: name.to_string(),
                        value: cell.to_string(),
                    })
            })
            .collect()
    }
}
