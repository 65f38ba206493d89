//! Timestamped named columns with explicit missingness.

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling cadence of a frame. Gaps are allowed; spacing must stay a whole
/// multiple of the unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cadence {
    Hourly,
    Daily,
}

impl Cadence {
    pub fn unit_seconds(self) -> i64 {
        match self {
            Cadence::Hourly => 3600,
            Cadence::Daily => 86_400,
        }
    }
}

/// One named series; `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let missing = self.values.iter().filter(|v| v.is_none()).count();
        missing as f64 / self.values.len() as f64
    }

    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|x| (i, x)))
    }
}

/// The raw and cleaned dataset representation: strictly increasing timestamps
/// plus equally long named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    pub cadence: Cadence,
    pub timestamps: Vec<NaiveDateTime>,
    pub columns: Vec<Column>,
}

impl TimeSeriesFrame {
    pub fn new(
        cadence: Cadence,
        timestamps: Vec<NaiveDateTime>,
        columns: Vec<Column>,
    ) -> Result<Self> {
        let frame = Self {
            cadence,
            timestamps,
            columns,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.timestamps.len();
        for col in &self.columns {
            if col.values.len() != n {
                return Err(Error::InputShape(format!(
                    "column '{}' has {} values for {} timestamps",
                    col.name,
                    col.values.len(),
                    n
                )));
            }
            if col.observed().any(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite(format!("column '{}'", col.name)));
            }
        }
        let unit = self.cadence.unit_seconds();
        for w in self.timestamps.windows(2) {
            let dt = (w[1] - w[0]).num_seconds();
            if dt <= 0 {
                return Err(Error::InputShape(format!(
                    "timestamps must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
            if dt % unit != 0 {
                return Err(Error::InputShape(format!(
                    "spacing of {dt}s between {} and {} is not a multiple of the {unit}s cadence",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// New frame keeping the given row indices, in order.
    pub fn select_rows(&self, keep: &[usize]) -> Self {
        Self {
            cadence: self.cadence,
            timestamps: keep.iter().map(|&i| self.timestamps[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: keep.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
        }
    }

    /// Chronological head/tail split at a fraction of rows; the tail holds
    /// `ceil(fraction * n)` rows.
    pub fn split_tail(&self, tail_fraction: f64) -> (Self, Self) {
        let n = self.n_rows();
        let tail = ((n as f64) * tail_fraction).ceil() as usize;
        let cut = n.saturating_sub(tail);
        let head_idx: Vec<usize> = (0..cut).collect();
        let tail_idx: Vec<usize> = (cut..n).collect();
        (self.select_rows(&head_idx), self.select_rows(&tail_idx))
    }

    /// Hour of day per row; meaningful for hourly cadence.
    pub fn hours(&self) -> Vec<u32> {
        self.timestamps.iter().map(|t| t.time().hour()).collect()
    }
}
