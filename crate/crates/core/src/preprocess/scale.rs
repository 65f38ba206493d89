//! Per-column z-score standardization with training-time statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub mean: f64,
    pub std: f64,
}

impl ColumnScaler {
    /// Fits on a fully observed column; errors on constant data.
    pub fn fit(values: &[f64], name: &str) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Pipeline(format!("cannot standardize empty column '{name}'")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !std.is_finite() || std <= 0.0 {
            return Err(Error::Pipeline(format!(
                "column '{name}' has zero standard deviation"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_all(&self, values: &mut [f64]) {
        for v in values {
            *v = self.apply(*v);
        }
    }
}
