//! Regression error metrics: MAE, R², RMSE, and range-normalized RMSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four metrics reported per split, plus the sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mae: f64,
    pub r2: f64,
    pub rmse: f64,
    /// RMSE divided by the observed range `max(y_true) - min(y_true)`.
    pub nrmse: f64,
    pub n: usize,
}

/// Computes MAE, RMSE, R², and nRMSE for a prediction vector.
///
/// `y_true` must be non-constant: R² and nRMSE are undefined otherwise.
pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsRecord> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InputShape(format!(
            "{} true values vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::InputShape("metrics need at least 2 points".into()));
    }
    if !y_true.iter().chain(y_pred).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("metric inputs".into()));
    }
    let n = y_true.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut mean = 0.0;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let e = p - t;
        abs_sum += e.abs();
        sq_sum += e * e;
        min = min.min(t);
        max = max.max(t);
        mean += t;
    }
    mean /= n;
    let range = max - min;
    if range == 0.0 {
        return Err(Error::Metric(
            "y_true is constant; R² and nRMSE are undefined".into(),
        ));
    }
    let mut ss_tot = 0.0;
    for &t in y_true {
        let d = t - mean;
        ss_tot += d * d;
    }
    let mae = abs_sum / n;
    let rmse = (sq_sum / n).sqrt();
    Ok(MetricsRecord {
        mae,
        r2: 1.0 - sq_sum / ss_tot,
        rmse,
        nrmse: rmse / range,
        n: y_true.len(),
    })
}
