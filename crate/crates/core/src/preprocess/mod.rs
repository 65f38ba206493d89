//! The fitted preprocessing chain: sparse-column drop, date exclusion,
//! quadratic imputation, calendar features, Yeo-Johnson power transform,
//! standardization, correlation-based selection, and optional PCA.
//!
//! `pipeline_fit` records every fitted parameter in a [`PipelineState`];
//! `pipeline_apply` replays the state on any frame without re-fitting, so
//! unseen data is transformed exactly like training data. Applying a state to
//! the frame it was fitted on reproduces the training matrix bitwise.

pub mod features;
pub mod impute;
pub mod pca;
pub mod power;
pub mod scale;
pub mod select;

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

pub use features::{engineer_time_features, CalendarSettings};
pub use impute::{drop_sparse_columns, exclude_date_range, impute_quadratic};
pub use pca::{pca_apply, pca_fit, PcaState};
pub use power::{yeo_johnson, yeo_johnson_fit, yeo_johnson_inverse};
pub use scale::ColumnScaler;
pub use select::{pearson, select_features, SelectOptions};

use crate::error::{Error, Result};
use crate::frame::{Cadence, Column, TimeSeriesFrame};
use crate::matrix::FeatureMatrix;
use crate::svr::TrainingSet;

/// Everything the fit step needs to know; all fields except `target` have
/// paper-anchored defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Name of the raw column to forecast.
    pub target: String,
    /// Row offset between a feature row and its target value; 1 means
    /// features at row t predict the target at row t+1.
    pub horizon: usize,
    /// Columns with a missing fraction strictly above this are dropped.
    pub sparse_threshold: f64,
    pub excluded_ranges: Vec<(NaiveDateTime, NaiveDateTime)>,
    pub engineer_calendar: bool,
    pub calendar: CalendarSettings,
    pub power_transform: bool,
    pub correlation_threshold: f64,
    pub forced_drops: Vec<String>,
    /// `Some(threshold)` enables PCA with that explained-variance target.
    pub pca_variance_threshold: Option<f64>,
}

impl PipelineConfig {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            horizon: 1,
            sparse_threshold: 0.5,
            excluded_ranges: Vec::new(),
            engineer_calendar: true,
            calendar: CalendarSettings::default(),
            power_transform: true,
            correlation_threshold: 0.9,
            forced_drops: vec!["month".to_string(), "hour".to_string()],
            pca_variance_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.is_empty() {
            return Err(Error::Config("pipeline target column is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.sparse_threshold) {
            return Err(Error::Config(format!(
                "sparse_threshold must lie in [0, 1], got {}",
                self.sparse_threshold
            )));
        }
        if !(0.0 < self.correlation_threshold && self.correlation_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "correlation_threshold must lie in (0, 1], got {}",
                self.correlation_threshold
            )));
        }
        if let Some(t) = self.pca_variance_threshold {
            if !(0.0 < t && t <= 1.0) {
                return Err(Error::Config(format!(
                    "pca_variance_threshold must lie in (0, 1], got {t}"
                )));
            }
        }
        for (s, e) in &self.excluded_ranges {
            if s > e {
                return Err(Error::Config(format!("exclusion range {s}..{e} is inverted")));
            }
        }
        Ok(())
    }
}

/// Why a column was removed before modelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DropReason {
    /// Missing fraction strictly above the sparse threshold.
    Sparse { missing_fraction: f64 },
    /// No variation over the training rows.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: DropReason,
}

/// All fitted parameters needed to replay the pipeline on unseen data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub target_name: String,
    pub horizon: usize,
    pub cadence: Cadence,
    pub dropped_columns: Vec<DroppedColumn>,
    pub excluded_ranges: Vec<(NaiveDateTime, NaiveDateTime)>,
    /// Present when calendar features were engineered at fit time.
    pub calendar: Option<CalendarSettings>,
    pub lambda_per_column: BTreeMap<String, f64>,
    pub scaler: BTreeMap<String, ColumnScaler>,
    /// Column order after drops and engineering, before selection.
    pub fitted_columns: Vec<String>,
    pub selected_features: Vec<String>,
    pub pca: Option<PcaState>,
    pub target_scaler: ColumnScaler,
}

impl PipelineState {
    /// Fraction of feature columns removed between `fitted_columns` and the
    /// final matrix; reported alongside PCA results.
    pub fn reduction_fraction(&self) -> f64 {
        let before = self.fitted_columns.len() as f64;
        if before == 0.0 {
            return 0.0;
        }
        let after = match &self.pca {
            Some(p) => p.n_components() as f64,
            None => self.selected_features.len() as f64,
        };
        1.0 - after / before
    }

    pub fn final_feature_count(&self) -> usize {
        match &self.pca {
            Some(p) => p.n_components(),
            None => self.selected_features.len(),
        }
    }
}

/// A transformed frame with row-aligned targets and timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedFrame {
    pub features: FeatureMatrix,
    /// Timestamp of each feature row (the forecast is for `horizon` rows later).
    pub timestamps: Vec<NaiveDateTime>,
    /// Observed target in original units, aligned with `features` rows.
    pub target_raw: Vec<f64>,
    /// The same targets through the fitted target scaler.
    pub target_std: Vec<f64>,
}

fn column_values(col: &Column, what: &str) -> Result<Vec<f64>> {
    col.values
        .iter()
        .map(|v| {
            v.ok_or_else(|| {
                Error::Pipeline(format!("column '{}' still has missing cells at {what}", col.name))
            })
        })
        .collect()
}

/// Shared front half of fit and apply: recorded drops, exclusion, imputation,
/// calendar engineering, then recorded drops again for engineered columns.
fn clean_frame(
    frame: &TimeSeriesFrame,
    drop_names: &[String],
    excluded: &[(NaiveDateTime, NaiveDateTime)],
    calendar: Option<&CalendarSettings>,
) -> Result<TimeSeriesFrame> {
    let keep: Vec<Column> = frame
        .columns
        .iter()
        .filter(|c| !drop_names.contains(&c.name))
        .cloned()
        .collect();
    if keep.is_empty() {
        return Err(Error::Pipeline("no columns left after recorded drops".into()));
    }
    let mut cleaned = TimeSeriesFrame {
        cadence: frame.cadence,
        timestamps: frame.timestamps.clone(),
        columns: keep,
    };
    cleaned = exclude_date_range(&cleaned, excluded)?;
    cleaned = impute_quadratic(&cleaned)?;
    if let Some(settings) = calendar {
        cleaned = engineer_time_features(&cleaned, settings)?;
        cleaned.columns.retain(|c| !drop_names.contains(&c.name));
    }
    Ok(cleaned)
}

/// Fits the whole chain on a frame and returns the state plus the training
/// set (standardized features and target). All parameters are fitted on the
/// feature rows only — the final `horizon` rows, whose targets fall outside
/// the frame, never influence any fitted statistic.
pub fn pipeline_fit(
    frame: &TimeSeriesFrame,
    config: &PipelineConfig,
) -> Result<(PipelineState, TrainingSet)> {
    config.validate()?;
    frame.validate()?;
    if frame.column(&config.target).is_none() {
        return Err(Error::Pipeline(format!(
            "target column '{}' not found in frame",
            config.target
        )));
    }

    // Sparse drop is detected here and replayed from the record afterwards.
    let mut dropped = Vec::new();
    for col in &frame.columns {
        let fraction = col.missing_fraction();
        if fraction > config.sparse_threshold {
            if col.name == config.target {
                return Err(Error::Pipeline(format!(
                    "target column '{}' is {:.0}% missing",
                    config.target,
                    fraction * 100.0
                )));
            }
            dropped.push(DroppedColumn {
                name: col.name.clone(),
                reason: DropReason::Sparse {
                    missing_fraction: fraction,
                },
            });
        }
    }
    if dropped.len() == frame.columns.len() {
        return Err(Error::Pipeline("every column is too sparse".into()));
    }
    let raw_names: Vec<String> = frame
        .columns
        .iter()
        .map(|c| c.name.clone())
        .filter(|n| !dropped.iter().any(|d| &d.name == n))
        .collect();

    let drop_names: Vec<String> = dropped.iter().map(|d| d.name.clone()).collect();
    let calendar = config.engineer_calendar.then_some(config.calendar);
    let cleaned = clean_frame(frame, &drop_names, &config.excluded_ranges, calendar.as_ref())?;

    let n = cleaned.n_rows();
    if n < config.horizon + 2 {
        return Err(Error::Pipeline(format!(
            "{n} rows remain after exclusion; need at least horizon + 2 = {}",
            config.horizon + 2
        )));
    }
    let fit_len = n - config.horizon;

    // Constant columns cannot be standardized; record and drop them.
    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    for col in &cleaned.columns {
        let values = column_values(col, "fit")?;
        let window = &values[..fit_len];
        if window.iter().all(|&v| v == window[0]) {
            if col.name == config.target {
                return Err(Error::Pipeline(format!(
                    "target column '{}' is constant over the training rows",
                    config.target
                )));
            }
            dropped.push(DroppedColumn {
                name: col.name.clone(),
                reason: DropReason::Constant,
            });
        } else {
            kept.push((col.name.clone(), values));
        }
    }
    if kept.is_empty() {
        return Err(Error::Pipeline("every column is constant".into()));
    }

    // Power transform applies to raw pollutant columns, not to the bounded
    // calendar features.
    let mut lambda_per_column = BTreeMap::new();
    let mut scaler = BTreeMap::new();
    let mut standardized: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, values) in &kept {
        let mut column = values.clone();
        if config.power_transform && raw_names.contains(name) {
            let lambda = yeo_johnson_fit(&column[..fit_len]).map_err(|e| {
                Error::Pipeline(format!("power transform on '{name}': {e}"))
            })?;
            for v in &mut column {
                *v = yeo_johnson(*v, lambda);
            }
            lambda_per_column.insert(name.clone(), lambda);
        }
        let s = ColumnScaler::fit(&column[..fit_len], name)?;
        for v in &mut column {
            *v = s.apply(*v);
        }
        scaler.insert(name.clone(), s);
        standardized.push((name.clone(), column));
    }

    let fitted_columns: Vec<String> = standardized.iter().map(|(n, _)| n.clone()).collect();
    let mut data = Vec::with_capacity(fit_len * standardized.len());
    for r in 0..fit_len {
        for (_, col) in &standardized {
            data.push(col[r]);
        }
    }
    let fit_matrix =
        FeatureMatrix::new(fitted_columns.clone(), fit_len, standardized.len(), data)?;

    let selected_features = select_features(
        &fit_matrix,
        &SelectOptions {
            threshold: config.correlation_threshold,
            forced_drops: config.forced_drops.clone(),
            always_keep: raw_names.clone(),
        },
    );
    if selected_features.is_empty() {
        return Err(Error::Pipeline("feature selection removed every column".into()));
    }

    let target_col = cleaned
        .column(&config.target)
        .expect("target survives drops");
    let target_values = column_values(target_col, "fit")?;
    let y_raw: Vec<f64> = (0..fit_len)
        .map(|i| target_values[i + config.horizon])
        .collect();
    let target_scaler = ColumnScaler::fit(&y_raw, &format!("target '{}'", config.target))?;

    let mut state = PipelineState {
        target_name: config.target.clone(),
        horizon: config.horizon,
        cadence: frame.cadence,
        dropped_columns: dropped,
        excluded_ranges: config.excluded_ranges.clone(),
        calendar,
        lambda_per_column,
        scaler,
        fitted_columns,
        selected_features,
        pca: None,
        target_scaler,
    };

    // Fit PCA on exactly the matrix the state produces, then replay the full
    // state so the returned training matrix is bitwise what apply yields.
    if let Some(threshold) = config.pca_variance_threshold {
        let base = pipeline_apply(frame, &state)?;
        state.pca = Some(pca_fit(&base, threshold)?);
    }
    let applied = pipeline_apply_full(frame, &state)?;
    let train = TrainingSet::new(applied.features, applied.target_std)?;
    Ok((state, train))
}

/// Replays a fitted state on a frame and returns features, timestamps, and
/// aligned targets. Pure: identical inputs give bitwise identical outputs.
pub fn pipeline_apply_full(frame: &TimeSeriesFrame, state: &PipelineState) -> Result<AppliedFrame> {
    frame.validate()?;
    if frame.column(&state.target_name).is_none() {
        return Err(Error::Pipeline(format!(
            "target column '{}' not found in frame",
            state.target_name
        )));
    }
    let drop_names: Vec<String> = state.dropped_columns.iter().map(|d| d.name.clone()).collect();
    let cleaned = clean_frame(frame, &drop_names, &state.excluded_ranges, state.calendar.as_ref())?;

    for name in &state.fitted_columns {
        if cleaned.column(name).is_none() {
            return Err(Error::Pipeline(format!(
                "fitted column '{name}' missing from the frame"
            )));
        }
    }
    for col in &cleaned.columns {
        if !state.fitted_columns.contains(&col.name) {
            return Err(Error::Pipeline(format!(
                "column '{}' was not present at fit time",
                col.name
            )));
        }
    }

    let n = cleaned.n_rows();
    if n < state.horizon + 1 {
        return Err(Error::Pipeline(format!(
            "{n} rows remain after exclusion; need at least horizon + 1 = {}",
            state.horizon + 1
        )));
    }
    let usable = n - state.horizon;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(state.fitted_columns.len());
    for name in &state.fitted_columns {
        let col = cleaned.column(name).expect("checked above");
        let mut values = column_values(col, "apply")?;
        if let Some(&lambda) = state.lambda_per_column.get(name) {
            for v in &mut values {
                *v = yeo_johnson(*v, lambda);
            }
        }
        let s = state
            .scaler
            .get(name)
            .ok_or_else(|| Error::Pipeline(format!("no scaler recorded for '{name}'")))?;
        for v in &mut values {
            *v = s.apply(*v);
        }
        columns.push(values);
    }

    let mut data = Vec::with_capacity(usable * columns.len());
    for r in 0..usable {
        for col in &columns {
            data.push(col[r]);
        }
    }
    let full = FeatureMatrix::new(
        state.fitted_columns.clone(),
        usable,
        columns.len(),
        data,
    )?;
    let mut features = full.select_columns(&state.selected_features)?;
    if let Some(pca) = &state.pca {
        features = pca_apply(&features, pca)?;
    }

    let target_col = cleaned.column(&state.target_name).expect("checked above");
    let target_values = column_values(target_col, "apply")?;
    let target_raw: Vec<f64> = (0..usable)
        .map(|i| target_values[i + state.horizon])
        .collect();
    let target_std: Vec<f64> = target_raw
        .iter()
        .map(|&v| state.target_scaler.apply(v))
        .collect();

    Ok(AppliedFrame {
        features,
        timestamps: cleaned.timestamps[..usable].to_vec(),
        target_raw,
        target_std,
    })
}

/// Replays a fitted state and returns only the feature matrix.
pub fn pipeline_apply(frame: &TimeSeriesFrame, state: &PipelineState) -> Result<FeatureMatrix> {
    Ok(pipeline_apply_full(frame, state)?.features)
}

/// Transforms a frame for forecasting without trimming the horizon tail, so
/// the last rows produce predictions beyond the end of the frame. Returns the
/// features and the timestamp of each feature row.
pub fn pipeline_transform_unlabeled(
    frame: &TimeSeriesFrame,
    state: &PipelineState,
) -> Result<(FeatureMatrix, Vec<NaiveDateTime>)> {
    // Reuse the trimming path on a state with horizon 0; the fitted
    // parameters are untouched.
    let mut untrimmed = state.clone();
    untrimmed.horizon = 0;
    let applied = pipeline_apply_full(frame, &untrimmed)?;
    Ok((applied.features, applied.timestamps))
}
