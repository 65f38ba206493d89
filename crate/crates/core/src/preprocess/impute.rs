//! Missing-data handling: sparse-column removal, quadratic imputation, and
//! date-range exclusion.

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;

/// Drops every column whose missing fraction is strictly greater than
/// `threshold`. Returns the surviving frame and the dropped column names.
pub fn drop_sparse_columns(
    frame: &TimeSeriesFrame,
    threshold: f64,
) -> Result<(TimeSeriesFrame, Vec<String>)> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for col in &frame.columns {
        if col.missing_fraction() > threshold {
            dropped.push(col.name.clone());
        } else {
            kept.push(col.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Pipeline(format!(
            "all {} columns exceed the {threshold} missing-fraction threshold",
            frame.columns.len()
        )));
    }
    Ok((
        TimeSeriesFrame {
            cadence: frame.cadence,
            timestamps: frame.timestamps.clone(),
            columns: kept,
        },
        dropped,
    ))
}

/// Fills every missing cell by evaluating the quadratic through the 3 nearest
/// observed points of the same column (nearest by timestamp distance, ties
/// toward the earlier point). Fills are clamped to
/// `[min_observed - range, max_observed + range]` to bound extrapolation at
/// the series edges.
pub fn impute_quadratic(frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame> {
    let mut out = frame.clone();
    let times = &frame.timestamps;
    for col in &mut out.columns {
        if col.values.iter().all(|v| v.is_some()) {
            continue;
        }
        let observed: Vec<(usize, f64)> = col.observed().collect();
        if observed.len() < 3 {
            return Err(Error::Pipeline(format!(
                "column '{}' has only {} observed values; quadratic imputation needs 3",
                col.name,
                observed.len()
            )));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &(_, v) in &observed {
            min = min.min(v);
            max = max.max(v);
        }
        let range = max - min;
        let (lo, hi) = (min - range, max + range);

        for idx in 0..col.values.len() {
            if col.values[idx].is_some() {
                continue;
            }
            let picks = nearest_three(&observed, times, times[idx]);
            let value = lagrange_at(&picks, times, times[idx]).clamp(lo, hi);
            col.values[idx] = Some(value);
        }
    }
    Ok(out)
}

/// The 3 observed points nearest to `target`, ties toward earlier timestamps.
fn nearest_three(
    observed: &[(usize, f64)],
    times: &[NaiveDateTime],
    target: NaiveDateTime,
) -> [(usize, f64); 3] {
    // `observed` is ordered by row index, hence by time; walk outward from the
    // insertion point. The left candidate wins distance ties.
    let pos = observed.partition_point(|&(i, _)| times[i] < target);
    let mut left = pos.checked_sub(1);
    let mut right = if pos < observed.len() { Some(pos) } else { None };
    let mut picks = [(0usize, 0.0f64); 3];
    for slot in picks.iter_mut() {
        let take_left = match (left, right) {
            (Some(l), Some(r)) => {
                let dl = (target - times[observed[l].0]).num_seconds().abs();
                let dr = (times[observed[r].0] - target).num_seconds().abs();
                dl <= dr
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!("caller guarantees >= 3 observed points"),
        };
        if take_left {
            let l = left.unwrap();
            *slot = observed[l];
            left = l.checked_sub(1);
        } else {
            let r = right.unwrap();
            *slot = observed[r];
            right = if r + 1 < observed.len() { Some(r + 1) } else { None };
        }
    }
    picks
}

/// Evaluates the unique quadratic through three points at `target`, working in
/// seconds relative to `target` for numerical stability.
fn lagrange_at(
    picks: &[(usize, f64); 3],
    times: &[NaiveDateTime],
    target: NaiveDateTime,
) -> f64 {
    let u: Vec<f64> = picks
        .iter()
        .map(|&(i, _)| (times[i] - target).num_seconds() as f64)
        .collect();
    let mut value = 0.0;
    for k in 0..3 {
        let mut basis = 1.0;
        for l in 0..3 {
            if l != k {
                basis *= (0.0 - u[l]) / (u[k] - u[l]);
            }
        }
        value += picks[k].1 * basis;
    }
    value
}

/// Removes rows whose timestamp falls inside any closed `[start, end]` range.
pub fn exclude_date_range(
    frame: &TimeSeriesFrame,
    ranges: &[(NaiveDateTime, NaiveDateTime)],
) -> Result<TimeSeriesFrame> {
    for (start, end) in ranges {
        if start > end {
            return Err(Error::InvalidParam(format!(
                "exclusion range start {start} is after end {end}"
            )));
        }
    }
    let keep: Vec<usize> = (0..frame.n_rows())
        .filter(|&i| {
            let t = frame.timestamps[i];
            !ranges.iter().any(|&(s, e)| s <= t && t <= e)
        })
        .collect();
    Ok(frame.select_rows(&keep))
}
