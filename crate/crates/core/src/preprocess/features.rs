//! Calendar and cyclic feature engineering from timestamps.

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Cadence, Column, TimeSeriesFrame};

/// Names of the generated columns.
pub const SEASON: &str = "season";
pub const HOUR_SIN: &str = "hour_sin";
pub const HOUR_COS: &str = "hour_cos";
pub const DAY: &str = "day";
pub const MONTH: &str = "month";
pub const YEAR: &str = "year";

/// Month-to-season code table, indexed by `month - 1`.
///
/// Default: meteorological quarters — Winter {Dec, Jan, Feb} = 0,
/// Spring {Mar, Apr, May} = 1, Summer {Jun, Jul, Aug} = 2,
/// Fall {Sep, Oct, Nov} = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarSettings {
    pub season_of_month: [u8; 12],
}

impl Default for CalendarSettings {
    fn default() -> Self {
        Self {
            season_of_month: [0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0],
        }
    }
}

/// Adds `season`, `day`, `month`, `year` columns (and `hour_sin`, `hour_cos`
/// for hourly frames), fully observed, after the existing columns.
pub fn engineer_time_features(
    frame: &TimeSeriesFrame,
    settings: &CalendarSettings,
) -> Result<TimeSeriesFrame> {
    let mut generated = vec![SEASON, DAY, MONTH, YEAR];
    if frame.cadence == Cadence::Hourly {
        generated.extend([HOUR_SIN, HOUR_COS]);
    }
    for name in &generated {
        if frame.column(name).is_some() {
            return Err(Error::Pipeline(format!(
                "frame already has a column named '{name}'"
            )));
        }
    }

    let n = frame.n_rows();
    let mut season = Vec::with_capacity(n);
    let mut day = Vec::with_capacity(n);
    let mut month = Vec::with_capacity(n);
    let mut year = Vec::with_capacity(n);
    let mut hour_sin = Vec::with_capacity(n);
    let mut hour_cos = Vec::with_capacity(n);
    for t in &frame.timestamps {
        let m = t.month();
        season.push(Some(settings.season_of_month[(m - 1) as usize] as f64));
        day.push(Some(t.day() as f64));
        month.push(Some(m as f64));
        year.push(Some(t.year() as f64));
        if frame.cadence == Cadence::Hourly {
            let phase = 2.0 * std::f64::consts::PI * t.hour() as f64 / 24.0;
            hour_sin.push(Some(phase.sin()));
            hour_cos.push(Some(phase.cos()));
        }
    }

    let mut out = frame.clone();
    out.columns.push(Column::new(SEASON, season));
    if frame.cadence == Cadence::Hourly {
        out.columns.push(Column::new(HOUR_SIN, hour_sin));
        out.columns.push(Column::new(HOUR_COS, hour_cos));
    }
    out.columns.push(Column::new(DAY, day));
    out.columns.push(Column::new(MONTH, month));
    out.columns.push(Column::new(YEAR, year));
    Ok(out)
}
