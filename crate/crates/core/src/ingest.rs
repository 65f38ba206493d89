//! CSV ingestion for the two supported dataset schemas.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Cadence, Column, TimeSeriesFrame};

/// The two input layouts. Headers are matched case-insensitively after
/// trimming; an empty cell means a missing observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetSchema {
    /// `datetime,pm25,pm10[,aqi]` — hourly particulate readings with an
    /// optional recorded index column.
    EmbassyHourly,
    /// `date,station_id,so2,no2,pm25,pm10,spm` — daily multi-station records.
    CpcbDaily,
}

impl DatasetSchema {
    pub fn cadence(self) -> Cadence {
        match self {
            DatasetSchema::EmbassyHourly => Cadence::Hourly,
            DatasetSchema::CpcbDaily => Cadence::Daily,
        }
    }

    /// Measurement units of a pollutant column in this schema; `None` for
    /// unknown columns and for the dimensionless `aqi` column.
    pub fn column_units(self, column: &str) -> Option<&'static str> {
        match self {
            DatasetSchema::EmbassyHourly => match column {
                "pm25" | "pm10" => Some("ug/m3"),
                _ => None,
            },
            DatasetSchema::CpcbDaily => match column {
                "so2" | "no2" | "pm25" | "pm10" | "spm" => Some("ug/m3"),
                _ => None,
            },
        }
    }
}

/// How multiple CPCB stations collapse into one series per date.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StationMode {
    /// Average the stations that reported a value; all-missing stays missing.
    #[default]
    Average,
    /// Keep only one station's rows.
    Single(String),
}

/// Reads a CSV file into a typed frame. CPCB stations are averaged per date.
pub fn ingest_csv(path: &Path, schema: DatasetSchema) -> Result<TimeSeriesFrame> {
    ingest_csv_with_options(path, schema, &StationMode::Average)
}

/// As [`ingest_csv`] with an explicit station mode (CPCB only).
pub fn ingest_csv_with_options(
    path: &Path,
    schema: DatasetSchema,
    station: &StationMode,
) -> Result<TimeSeriesFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Schema(format!("cannot open {}: {e}", path.display())))?;
    match schema {
        DatasetSchema::EmbassyHourly => ingest_embassy(&mut reader),
        DatasetSchema::CpcbDaily => ingest_cpcb(&mut reader, station),
    }
}

fn header_names(reader: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?;
    Ok(headers
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_cell(raw: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>().map(Some).map_err(|_| Error::ParseCsv {
        line,
        column: column.to_string(),
        message: format!("'{raw}' is not a number"),
    })
}

fn parse_datetime(raw: &str, line: u64, column: &str) -> Result<NaiveDateTime> {
    let raw = raw.trim();
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| Error::ParseCsv {
            line,
            column: column.to_string(),
            message: format!("'{raw}' is not an ISO-8601 datetime"),
        })
}

fn parse_date(raw: &str, line: u64, column: &str) -> Result<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| Error::ParseCsv {
        line,
        column: column.to_string(),
        message: format!("'{raw}' is not a YYYY-MM-DD date"),
    })
}

fn ingest_embassy(reader: &mut csv::Reader<std::fs::File>) -> Result<TimeSeriesFrame> {
    let headers = header_names(reader)?;
    let with_aqi = match headers.as_slice() {
        [a, b, c] if a == "datetime" && b == "pm25" && c == "pm10" => false,
        [a, b, c, d] if a == "datetime" && b == "pm25" && c == "pm10" && d == "aqi" => true,
        _ => {
            return Err(Error::Schema(format!(
                "embassy-hourly expects header datetime,pm25,pm10[,aqi]; got {}",
                headers.join(",")
            )));
        }
    };

    let mut timestamps = Vec::new();
    let mut pm25 = Vec::new();
    let mut pm10 = Vec::new();
    let mut aqi = Vec::new();
    let mut prev: Option<NaiveDateTime> = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Schema(format!("csv read error: {e}")))?;
        let line = record_line(&record);
        let t = parse_datetime(&record[0], line, "datetime")?;
        if let Some(p) = prev {
            if t <= p {
                return Err(Error::ParseCsv {
                    line,
                    column: "datetime".into(),
                    message: format!("timestamp {t} does not increase past {p}"),
                });
            }
        }
        prev = Some(t);
        timestamps.push(t);
        pm25.push(parse_cell(&record[1], line, "pm25")?);
        pm10.push(parse_cell(&record[2], line, "pm10")?);
        if with_aqi {
            aqi.push(parse_cell(&record[3], line, "aqi")?);
        }
    }

    let mut columns = vec![Column::new("pm25", pm25), Column::new("pm10", pm10)];
    if with_aqi {
        columns.push(Column::new("aqi", aqi));
    }
    TimeSeriesFrame::new(Cadence::Hourly, timestamps, columns)
}

const CPCB_POLLUTANTS: [&str; 5] = ["so2", "no2", "pm25", "pm10", "spm"];

fn ingest_cpcb(
    reader: &mut csv::Reader<std::fs::File>,
    station: &StationMode,
) -> Result<TimeSeriesFrame> {
    let headers = header_names(reader)?;
    let expected = ["date", "station_id", "so2", "no2", "pm25", "pm10", "spm"];
    if headers != expected {
        return Err(Error::Schema(format!(
            "cpcb-daily expects header {}; got {}",
            expected.join(","),
            headers.join(",")
        )));
    }

    // (sum, count) per pollutant per date; count 0 keeps the cell missing.
    let mut by_date: BTreeMap<NaiveDate, [(f64, u32); 5]> = BTreeMap::new();
    let mut last_per_station: BTreeMap<String, NaiveDate> = BTreeMap::new();
    let mut matched_any = false;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Schema(format!("csv read error: {e}")))?;
        let line = record_line(&record);
        let date = parse_date(&record[0], line, "date")?;
        let station_id = record[1].trim().to_string();
        if station_id.is_empty() {
            return Err(Error::ParseCsv {
                line,
                column: "station_id".into(),
                message: "station_id is empty".into(),
            });
        }
        if let Some(&last) = last_per_station.get(&station_id) {
            if date < last {
                return Err(Error::ParseCsv {
                    line,
                    column: "date".into(),
                    message: format!(
                        "date {date} precedes {last} for station {station_id}"
                    ),
                });
            }
        }
        last_per_station.insert(station_id.clone(), date);

        if let StationMode::Single(wanted) = station {
            if &station_id != wanted {
                continue;
            }
        }
        matched_any = true;
        let slot = by_date.entry(date).or_insert([(0.0, 0); 5]);
        for (i, name) in CPCB_POLLUTANTS.iter().enumerate() {
            if let Some(v) = parse_cell(&record[2 + i], line, name)? {
                slot[i].0 += v;
                slot[i].1 += 1;
            }
        }
    }
    if let StationMode::Single(wanted) = station {
        if !matched_any {
            return Err(Error::Schema(format!("no rows for station '{wanted}'")));
        }
    }

    let timestamps: Vec<NaiveDateTime> = by_date
        .keys()
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists"))
        .collect();
    let mut columns = Vec::with_capacity(5);
    for (i, name) in CPCB_POLLUTANTS.iter().enumerate() {
        let values = by_date
            .values()
            .map(|slot| {
                let (sum, count) = slot[i];
                (count > 0).then(|| sum / count as f64)
            })
            .collect();
        columns.push(Column::new(*name, values));
    }
    TimeSeriesFrame::new(Cadence::Daily, timestamps, columns)
}
