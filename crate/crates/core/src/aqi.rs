//! Air-quality-index computation: piecewise-linear sub-indices from a
//! breakpoint table, the max rule for the overall index, category lookup,
//! and confusion matrices.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top of the index scale; concentrations above the last segment clamp here.
pub const AQI_MAX: f64 = 500.0;

/// One breakpoint segment: concentrations in `[conc_lo, conc_hi]` map
/// linearly onto `[aqi_lo, aqi_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointSegment {
    pub averaging_period: String,
    pub conc_lo: f64,
    pub conc_hi: f64,
    pub aqi_lo: f64,
    pub aqi_hi: f64,
}

/// All segments for one pollutant, with the concentration units they expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollutantBreakpoints {
    pub units: String,
    pub segments: Vec<BreakpointSegment>,
}

/// Versioned per-pollutant breakpoint table loaded from a text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AqiBreakpointTable {
    pub version: u32,
    pub pollutants: BTreeMap<String, PollutantBreakpoints>,
}

const HEADER_PREFIX: &str = "aqi-breakpoints v";
const EMBEDDED_TABLE: &str = include_str!("../data/epa_breakpoints_v1.txt");

impl AqiBreakpointTable {
    /// The EPA table shipped with the crate.
    pub fn embedded_default() -> Self {
        Self::parse(EMBEDDED_TABLE).expect("embedded breakpoint table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses the text format: a `aqi-breakpoints v<N>` header line followed
    /// by `pollutant,averaging_period,units,conc_lo,conc_hi,aqi_lo,aqi_hi`
    /// records. `#` lines and blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("empty breakpoint table".into()))?
            .trim();
        let version: u32 = header
            .strip_prefix(HEADER_PREFIX)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| {
                Error::Schema(format!(
                    "breakpoint table must start with '{HEADER_PREFIX}<N>', got '{header}'"
                ))
            })?;
        if version != 1 {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: 1,
            });
        }
        let mut pollutants: BTreeMap<String, PollutantBreakpoints> = BTreeMap::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(Error::Schema(format!(
                    "breakpoint line {}: expected 7 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::Schema(format!(
                        "breakpoint line {}: bad {what} '{s}'",
                        lineno + 2
                    ))
                })
            };
            let seg = BreakpointSegment {
                averaging_period: fields[1].to_string(),
                conc_lo: parse(fields[3], "conc_lo")?,
                conc_hi: parse(fields[4], "conc_hi")?,
                aqi_lo: parse(fields[5], "aqi_lo")?,
                aqi_hi: parse(fields[6], "aqi_hi")?,
            };
            let entry = pollutants
                .entry(fields[0].to_ascii_lowercase())
                .or_insert_with(|| PollutantBreakpoints {
                    units: fields[2].to_string(),
                    segments: Vec::new(),
                });
            // Units must agree across a pollutant's rows.
            if entry.units != fields[2] {
                return Err(Error::Schema(format!(
                    "breakpoint line {}: units '{}' conflict with '{}'",
                    lineno + 2,
                    fields[2],
                    entry.units
                )));
            }
            entry.segments.push(seg);
        }
        let table = Self {
            version,
            pollutants,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pollutants.is_empty() {
            return Err(Error::Schema("breakpoint table has no pollutants".into()));
        }
        for (name, p) in &self.pollutants {
            let segs = &p.segments;
            if segs.is_empty() {
                return Err(Error::Schema(format!("pollutant '{name}' has no segments")));
            }
            for s in segs {
                if !(s.conc_lo >= 0.0 && s.conc_lo < s.conc_hi) {
                    return Err(Error::Schema(format!(
                        "pollutant '{name}': bad concentration range [{}, {}]",
                        s.conc_lo, s.conc_hi
                    )));
                }
                if !(s.aqi_lo >= 0.0 && s.aqi_lo < s.aqi_hi && s.aqi_hi <= AQI_MAX) {
                    return Err(Error::Schema(format!(
                        "pollutant '{name}': AQI range [{}, {}] outside [0, {AQI_MAX}]",
                        s.aqi_lo, s.aqi_hi
                    )));
                }
            }
            for w in segs.windows(2) {
                if w[1].conc_lo < w[0].conc_hi || w[1].aqi_lo < w[0].aqi_hi {
                    return Err(Error::Schema(format!(
                        "pollutant '{name}': segments overlap or decrease near conc {}",
                        w[1].conc_lo
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pollutant(&self, name: &str) -> Option<&PollutantBreakpoints> {
        self.pollutants.get(&name.to_ascii_lowercase())
    }
}

/// Piecewise-linear sub-index for one pollutant concentration.
///
/// Concentrations above the top segment clamp to 500. `units` must match the
/// table's annotation for the pollutant.
pub fn aqi_subindex(
    table: &AqiBreakpointTable,
    pollutant: &str,
    concentration: f64,
    units: &str,
) -> Result<f64> {
    let p = table
        .pollutant(pollutant)
        .ok_or_else(|| Error::UnknownPollutant(pollutant.to_string()))?;
    if !concentration.is_finite() || concentration < 0.0 {
        return Err(Error::InputShape(format!(
            "concentration must be finite and >= 0, got {concentration}"
        )));
    }
    if !p.units.eq_ignore_ascii_case(units) {
        return Err(Error::InputShape(format!(
            "concentration units '{units}' do not match table units '{}' for {pollutant}",
            p.units
        )));
    }
    let top = p.segments.last().expect("validated non-empty");
    if concentration > top.conc_hi {
        return Ok(AQI_MAX);
    }
    for seg in &p.segments {
        if concentration <= seg.conc_hi {
            if concentration < seg.conc_lo {
                // Gap in a non-continuous table: snap to the next segment floor.
                return Ok(seg.aqi_lo);
            }
            let frac = (concentration - seg.conc_lo) / (seg.conc_hi - seg.conc_lo);
            return Ok(seg.aqi_lo + (seg.aqi_hi - seg.aqi_lo) * frac);
        }
    }
    unreachable!("concentration <= top.conc_hi always matches a segment")
}

/// Overall AQI: the maximum sub-index and its pollutant. Ties go to the
/// alphabetically first pollutant.
pub fn aqi_overall(subindices: &BTreeMap<String, f64>) -> Result<(f64, String)> {
    if subindices.is_empty() {
        return Err(Error::InputShape("no sub-indices given".into()));
    }
    let mut best: Option<(f64, &String)> = None;
    for (name, &v) in subindices {
        match best {
            // BTreeMap iterates alphabetically, so strict > keeps the first
            // pollutant on ties.
            Some((bv, _)) if v <= bv => {}
            _ => best = Some((v, name)),
        }
    }
    let (v, name) = best.expect("non-empty map");
    Ok((v, name.clone()))
}

/// The six index categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AqiCategory {
    Good,
    Moderate,
    UnhealthySensitive,
    Unhealthy,
    VeryUnhealthy,
    Hazardous,
}

impl AqiCategory {
    pub const ALL: [AqiCategory; 6] = [
        AqiCategory::Good,
        AqiCategory::Moderate,
        AqiCategory::UnhealthySensitive,
        AqiCategory::Unhealthy,
        AqiCategory::VeryUnhealthy,
        AqiCategory::Hazardous,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AqiCategory::Good => "Good",
            AqiCategory::Moderate => "Moderate",
            AqiCategory::UnhealthySensitive => "Unhealthy for sensitive groups",
            AqiCategory::Unhealthy => "Unhealthy",
            AqiCategory::VeryUnhealthy => "Very unhealthy",
            AqiCategory::Hazardous => "Hazardous",
        }
    }

    /// Short health-concern summary for the category.
    pub fn description(self) -> &'static str {
        match self {
            AqiCategory::Good => "air quality is satisfactory",
            AqiCategory::Moderate => {
                "acceptable air quality; a small number of unusually sensitive people may be affected"
            }
            AqiCategory::UnhealthySensitive => {
                "sensitive groups (lung disease, elderly, children) are at risk"
            }
            AqiCategory::Unhealthy => "everyone may experience health effects",
            AqiCategory::VeryUnhealthy => "health alert: serious effects for the whole population",
            AqiCategory::Hazardous => "emergency conditions: the entire population is affected",
        }
    }

    /// The three-class collapse used by the confusion-matrix report: every
    /// category at or above "unhealthy for sensitive groups" maps to one
    /// unhealthy label.
    pub fn collapse3(self) -> Label3 {
        match self {
            AqiCategory::Good => Label3::Good,
            AqiCategory::Moderate => Label3::Moderate,
            _ => Label3::Unhealthy,
        }
    }
}

impl fmt::Display for AqiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Collapsed three-class label set for report confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label3 {
    Good,
    Moderate,
    Unhealthy,
}

impl Label3 {
    pub const ALL: [Label3; 3] = [Label3::Good, Label3::Moderate, Label3::Unhealthy];

    pub fn label(self) -> &'static str {
        match self {
            Label3::Good => "Good",
            Label3::Moderate => "Moderate",
            Label3::Unhealthy => "Unhealthy",
        }
    }
}

/// Maps an index value in `[0, 500]` to its category. Fractional values are
/// rounded half-up to an integer before the range lookup.
pub fn categorize(aqi: f64) -> Result<AqiCategory> {
    if !aqi.is_finite() || !(0.0..=AQI_MAX).contains(&aqi) {
        return Err(Error::InputShape(format!(
            "AQI must lie in [0, {AQI_MAX}], got {aqi}"
        )));
    }
    let v = aqi.round() as u32; // non-negative, so round() is half-up
    Ok(match v {
        0..=50 => AqiCategory::Good,
        51..=100 => AqiCategory::Moderate,
        101..=150 => AqiCategory::UnhealthySensitive,
        151..=200 => AqiCategory::Unhealthy,
        201..=300 => AqiCategory::VeryUnhealthy,
        _ => AqiCategory::Hazardous,
    })
}

/// Confusion matrix with rows = true label, columns = predicted label, in the
/// order of `labels`.
pub fn confusion_matrix<L: PartialEq + fmt::Debug>(
    true_labels: &[L],
    pred_labels: &[L],
    labels: &[L],
) -> Result<Vec<Vec<u64>>> {
    if true_labels.len() != pred_labels.len() {
        return Err(Error::InputShape(format!(
            "{} true labels vs {} predicted",
            true_labels.len(),
            pred_labels.len()
        )));
    }
    let index_of = |l: &L| -> Result<usize> {
        labels
            .iter()
            .position(|k| k == l)
            .ok_or_else(|| Error::InputShape(format!("label {l:?} not in label set")))
    };
    let mut m = vec![vec![0u64; labels.len()]; labels.len()];
    for (t, p) in true_labels.iter().zip(pred_labels) {
        m[index_of(t)?][index_of(p)?] += 1;
    }
    Ok(m)
}

/// Fraction of agreeing pairs: diagonal over total.
pub fn classification_accuracy(matrix: &[Vec<u64>]) -> f64 {
    let total: u64 = matrix.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let diag: u64 = matrix.iter().enumerate().map(|(i, row)| row[i]).sum();
    diag as f64 / total as f64
}
