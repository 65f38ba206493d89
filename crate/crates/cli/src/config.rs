//! Run configuration: a flat key/value file plus command-line overrides.

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};

use aqcast_core::error::{Error, Result};
use aqcast_core::ingest::{DatasetSchema, StationMode};
use aqcast_core::preprocess::PipelineConfig;
use aqcast_core::svr::SolverConfig;

/// Which kernels the search considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Rbf,
    Poly,
    Both,
}

/// Whether to run with PCA, without, or both side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaMode {
    On,
    Off,
    Both,
}

impl PcaMode {
    /// Variant labels in report order.
    pub fn variants(self) -> Vec<bool> {
        match self {
            PcaMode::On => vec![true],
            PcaMode::Off => vec![false],
            PcaMode::Both => vec![true, false],
        }
    }
}

/// Fully resolved configuration for `run`, `tune`, and `train`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub schema: DatasetSchema,
    pub station: StationMode,
    pub target: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub kernel: KernelChoice,
    /// RBF width / polynomial scale; `None` selects the data-driven default.
    pub gamma: Option<f64>,
    pub degree: u32,
    pub coef0: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub epsilon_step: f64,
    pub iterations: usize,
    pub folds: usize,
    pub pca: PcaMode,
    pub pca_variance_threshold: f64,
    pub horizon: usize,
    pub excluded: Vec<(NaiveDateTime, NaiveDateTime)>,
    pub engineer_calendar: bool,
    pub power_transform: bool,
    pub correlation_threshold: f64,
    pub kkt_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            schema: DatasetSchema::EmbassyHourly,
            station: StationMode::Average,
            target: String::new(),
            output_dir: PathBuf::from("aqcast_out"),
            seed: 0,
            kernel: KernelChoice::Rbf,
            gamma: None,
            degree: 3,
            coef0: 1.0,
            c_min: 1.0,
            c_max: 100.0,
            epsilon_min: 0.001,
            epsilon_max: 0.1,
            epsilon_step: 0.001,
            iterations: 60,
            folds: 5,
            pca: PcaMode::Both,
            pca_variance_threshold: 0.95,
            horizon: 1,
            excluded: Vec::new(),
            engineer_calendar: true,
            power_transform: true,
            correlation_threshold: 0.9,
            kkt_tolerance: 1e-3,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input file configured".into()));
        }
        if self.target.is_empty() {
            return Err(Error::Config("no target column configured".into()));
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max) {
            return Err(Error::Config(format!(
                "C range [{}, {}] is invalid",
                self.c_min, self.c_max
            )));
        }
        if !(self.epsilon_min >= 0.0
            && self.epsilon_min <= self.epsilon_max
            && self.epsilon_step > 0.0)
        {
            return Err(Error::Config(format!(
                "epsilon grid [{}, {}] step {} is invalid",
                self.epsilon_min, self.epsilon_max, self.epsilon_step
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.folds == 0 {
            return Err(Error::Config("folds must be >= 1".into()));
        }
        if !(0.0 < self.pca_variance_threshold && self.pca_variance_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "pca_variance_threshold must lie in (0, 1], got {}",
                self.pca_variance_threshold
            )));
        }
        if !self.kkt_tolerance.is_finite() || self.kkt_tolerance <= 0.0 {
            return Err(Error::Config("kkt_tolerance must be > 0".into()));
        }
        if matches!(self.station, StationMode::Single(_))
            && self.schema != DatasetSchema::CpcbDaily
        {
            return Err(Error::Config(
                "station selection only applies to the cpcb-daily schema".into(),
            ));
        }
        Ok(())
    }

    /// The ε grid implied by min/max/step. The default 0.001..0.100 grid is
    /// built as k/1000 so the sampled values are the canonical grid members.
    pub fn epsilon_grid(&self) -> Vec<f64> {
        if self.epsilon_min == 0.001 && self.epsilon_max == 0.1 && self.epsilon_step == 0.001 {
            return aqcast_core::tuning::SearchSpace::default_epsilon_grid();
        }
        let count = ((self.epsilon_max - self.epsilon_min) / self.epsilon_step).round() as usize;
        (0..=count)
            .map(|i| self.epsilon_min + i as f64 * self.epsilon_step)
            .filter(|&e| e <= self.epsilon_max + self.epsilon_step * 1e-9)
            .collect()
    }

    /// Pipeline settings for one variant (PCA on or off).
    pub fn pipeline_config(&self, pca: bool) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(self.target.clone());
        cfg.horizon = self.horizon;
        cfg.excluded_ranges = self.excluded.clone();
        cfg.engineer_calendar = self.engineer_calendar;
        cfg.power_transform = self.power_transform;
        cfg.correlation_threshold = self.correlation_threshold;
        cfg.pca_variance_threshold = pca.then_some(self.pca_variance_threshold);
        cfg
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            kkt_tolerance: self.kkt_tolerance,
            ..SolverConfig::default()
        }
    }
}

pub fn parse_schema(value: &str) -> Result<DatasetSchema> {
    match value {
        "embassy-hourly" => Ok(DatasetSchema::EmbassyHourly),
        "cpcb-daily" => Ok(DatasetSchema::CpcbDaily),
        other => Err(Error::Config(format!(
            "unknown schema '{other}' (expected embassy-hourly or cpcb-daily)"
        ))),
    }
}

pub fn parse_kernel(value: &str) -> Result<KernelChoice> {
    match value {
        "rbf" => Ok(KernelChoice::Rbf),
        "poly" => Ok(KernelChoice::Poly),
        "rbf,poly" | "poly,rbf" | "both" => Ok(KernelChoice::Both),
        other => Err(Error::Config(format!(
            "unknown kernel '{other}' (expected rbf, poly, or rbf,poly)"
        ))),
    }
}

fn parse_pca(value: &str) -> Result<PcaMode> {
    match value {
        "on" => Ok(PcaMode::On),
        "off" => Ok(PcaMode::Off),
        "both" => Ok(PcaMode::Both),
        other => Err(Error::Config(format!(
            "unknown pca mode '{other}' (expected on, off, or both)"
        ))),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        other => Err(Error::Config(format!("{key}: '{other}' is not a boolean"))),
    }
}

fn parse_instant(value: &str) -> Result<NaiveDateTime> {
    if let Ok(dt) = NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S") {
        return Ok(dt);
    }
    if let Ok(d) = NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists"));
    }
    Err(Error::Config(format!(
        "'{value}' is neither a date nor an ISO-8601 datetime"
    )))
}

/// Parses `START..END`. A bare end date widens to the end of that day so a
/// whole-day range excludes every hourly row inside it.
pub fn parse_exclude_range(value: &str) -> Result<(NaiveDateTime, NaiveDateTime)> {
    let (start_raw, end_raw) = value.split_once("..").ok_or_else(|| {
        Error::Config(format!("exclusion '{value}' must look like START..END"))
    })?;
    let start = parse_instant(start_raw.trim())?;
    let end = if end_raw.trim().len() == 10 {
        NaiveDate::parse_from_str(end_raw.trim(), "%Y-%m-%d")
            .map_err(|_| Error::Config(format!("bad exclusion end '{end_raw}'")))?
            .and_hms_opt(23, 59, 59)
            .expect("end of day exists")
    } else {
        parse_instant(end_raw.trim())?
    };
    if start > end {
        return Err(Error::Config(format!("exclusion '{value}' is inverted")));
    }
    Ok((start, end))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

/// Applies one `key = value` pair. Unknown keys are rejected.
fn apply_pair(config: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "input" => config.input = PathBuf::from(value),
        "schema" => config.schema = parse_schema(value)?,
        "station" => {
            config.station = if value == "average" {
                StationMode::Average
            } else {
                StationMode::Single(value.to_string())
            }
        }
        "target" => config.target = value.to_string(),
        "output_dir" => config.output_dir = PathBuf::from(value),
        "seed" => config.seed = parse_num(key, value)?,
        "kernel" => config.kernel = parse_kernel(value)?,
        "gamma" => {
            config.gamma = if value == "auto" {
                None
            } else {
                Some(parse_num(key, value)?)
            }
        }
        "degree" => config.degree = parse_num(key, value)?,
        "coef0" => config.coef0 = parse_num(key, value)?,
        "c_min" => config.c_min = parse_num(key, value)?,
        "c_max" => config.c_max = parse_num(key, value)?,
        "epsilon_min" => config.epsilon_min = parse_num(key, value)?,
        "epsilon_max" => config.epsilon_max = parse_num(key, value)?,
        "epsilon_step" => config.epsilon_step = parse_num(key, value)?,
        "iterations" => config.iterations = parse_num(key, value)?,
        "folds" => config.folds = parse_num(key, value)?,
        "pca" => config.pca = parse_pca(value)?,
        "pca_variance_threshold" => config.pca_variance_threshold = parse_num(key, value)?,
        "horizon" => config.horizon = parse_num(key, value)?,
        "exclude" => config.excluded.push(parse_exclude_range(value)?),
        "engineer_calendar" => config.engineer_calendar = parse_bool(key, value)?,
        "power_transform" => config.power_transform = parse_bool(key, value)?,
        "correlation_threshold" => config.correlation_threshold = parse_num(key, value)?,
        "kkt_tolerance" => config.kkt_tolerance = parse_num(key, value)?,
        other => {
            return Err(Error::Config(format!("unknown config key '{other}'")));
        }
    }
    Ok(())
}

/// Loads a flat `key = value` config file. `#` lines and blanks are skipped;
/// `exclude` may repeat.
pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = RunConfig::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", i + 1))
        })?;
        apply_pair(&mut config, key.trim(), value.trim())
            .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
    }
    Ok(config)
}

/// Command-line overrides; every field beats the config-file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub schema: Option<String>,
    pub station: Option<String>,
    pub target: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kernel: Option<String>,
    pub pca: Option<bool>,
    pub exclude: Vec<String>,
    pub folds: Option<usize>,
    pub iterations: Option<usize>,
    pub horizon: Option<usize>,
}

/// Resolves the effective configuration from an optional file plus overrides.
pub fn resolve_config(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match file {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &overrides.input {
        config.input = v.clone();
    }
    if let Some(v) = &overrides.schema {
        config.schema = parse_schema(v)?;
    }
    if let Some(v) = &overrides.station {
        config.station = if v == "average" {
            StationMode::Average
        } else {
            StationMode::Single(v.clone())
        };
    }
    if let Some(v) = &overrides.target {
        config.target = v.clone();
    }
    if let Some(v) = &overrides.output_dir {
        config.output_dir = v.clone();
    }
    if let Some(v) = overrides.seed {
        config.seed = v;
    }
    if let Some(v) = &overrides.kernel {
        config.kernel = parse_kernel(v)?;
    }
    if let Some(v) = overrides.pca {
        config.pca = if v { PcaMode::On } else { PcaMode::Off };
    }
    for range in &overrides.exclude {
        config.excluded.push(parse_exclude_range(range)?);
    }
    if let Some(v) = overrides.folds {
        config.folds = v;
    }
    if let Some(v) = overrides.iterations {
        config.iterations = v;
    }
    if let Some(v) = overrides.horizon {
        config.horizon = v;
    }
    config.validate()?;
    Ok(config)
}
