//! Subcommand implementations: the full experiment protocol plus the smaller
//! tune/train/predict/evaluate/aqi/ingest-check entry points.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::SecondsFormat;

use aqcast_core::aqi::{
    aqi_overall, aqi_subindex, categorize, classification_accuracy, confusion_matrix,
    AqiBreakpointTable, Label3,
};
use aqcast_core::artifact::{load_model, save_model, ArtifactMetadata, ModelArtifact};
use aqcast_core::error::{Error, Result};
use aqcast_core::frame::{Cadence, TimeSeriesFrame};
use aqcast_core::ingest::{ingest_csv_with_options, DatasetSchema};
use aqcast_core::kernels::KernelSpec;
use aqcast_core::metrics::{compute_metrics, MetricsRecord};
use aqcast_core::preprocess::{pipeline_apply_full, pipeline_fit, pipeline_transform_unlabeled};
use aqcast_core::svr::{predict_rows, solve_dual, HyperParams, SvrModel};
use aqcast_core::tuning::{random_search, time_series_split, trial_log_csv, SearchSpace};

use crate::config::{KernelChoice, RunConfig};
use crate::report;

/// Fraction of rows held out chronologically for the reported validation
/// metrics.
pub const HOLDOUT_FRACTION: f64 = 0.3;

/// Creation timestamp for artifacts; honors `SOURCE_DATE_EPOCH` so runs can
/// be made byte-reproducible.
pub fn created_at() -> String {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
    {
        if let Some(dt) = chrono::DateTime::from_timestamp(epoch, 0) {
            return dt.to_rfc3339_opts(SecondsFormat::Secs, true);
        }
    }
    chrono::Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn ingest(config: &RunConfig) -> Result<TimeSeriesFrame> {
    ingest_csv_with_options(&config.input, config.schema, &config.station)
}

/// Concrete kernel candidates for a training matrix; an unset gamma resolves
/// to the scale-aware default.
pub fn resolve_kernels(
    config: &RunConfig,
    train_x: &aqcast_core::matrix::FeatureMatrix,
) -> Result<Vec<KernelSpec>> {
    let d = train_x.n_cols();
    let rbf = || -> Result<KernelSpec> {
        match config.gamma {
            Some(g) => KernelSpec::rbf(g),
            None => KernelSpec::rbf_scaled(train_x),
        }
    };
    let poly = || -> Result<KernelSpec> {
        let gamma = config.gamma.unwrap_or(1.0 / d as f64);
        KernelSpec::polynomial(gamma, config.degree, config.coef0)
    };
    match config.kernel {
        KernelChoice::Rbf => Ok(vec![rbf()?]),
        KernelChoice::Poly => Ok(vec![poly()?]),
        KernelChoice::Both => Ok(vec![rbf()?, poly()?]),
    }
}

/// Everything the report writers need about one split of one variant.
pub struct SplitEval {
    pub metrics: MetricsRecord,
    /// `(observed_raw, error_raw)` pairs for the scatter file.
    pub scatter: Vec<(f64, f64)>,
    /// 3x3 confusion counts when the target maps onto the AQI scale.
    pub confusion: Option<Vec<Vec<u64>>>,
    pub category_accuracy: Option<f64>,
}

/// One PCA-on or PCA-off arm of the protocol.
pub struct VariantOutcome {
    pub label: &'static str,
    pub artifact: ModelArtifact,
    pub best: HyperParams,
    pub cv_mean_rmse: f64,
    pub trials_csv: String,
    pub train_eval: SplitEval,
    pub validation_eval: SplitEval,
    pub features_before: usize,
    pub features_after: usize,
}

/// Maps a raw target value onto an AQI category: the `aqi` column is already
/// an index; pollutant concentrations go through their sub-index, which fails
/// when the data's units do not match the breakpoint table's. Forecast values
/// are clamped into the valid domain first.
fn target_category(
    table: &AqiBreakpointTable,
    target: &str,
    units: Option<&str>,
    value: f64,
) -> Option<aqcast_core::aqi::AqiCategory> {
    if target.eq_ignore_ascii_case("aqi") {
        return categorize(value.clamp(0.0, 500.0)).ok();
    }
    let sub = aqi_subindex(table, target, value.max(0.0), units?).ok()?;
    categorize(sub).ok()
}

fn evaluate_split(
    frame: &TimeSeriesFrame,
    artifact: &ModelArtifact,
    table: &AqiBreakpointTable,
) -> Result<SplitEval> {
    let schema = schema_for_cadence(artifact.pipeline.cadence);
    let units = schema.column_units(&artifact.metadata.target);
    let applied = pipeline_apply_full(frame, &artifact.pipeline)?;
    let pred_std = predict_rows(&artifact.model, &applied.features)?;
    let metrics = compute_metrics(&applied.target_std, &pred_std)?;

    let scaler = &artifact.pipeline.target_scaler;
    let mut scatter = Vec::with_capacity(pred_std.len());
    let mut true_cats = Vec::new();
    let mut pred_cats = Vec::new();
    let mut mappable = true;
    for (i, &z) in pred_std.iter().enumerate() {
        let observed = applied.target_raw[i];
        let forecast = scaler.invert(z);
        scatter.push((observed, forecast - observed));
        if mappable {
            match (
                target_category(table, &artifact.metadata.target, units, observed),
                target_category(table, &artifact.metadata.target, units, forecast),
            ) {
                (Some(t), Some(p)) => {
                    true_cats.push(t.collapse3());
                    pred_cats.push(p.collapse3());
                }
                _ => mappable = false,
            }
        }
    }
    let confusion = if mappable && !true_cats.is_empty() {
        Some(confusion_matrix(&true_cats, &pred_cats, &Label3::ALL)?)
    } else {
        None
    };
    let category_accuracy = confusion.as_ref().map(|m| classification_accuracy(m));
    Ok(SplitEval {
        metrics,
        scatter,
        confusion,
        category_accuracy,
    })
}

fn run_variant(
    config: &RunConfig,
    pca: bool,
    train_frame: &TimeSeriesFrame,
    holdout_frame: &TimeSeriesFrame,
    table: &AqiBreakpointTable,
) -> Result<VariantOutcome> {
    let label = if pca { "pca" } else { "no_pca" };
    let pipeline_config = config.pipeline_config(pca);
    let (state, train) = pipeline_fit(train_frame, &pipeline_config)?;
    let kernels = resolve_kernels(config, &train.x)?;

    let space = SearchSpace {
        c_range: (config.c_min, config.c_max),
        epsilon_grid: config.epsilon_grid(),
        kernel_candidates: kernels,
        iterations: config.iterations,
        seed: config.seed,
    };
    let plan = time_series_split(train_frame.n_rows(), config.folds)?;
    let solver = config.solver_config();
    let (best, trials) = random_search(train_frame, &pipeline_config, &space, &plan, &solver)?;
    let cv_mean_rmse = trials
        .iter()
        .filter(|t| t.hyper == best)
        .map(|t| t.mean_rmse)
        .fold(f64::INFINITY, f64::min);

    let mut model: SvrModel = solve_dual(&train, &best, &solver)?;
    model.target_name = config.target.clone();

    let features_before = state.fitted_columns.len();
    let features_after = state.final_feature_count();
    let artifact = ModelArtifact::new(
        state,
        model,
        ArtifactMetadata {
            target: config.target.clone(),
            created_at: created_at(),
            seed: config.seed,
            search_summary: format!(
                "random grid search: {} iterations, {} folds, best C={} epsilon={} kernel={}",
                config.iterations,
                config.folds,
                best.c,
                best.epsilon,
                best.kernel.describe()
            ),
        },
    );

    let train_eval = evaluate_split(train_frame, &artifact, table)?;
    let validation_eval = evaluate_split(holdout_frame, &artifact, table)?;

    Ok(VariantOutcome {
        label,
        artifact,
        best,
        cv_mean_rmse,
        trials_csv: trial_log_csv(&trials),
        train_eval,
        validation_eval,
        features_before,
        features_after,
    })
}

/// Paths of the files a successful run writes.
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub variant_count: usize,
}

/// The full protocol: ingest, chronological 70/30 split, random grid search
/// on the training portion, final fit, evaluation, and report emission.
/// All outputs are buffered and written only after every computation has
/// succeeded.
pub fn cmd_run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let table = AqiBreakpointTable::embedded_default();
    let frame = ingest(config)?;
    let (train_frame, holdout_frame) = frame.split_tail(HOLDOUT_FRACTION);
    if holdout_frame.n_rows() < config.horizon + 2 {
        return Err(Error::Config(format!(
            "holdout of {} rows is too small for horizon {}",
            holdout_frame.n_rows(),
            config.horizon
        )));
    }

    let mut variants = Vec::new();
    for pca in config.pca.variants() {
        variants.push(run_variant(
            config,
            pca,
            &train_frame,
            &holdout_frame,
            &table,
        )?);
    }

    // All computation done; emit the report set.
    std::fs::create_dir_all(&config.output_dir)?;
    let mut files = Vec::new();
    let write = |name: &str, content: String| -> Result<PathBuf> {
        let path = config.output_dir.join(name);
        std::fs::write(&path, content)?;
        Ok(path)
    };

    files.push(write("metrics.csv", report::metrics_csv(&variants))?);
    files.push(write("confusion.csv", report::confusion_csv(&variants))?);
    files.push(write(
        "scatter_train.csv",
        report::scatter_csv(&variants, |v| &v.train_eval),
    )?);
    files.push(write(
        "scatter_val.csv",
        report::scatter_csv(&variants, |v| &v.validation_eval),
    )?);
    files.push(write(
        "manifest.txt",
        report::manifest(config, &frame, &train_frame, &holdout_frame, &variants),
    )?);
    for v in &variants {
        files.push(write(&format!("trials_{}.csv", v.label), v.trials_csv.clone())?);
        let model_path = config.output_dir.join(format!("model_{}.json", v.label));
        save_model(&v.artifact, &model_path)?;
        files.push(model_path);
    }

    Ok(RunSummary {
        output_dir: config.output_dir.clone(),
        variant_count: variants.len(),
        files,
    })
}

/// Hyperparameter search only; writes the trial log and prints the winner.
pub fn cmd_tune(config: &RunConfig) -> Result<(HyperParams, PathBuf)> {
    config.validate()?;
    let frame = ingest(config)?;
    let pca = matches!(config.pca, crate::config::PcaMode::On);
    let pipeline_config = config.pipeline_config(pca);
    let (_, train) = pipeline_fit(&frame, &pipeline_config)?;
    let kernels = resolve_kernels(config, &train.x)?;
    let space = SearchSpace {
        c_range: (config.c_min, config.c_max),
        epsilon_grid: config.epsilon_grid(),
        kernel_candidates: kernels,
        iterations: config.iterations,
        seed: config.seed,
    };
    let plan = time_series_split(frame.n_rows(), config.folds)?;
    let (best, trials) =
        random_search(&frame, &pipeline_config, &space, &plan, &config.solver_config())?;
    std::fs::create_dir_all(&config.output_dir)?;
    let path = config.output_dir.join("trials.csv");
    std::fs::write(&path, trial_log_csv(&trials))?;
    Ok((best, path))
}

/// Fits the pipeline and trains one model with explicit hyperparameters.
pub fn cmd_train(config: &RunConfig, c: f64, epsilon: f64, out: &Path) -> Result<PathBuf> {
    config.validate()?;
    let frame = ingest(config)?;
    let pca = matches!(config.pca, crate::config::PcaMode::On);
    let pipeline_config = config.pipeline_config(pca);
    let (state, train) = pipeline_fit(&frame, &pipeline_config)?;
    let kernels = resolve_kernels(config, &train.x)?;
    let hyper = HyperParams::new(c, epsilon, kernels[0])?;
    let mut model = solve_dual(&train, &hyper, &config.solver_config())?;
    model.target_name = config.target.clone();
    let artifact = ModelArtifact::new(
        state,
        model,
        ArtifactMetadata {
            target: config.target.clone(),
            created_at: created_at(),
            seed: config.seed,
            search_summary: format!("fixed hyperparameters C={c} epsilon={epsilon}"),
        },
    );
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_model(&artifact, out)?;
    Ok(out.to_path_buf())
}

fn schema_for_cadence(cadence: Cadence) -> DatasetSchema {
    match cadence {
        Cadence::Hourly => DatasetSchema::EmbassyHourly,
        Cadence::Daily => DatasetSchema::CpcbDaily,
    }
}

/// Forecasts from a saved model over an input file; every input row yields a
/// forecast `horizon` cadence units past its timestamp.
pub fn cmd_predict(model_path: &Path, input: &Path, output: &Path) -> Result<usize> {
    let artifact = load_model(model_path)?;
    let schema = schema_for_cadence(artifact.pipeline.cadence);
    let frame = ingest_csv_with_options(input, schema, &Default::default())?;
    let (features, times) = pipeline_transform_unlabeled(&frame, &artifact.pipeline)?;
    let pred_std = predict_rows(&artifact.model, &features)?;
    let unit = chrono::Duration::seconds(artifact.pipeline.cadence.unit_seconds());
    let horizon = artifact.pipeline.horizon as i32;

    let mut out = format!("timestamp,forecast_timestamp,predicted_{}\n", artifact.metadata.target);
    for (i, &z) in pred_std.iter().enumerate() {
        let value = artifact.pipeline.target_scaler.invert(z);
        out.push_str(&format!(
            "{},{},{value}\n",
            times[i].format("%Y-%m-%dT%H:%M:%S"),
            (times[i] + unit * horizon).format("%Y-%m-%dT%H:%M:%S"),
        ));
    }
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(output, out)?;
    Ok(pred_std.len())
}

/// Scores a saved model on a labeled input file.
pub fn cmd_evaluate(model_path: &Path, input: &Path, output_dir: &Path) -> Result<MetricsRecord> {
    let artifact = load_model(model_path)?;
    let table = AqiBreakpointTable::embedded_default();
    let schema = schema_for_cadence(artifact.pipeline.cadence);
    let frame = ingest_csv_with_options(input, schema, &Default::default())?;
    let eval = evaluate_split(&frame, &artifact, &table)?;

    std::fs::create_dir_all(output_dir)?;
    std::fs::write(
        output_dir.join("evaluation_metrics.csv"),
        report::single_metrics_csv(&eval.metrics),
    )?;
    std::fs::write(
        output_dir.join("evaluation_scatter.csv"),
        report::single_scatter_csv(&eval),
    )?;
    if let Some(m) = &eval.confusion {
        std::fs::write(
            output_dir.join("evaluation_confusion.csv"),
            report::single_confusion_csv(m),
        )?;
    }
    Ok(eval.metrics)
}

/// Parses and summarizes an input file without computing anything.
pub fn cmd_ingest_check(config: &RunConfig) -> Result<String> {
    let frame = ingest(config)?;
    let mut out = String::new();
    out.push_str(&format!(
        "rows: {}\ncadence: {:?}\nfirst: {}\nlast: {}\n",
        frame.n_rows(),
        frame.cadence,
        frame.timestamps.first().map(|t| t.to_string()).unwrap_or_default(),
        frame.timestamps.last().map(|t| t.to_string()).unwrap_or_default(),
    ));
    for col in &frame.columns {
        out.push_str(&format!(
            "column {}: {:.1}% missing\n",
            col.name,
            col.missing_fraction() * 100.0
        ));
    }
    Ok(out)
}

/// Sub-index and category per reading, plus the overall index and its
/// dominant pollutant.
pub fn cmd_aqi(readings: &[(String, f64)], table_path: Option<&Path>) -> Result<String> {
    if readings.is_empty() {
        return Err(Error::InputShape("no readings given".into()));
    }
    let table = match table_path {
        Some(p) => AqiBreakpointTable::load(p)?,
        None => AqiBreakpointTable::embedded_default(),
    };
    let mut subindices = BTreeMap::new();
    let mut out = String::new();
    for (pollutant, value) in readings {
        let units = table
            .pollutant(pollutant)
            .ok_or_else(|| Error::UnknownPollutant(pollutant.clone()))?
            .units
            .clone();
        let sub = aqi_subindex(&table, pollutant, *value, &units)?;
        let category = categorize(sub)?;
        out.push_str(&format!(
            "{pollutant}: {value} {units} -> sub-index {sub:.1} ({})\n",
            category.label()
        ));
        subindices.insert(pollutant.to_ascii_lowercase(), sub);
    }
    let (overall, dominant) = aqi_overall(&subindices)?;
    let category = categorize(overall)?;
    out.push_str(&format!(
        "overall AQI {overall:.1} ({}), dominant pollutant: {dominant}\n{}\n",
        category.label(),
        category.description()
    ));
    Ok(out)
}
