//! Report rendering: the metrics table, the 3x3 AQI confusion matrices, the
//! observed-vs-error scatter data, and the run manifest.

use aqcast_core::aqi::Label3;
use aqcast_core::frame::TimeSeriesFrame;
use aqcast_core::metrics::MetricsRecord;

use crate::config::RunConfig;
use crate::run::{SplitEval, VariantOutcome, HOLDOUT_FRACTION};

const METRIC_ROWS: [&str; 4] = ["MAE", "R2", "RMSE", "nRMSE"];

fn metric_value(m: &MetricsRecord, row: &str) -> f64 {
    match row {
        "MAE" => m.mae,
        "R2" => m.r2,
        "RMSE" => m.rmse,
        "nRMSE" => m.nrmse,
        _ => unreachable!("fixed row set"),
    }
}

/// The four-row metrics table with one Training/Validation column pair per
/// variant, values to 3 decimal places.
pub fn metrics_csv(variants: &[VariantOutcome]) -> String {
    let mut out = String::from("metric");
    for v in variants {
        out.push_str(&format!(",{}_train,{}_validation", v.label, v.label));
    }
    out.push('\n');
    for row in METRIC_ROWS {
        out.push_str(row);
        for v in variants {
            out.push_str(&format!(
                ",{:.3},{:.3}",
                metric_value(&v.train_eval.metrics, row),
                metric_value(&v.validation_eval.metrics, row)
            ));
        }
        out.push('\n');
    }
    out
}

/// Metrics for a single split (the `evaluate` subcommand).
pub fn single_metrics_csv(m: &MetricsRecord) -> String {
    let mut out = String::from("metric,value\n");
    for row in METRIC_ROWS {
        out.push_str(&format!("{row},{:.3}\n", metric_value(m, row)));
    }
    out
}

fn confusion_rows(out: &mut String, dataset: &str, label: &str, matrix: &[Vec<u64>]) {
    for (i, l3) in Label3::ALL.iter().enumerate() {
        out.push_str(&format!(
            "{dataset},{label},{},{},{},{}\n",
            l3.label(),
            matrix[i][0],
            matrix[i][1],
            matrix[i][2]
        ));
    }
}

/// Confusion matrices in the collapsed Good/Moderate/Unhealthy layout; one
/// 3-row block per (split, variant).
pub fn confusion_csv(variants: &[VariantOutcome]) -> String {
    let mut out = String::from("dataset,model,true_category,Good,Moderate,Unhealthy\n");
    for dataset in ["train", "validation"] {
        for v in variants {
            let eval = if dataset == "train" {
                &v.train_eval
            } else {
                &v.validation_eval
            };
            match &eval.confusion {
                Some(m) => confusion_rows(&mut out, dataset, v.label, m),
                None => out.push_str(&format!(
                    "# {dataset},{}: target has no AQI mapping\n",
                    v.label
                )),
            }
        }
    }
    out
}

pub fn single_confusion_csv(matrix: &[Vec<u64>]) -> String {
    let mut out = String::from("true_category,Good,Moderate,Unhealthy\n");
    for (i, l3) in Label3::ALL.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            l3.label(),
            matrix[i][0],
            matrix[i][1],
            matrix[i][2]
        ));
    }
    out
}

/// Plot-ready `(observed, forecast error)` pairs for one split, tagged by
/// variant.
pub fn scatter_csv<'a>(
    variants: &'a [VariantOutcome],
    pick: impl Fn(&'a VariantOutcome) -> &'a SplitEval,
) -> String {
    let mut out = String::from("model,observed,error\n");
    for v in variants {
        for (observed, error) in &pick(v).scatter {
            out.push_str(&format!("{},{observed},{error}\n", v.label));
        }
    }
    out
}

pub fn single_scatter_csv(eval: &SplitEval) -> String {
    let mut out = String::from("observed,error\n");
    for (observed, error) in &eval.scatter {
        out.push_str(&format!("{observed},{error}\n"));
    }
    out
}

/// Key/value run manifest: protocol constants, chosen hyperparameters, and
/// the achieved dimensionality reduction per variant.
pub fn manifest(
    config: &RunConfig,
    full: &TimeSeriesFrame,
    train: &TimeSeriesFrame,
    holdout: &TimeSeriesFrame,
    variants: &[VariantOutcome],
) -> String {
    let mut out = String::from("[run]\n");
    out.push_str(&format!("seed={}\n", config.seed));
    out.push_str(&format!("input={}\n", config.input.display()));
    out.push_str(&format!("target={}\n", config.target));
    out.push_str(&format!("horizon={}\n", config.horizon));
    out.push_str(&format!("folds={}\n", config.folds));
    out.push_str(&format!("search_iterations={}\n", config.iterations));
    out.push_str(&format!("c_range={}..{}\n", config.c_min, config.c_max));
    out.push_str(&format!(
        "epsilon_grid={}..{} step {}\n",
        config.epsilon_min, config.epsilon_max, config.epsilon_step
    ));
    out.push_str(&format!("holdout_fraction={HOLDOUT_FRACTION}\n"));
    out.push_str(&format!("rows_total={}\n", full.n_rows()));
    out.push_str(&format!("rows_train={}\n", train.n_rows()));
    out.push_str(&format!("rows_validation={}\n", holdout.n_rows()));
    out.push_str(&format!("excluded_ranges={}\n", config.excluded.len()));

    for v in variants {
        out.push_str(&format!("\n[variant {}]\n", v.label));
        out.push_str(&format!("kernel={}\n", v.best.kernel.describe()));
        out.push_str(&format!("c={}\n", v.best.c));
        out.push_str(&format!("epsilon={}\n", v.best.epsilon));
        out.push_str(&format!("cv_mean_rmse={:.6}\n", v.cv_mean_rmse));
        out.push_str(&format!("features_before_reduction={}\n", v.features_before));
        out.push_str(&format!("features_after_reduction={}\n", v.features_after));
        if let Some(pca) = &v.artifact.pipeline.pca {
            out.push_str(&format!("pca_components={}\n", pca.n_components()));
        }
        out.push_str(&format!(
            "feature_reduction_fraction={:.3}\n",
            v.artifact.pipeline.reduction_fraction()
        ));
        out.push_str(&format!(
            "support_vectors={}\n",
            v.artifact.model.n_support()
        ));
        out.push_str(&format!(
            "solver_iterations={}\n",
            v.artifact.model.solver_report.iterations
        ));
        // Category-classification accuracy (confusion-matrix diagonal over
        // total) is the most plausible reading of a single "accuracy" figure
        // for this protocol, and is labeled as such.
        if let Some(acc) = v.train_eval.category_accuracy {
            out.push_str(&format!("category_classification_accuracy_train={acc:.3}\n"));
        }
        if let Some(acc) = v.validation_eval.category_accuracy {
            out.push_str(&format!(
                "category_classification_accuracy_validation={acc:.3}\n"
            ));
        }
    }
    out
}
