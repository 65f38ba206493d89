//! `aqcast` — pollutant and AQI forecasting over CSV time series.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aqcast_cli::config::{resolve_config, Overrides};
use aqcast_cli::run;
use aqcast_core::error::{Error, Result};

#[derive(Parser)]
#[command(name = "aqcast", version, about = "SVR forecasting of pollutant levels and the air quality index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the data-driven subcommands; each overrides the
/// corresponding config-file key.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV path.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input schema: embassy-hourly or cpcb-daily.
    #[arg(long)]
    schema: Option<String>,
    /// CPCB station handling: "average" or a station id.
    #[arg(long)]
    station: Option<String>,
    /// Target column to forecast.
    #[arg(long)]
    target: Option<String>,
    /// Directory for report files.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Seed for every random draw in the program.
    #[arg(long)]
    seed: Option<u64>,
    /// Kernel family: rbf, poly, or rbf,poly.
    #[arg(long)]
    kernel: Option<String>,
    /// Run the PCA variant only.
    #[arg(long, conflicts_with = "no_pca")]
    pca: bool,
    /// Run the no-PCA variant only.
    #[arg(long)]
    no_pca: bool,
    /// Exclude a closed timestamp range (START..END); repeatable.
    #[arg(long)]
    exclude: Vec<String>,
    /// Number of expanding-window folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Random-search iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Forecast horizon in rows.
    #[arg(long)]
    horizon: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            input: self.input.clone(),
            schema: self.schema.clone(),
            station: self.station.clone(),
            target: self.target.clone(),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            kernel: self.kernel.clone(),
            pca: if self.pca {
                Some(true)
            } else if self.no_pca {
                Some(false)
            } else {
                None
            },
            exclude: self.exclude.clone(),
            folds: self.folds,
            iterations: self.iterations,
            horizon: self.horizon,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse an input file and print a summary.
    IngestCheck(CommonArgs),
    /// Random grid search over (C, epsilon); writes trials.csv.
    Tune(CommonArgs),
    /// Train one model with explicit hyperparameters.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Regularization weight C.
        #[arg(long)]
        c: f64,
        /// Tube half-width epsilon (standardized target units).
        #[arg(long)]
        epsilon: f64,
        /// Where to write the model artifact.
        #[arg(long, default_value = "model.json")]
        model_out: PathBuf,
    },
    /// Forecast from a saved model over an input file.
    Predict {
        /// Model artifact path.
        #[arg(long)]
        model: PathBuf,
        /// Input CSV (schema inferred from the model's cadence).
        #[arg(long)]
        input: PathBuf,
        /// Output CSV of forecasts.
        #[arg(long, default_value = "predictions.csv")]
        output: PathBuf,
    },
    /// Score a saved model on a labeled input file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "aqcast_out")]
        output_dir: PathBuf,
    },
    /// Compute AQI sub-indices, the overall index, and categories.
    Aqi {
        /// Pollutant reading as NAME=CONCENTRATION (table units); repeatable.
        #[arg(long, required = true)]
        reading: Vec<String>,
        /// Alternative breakpoint table file.
        #[arg(long)]
        breakpoints: Option<PathBuf>,
    },
    /// The full protocol: ingest, tune, fit, evaluate, and write reports.
    Run(CommonArgs),
}

fn parse_reading(raw: &str) -> Result<(String, f64)> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("reading '{raw}' must look like NAME=VALUE")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("reading '{raw}': bad concentration")))?;
    Ok((name.trim().to_string(), value))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::IngestCheck(common) => {
            let config = resolve_config_for_ingest(&common)?;
            print!("{}", run::cmd_ingest_check(&config)?);
        }
        Command::Tune(common) => {
            let config = resolve_config(common.config.as_deref(), &common.overrides())?;
            let (best, path) = run::cmd_tune(&config)?;
            println!(
                "best: C={} epsilon={} kernel={}",
                best.c,
                best.epsilon,
                best.kernel.describe()
            );
            println!("trial log: {}", path.display());
        }
        Command::Train {
            common,
            c,
            epsilon,
            model_out,
        } => {
            let config = resolve_config(common.config.as_deref(), &common.overrides())?;
            let path = run::cmd_train(&config, c, epsilon, &model_out)?;
            println!("model written to {}", path.display());
        }
        Command::Predict {
            model,
            input,
            output,
        } => {
            let n = run::cmd_predict(&model, &input, &output)?;
            println!("{n} forecasts written to {}", output.display());
        }
        Command::Evaluate {
            model,
            input,
            output_dir,
        } => {
            let m = run::cmd_evaluate(&model, &input, &output_dir)?;
            println!(
                "MAE={:.3} R2={:.3} RMSE={:.3} nRMSE={:.3} (n={})",
                m.mae, m.r2, m.rmse, m.nrmse, m.n
            );
            println!("reports in {}", output_dir.display());
        }
        Command::Aqi {
            reading,
            breakpoints,
        } => {
            let readings = reading
                .iter()
                .map(|r| parse_reading(r))
                .collect::<Result<Vec<_>>>()?;
            print!("{}", run::cmd_aqi(&readings, breakpoints.as_deref())?);
        }
        Command::Run(common) => {
            let config = resolve_config(common.config.as_deref(), &common.overrides())?;
            let summary = run::cmd_run(&config)?;
            println!(
                "{} variant(s) complete; {} files in {}",
                summary.variant_count,
                summary.files.len(),
                summary.output_dir.display()
            );
        }
    }
    Ok(())
}

/// ingest-check has no required target; fill a placeholder so the shared
/// resolver's validation passes.
fn resolve_config_for_ingest(common: &CommonArgs) -> Result<aqcast_cli::RunConfig> {
    let mut overrides = common.overrides();
    if overrides.target.is_none() {
        overrides.target = Some("unused".into());
    }
    resolve_config(common.config.as_deref(), &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
