//! Operator command surface. `run` parses arguments, executes one subcommand and
//! returns the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use epiwatch_core::classify::EvalReport;
use epiwatch_core::timeseries::Disease;
use epiwatch_service::api::{send_alert, AlertRequest, Selection};
use epiwatch_service::artifacts::{self, ClassifierArtifact};
use epiwatch_service::pipeline::{self, ForecastEvaluation};
use epiwatch_service::{build_state, clock_for, open_store, Config, ServiceError};
use epiwatch_store::{Category, StoreError};

pub const DEMO_ADMIN_EMAIL: &str = "admin@epiwatch.local";
pub const DEMO_ADMIN_PASSWORD: &str = "epiwatch-demo";

#[derive(Parser, Debug)]
#[command(name = "epiwatch", version, about = "Epidemic early-warning system")]
pub struct Cli {
    /// TOML configuration file; EPIWATCH_* environment variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Arima,
    Lstm,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load the four source CSVs from a directory into the store.
    Ingest {
        /// Defaults to `sources_dir` from the configuration.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Train and save a forecaster for one disease.
    TrainForecaster {
        #[arg(long, value_parser = parse_disease)]
        disease: Disease,
        #[arg(long, value_enum)]
        model: ModelChoice,
    },
    /// Train all classifiers for one disease and save the selected one.
    TrainClassifier {
        #[arg(long, value_parser = parse_disease)]
        disease: Disease,
    },
    /// Print classifier and forecaster evaluation tables.
    Evaluate {
        #[arg(long, value_parser = parse_disease)]
        disease: Disease,
        /// Skip the LSTM row of the forecaster table.
        #[arg(long)]
        no_lstm: bool,
        /// Also write the classifier table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the next five weekly case forecasts.
    Forecast {
        #[arg(long, value_parser = parse_disease)]
        disease: Disease,
        #[arg(long, value_enum, default_value = "lstm")]
        model: ModelChoice,
    },
    /// Print the probability that next week is an outbreak week.
    Probability {
        #[arg(long, value_parser = parse_disease)]
        disease: Disease,
    },
    /// Write history and forecast as JSON for external plotting.
    ExportPlot {
        #[arg(long, value_parser = parse_disease)]
        disease: Disease,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "lstm")]
        model: ModelChoice,
    },
    /// Generate a synthetic history for every disease and create an admin account.
    SeedDemo {
        #[arg(long, default_value_t = 260)]
        weeks: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = DEMO_ADMIN_EMAIL)]
        admin_email: String,
        #[arg(long, default_value = DEMO_ADMIN_PASSWORD)]
        admin_password: String,
    },
    /// Run the HTTP API.
    Serve {
        /// 0 picks a free port.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Dispatch an alert to registered users.
    SendAlert {
        /// Comma-separated diseases or `all`.
        #[arg(long)]
        diseases: String,
        /// Comma-separated categories or `all`.
        #[arg(long)]
        categories: String,
        #[arg(long)]
        message: String,
    },
}

fn parse_disease(s: &str) -> Result<Disease, String> {
    s.parse()
}

fn parse_selection<T: std::str::FromStr>(s: &str) -> Result<Selection<T>, String>
where
    T::Err: std::fmt::Display,
{
    if s.trim() == "all" {
        return Ok(Selection::All);
    }
    let items = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<T>, String>>()?;
    if items.is_empty() {
        return Err("selection must not be empty".into());
    }
    Ok(Selection::Only(items))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn io(e: std::io::Error) -> ServiceError {
    ServiceError::Io(e.to_string())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), ServiceError> {
    let mut config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { dir } => {
            let dir = dir
                .or_else(|| config.sources_dir.clone())
                .ok_or_else(|| ServiceError::Config("no --dir given and no sources_dir configured".into()))?;
            let store = open_store(&config, clock_for(&config))?;
            let sources = pipeline::load_sources(&dir)?;
            for s in pipeline::ingest_sources(&store, &sources)? {
                writeln!(out, "{}: {} weeks ({} imputed)", s.disease, s.weeks, s.imputed).map_err(io)?;
            }
        }
        Command::TrainForecaster { disease, model } => {
            let store = open_store(&config, clock_for(&config))?;
            match model {
                ModelChoice::Lstm => {
                    let (art, eval) = pipeline::train_lstm(&store, disease, &config.training)?;
                    let path = artifacts::save_lstm(&config.models_dir, disease, &art)?;
                    write_forecast_eval(out, &eval)?;
                    writeln!(out, "saved {}", path.display()).map_err(io)?;
                }
                ModelChoice::Arima => {
                    let (model, report, eval) = pipeline::train_arima(&store, disease, &config.training)?;
                    let path = artifacts::save_arima(&config.models_dir, disease, &model)?;
                    write_forecast_eval(out, &eval)?;
                    writeln!(out, "order {} aic {:.4}", report.order, report.aic).map_err(io)?;
                    writeln!(out, "saved {}", path.display()).map_err(io)?;
                }
            }
        }
        Command::TrainClassifier { disease } => {
            let store = open_store(&config, clock_for(&config))?;
            let (reports, selected) = pipeline::train_classifiers(&store, disease, &config.training)?;
            write_classifier_table(out, &reports)?;
            let art: ClassifierArtifact = selected?;
            let chosen = reports.iter().find(|r| r.kind == art.selected).expect("selected kind has a report");
            let path = artifacts::save_classifier(&config.models_dir, &art)?;
            writeln!(
                out,
                "selected {} (test accuracy {:.4})\nsaved {}",
                art.selected,
                chosen.test_accuracy,
                path.display()
            )
            .map_err(io)?;
        }
        Command::Evaluate { disease, no_lstm, csv } => {
            let store = open_store(&config, clock_for(&config))?;
            let (reports, selected) = pipeline::train_classifiers(&store, disease, &config.training)?;
            writeln!(out, "classifiers ({disease})").map_err(io)?;
            write_classifier_table(out, &reports)?;
            match &selected {
                Ok(art) => writeln!(out, "selected {}", art.selected),
                Err(e) => writeln!(out, "selected none: {e}"),
            }
            .map_err(io)?;
            if let Some(path) = csv {
                let text = epiwatch_core::classify::write_reports_csv(&reports)?;
                std::fs::write(&path, text).map_err(io)?;
            }
            writeln!(out, "\nforecasters ({disease})").map_err(io)?;
            let (_, report, arima_eval) = pipeline::train_arima(&store, disease, &config.training)?;
            let mut evals = vec![arima_eval];
            if !no_lstm {
                evals.push(pipeline::train_lstm(&store, disease, &config.training)?.1);
            }
            write_forecaster_table(out, &evals)?;
            writeln!(out, "arima order {} aic {:.4}", report.order, report.aic).map_err(io)?;
        }
        Command::Forecast { disease, model } => {
            for v in forecast(&config, disease, model)? {
                writeln!(out, "{v:.4}").map_err(io)?;
            }
        }
        Command::Probability { disease } => {
            let store = open_store(&config, clock_for(&config))?;
            let bundle = artifacts::load_bundle(&config.models_dir, disease)?;
            let clf = bundle.classifier.ok_or(ServiceError::ModelNotTrained {
                disease,
                model: "classifier",
            })?;
            let p = pipeline::outbreak_probability(&clf, &store, disease)?;
            writeln!(out, "{p:.6}").map_err(io)?;
        }
        Command::ExportPlot { disease, out: path, model } => {
            let store = open_store(&config, clock_for(&config))?;
            let history = store.query_last_n(disease, pipeline::HISTORY_WEEKS)?;
            if history.len() < pipeline::MIN_DASHBOARD_WEEKS {
                return Err(ServiceError::InsufficientHistory {
                    required: pipeline::MIN_DASHBOARD_WEEKS,
                    actual: history.len(),
                });
            }
            let values = forecast(&config, disease, model)?;
            let name = match model {
                ModelChoice::Lstm => "lstm",
                ModelChoice::Arima => "arima",
            };
            let data = pipeline::plot_data(name, &values, &store, disease)?;
            let mut text = serde_json::to_string_pretty(&data).map_err(|e| ServiceError::Io(e.to_string()))?;
            text.push('\n');
            std::fs::write(&path, text).map_err(io)?;
            writeln!(
                out,
                "wrote {} ({} history, {} forecast points)",
                path.display(),
                data.history.len(),
                data.forecast.len()
            )
            .map_err(io)?;
        }
        Command::SeedDemo {
            weeks,
            seed,
            admin_email,
            admin_password,
        } => {
            let store = open_store(&config, clock_for(&config))?;
            let sources = pipeline::demo_sources(weeks, seed);
            if let Some(dir) = &config.sources_dir {
                pipeline::write_sources(dir, &sources)?;
            }
            let summary = pipeline::ingest_sources(&store, &sources)?;
            match store.create_admin("Demo admin", &admin_email, &admin_password) {
                Ok(_) | Err(StoreError::DuplicateEmail) => {}
                Err(e) => return Err(e.into()),
            }
            for s in summary {
                writeln!(out, "{}: {} weeks from {}", s.disease, s.weeks, pipeline::demo_start()).map_err(io)?;
            }
            writeln!(out, "admin {admin_email}").map_err(io)?;
        }
        Command::Serve { port } => {
            if let Some(p) = port {
                config.port = p;
            }
            let state = build_state(config.clone())?;
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(io)?;
            rt.block_on(async {
                let (listener, addr) = epiwatch_service::bind(&config).await?;
                writeln!(out, "listening on http://{addr}").map_err(io)?;
                out.flush().map_err(io)?;
                epiwatch_service::serve(listener, state, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })?;
        }
        Command::SendAlert {
            diseases,
            categories,
            message,
        } => {
            let req = AlertRequest {
                diseases: parse_selection::<Disease>(&diseases).map_err(ServiceError::Config)?,
                categories: parse_selection::<Category>(&categories).map_err(ServiceError::Config)?,
                message,
            };
            let state = build_state(config)?;
            let row = send_alert(&state.store, state.alerts.as_ref(), state.clock.as_ref(), &req)?;
            writeln!(out, "alert {}: {} sent, {} failed", row.id, row.sent(), row.failed()).map_err(io)?;
        }
    }
    Ok(())
}

fn forecast(config: &Config, disease: Disease, model: ModelChoice) -> Result<Vec<f64>, ServiceError> {
    let store = open_store(config, clock_for(config))?;
    let bundle = artifacts::load_bundle(&config.models_dir, disease)?;
    match model {
        ModelChoice::Lstm => {
            let art = bundle.lstm.ok_or(ServiceError::ModelNotTrained { disease, model: "lstm" })?;
            pipeline::forecast_lstm(&art, &store, disease)
        }
        ModelChoice::Arima => {
            let m = bundle.arima.ok_or(ServiceError::ModelNotTrained { disease, model: "arima" })?;
            pipeline::forecast_arima(&m, &store, disease)
        }
    }
}

pub fn write_classifier_table(out: &mut dyn Write, reports: &[EvalReport]) -> Result<(), ServiceError> {
    writeln!(out, "{:<16}{:>10}{:>10}{:>9}{:>12}", "classifier", "train", "test", "overfit", "degenerate").map_err(io)?;
    for r in reports {
        writeln!(
            out,
            "{:<16}{:>9.2}%{:>9.2}%{:>9}{:>12}",
            r.kind.as_str(),
            100.0 * r.train_accuracy,
            100.0 * r.test_accuracy,
            r.overfit,
            r.degenerate
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn write_forecaster_table(out: &mut dyn Write, evals: &[ForecastEvaluation]) -> Result<(), ServiceError> {
    writeln!(
        out,
        "{:<20}{:>7}{:>6}{:>12}{:>12}{:>12}{:>9}",
        "model", "train", "test", "rmse", "mae", "mad", "mase"
    )
    .map_err(io)?;
    let mut rows: Vec<(String, &ForecastEvaluation, &epiwatch_core::timeseries::MetricsReport)> =
        evals.iter().map(|e| (e.model.clone(), e, &e.metrics)).collect();
    if let Some(first) = evals.first() {
        rows.push(("persistence".into(), first, &first.persistence));
    }
    for (name, e, m) in rows {
        writeln!(
            out,
            "{:<20}{:>7}{:>6}{:>12.4}{:>12.4}{:>12.4}{:>9.4}",
            name, e.train_weeks, e.test_weeks, m.rmse, m.mae, m.mad, m.mase
        )
        .map_err(io)?;
    }
    Ok(())
}

fn write_forecast_eval(out: &mut dyn Write, eval: &ForecastEvaluation) -> Result<(), ServiceError> {
    write_forecaster_table(out, std::slice::from_ref(eval))
}
