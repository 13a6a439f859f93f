//! Experiment runner: config loading, seeded centering and navigation
//! trials, dataset generation and the files written for each run.

mod config;
mod dataset;
mod output;
mod plot;
mod trial;

pub use config::{BackendConfig, ExperimentConfig, ExperimentKind, ExperimentSection};
pub use dataset::{generate_dataset, DatasetEntry};
pub use output::{
    read_trial_csv, recompute_report, recompute_run, write_aggregate, write_outputs,
    write_trial_csv, StoredRun, TrialRecord, CSV_COLUMNS,
};
pub use plot::{emit_plots, LinePlot, Series};
pub use trial::{
    run_centering_trial, run_navigation_trial, trial_seed, Outcome, Rig, TrialReport, TrialResult,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlError;
use crate::metrics::{mean_std, MetricsError};
use crate::perception::{GeometricBackend, PerceptionBackend, PerceptionError, RemoteBackend};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("no feasible start: {0}")]
    InfeasibleStart(String),
    #[error("perception: {0}")]
    Perception(#[from] PerceptionError),
    #[error("control: {0}")]
    Control(#[from] ControlError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Plot(String),
}

impl HarnessError {
    /// Process exit code for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::InfeasibleStart(_) => 2,
            HarnessError::Io(_)
            | HarnessError::Csv(_)
            | HarnessError::Json(_)
            | HarnessError::Plot(_) => 4,
            HarnessError::Perception(PerceptionError::Io(_)) => 4,
            HarnessError::Perception(PerceptionError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

/// One row of an aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub path: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Config the trials actually ran with.
    pub config: ExperimentConfig,
    pub kind: ExperimentKind,
    pub results: Vec<TrialResult>,
    pub aggregate: Vec<AggregateRow>,
}

impl ExperimentOutput {
    pub fn any_failed(&self) -> bool {
        self.results.iter().any(|r| r.outcome != Outcome::Completed)
    }
}

pub fn make_backend(cfg: &ExperimentConfig) -> Result<Box<dyn PerceptionBackend>, HarnessError> {
    Ok(match &cfg.experiment.backend {
        BackendConfig::Geometric => Box::new(GeometricBackend::new(cfg.perception)),
        BackendConfig::Remote { host, port } => Box::new(RemoteBackend::connect(
            (host.as_str(), *port),
            cfg.perception,
        )?),
    })
}

/// Mean and spread per metric over the completed trials.
pub fn aggregate(path: &str, results: &[TrialResult]) -> Vec<AggregateRow> {
    let done: Vec<&TrialReport> = results
        .iter()
        .filter(|r| r.outcome == Outcome::Completed)
        .filter_map(|r| r.report.as_ref())
        .collect();
    let mut columns: Vec<(&str, Vec<f64>)> = Vec::new();
    let mut push = |name: &'static str, v: Option<f64>| {
        let slot = match columns.iter().position(|(n, _)| *n == name) {
            Some(i) => i,
            None => {
                columns.push((name, Vec::new()));
                columns.len() - 1
            }
        };
        if let Some(v) = v {
            columns[slot].1.push(v);
        }
    };
    for report in done {
        match report {
            TrialReport::Centering(c) => {
                push("sse", Some(c.sse));
                push("rt", c.rt);
                push("st", c.st);
                push("os_x", Some(c.os_x));
                push("os_y", Some(c.os_y));
            }
            TrialReport::Navigation(n) => {
                push("ct", Some(n.ct));
                push("mae", Some(n.mae));
                push("max_ae", Some(n.max_ae));
                push("ldj", Some(n.ldj));
                push("sparc", Some(n.sparc));
                push("np", Some(n.np));
            }
        }
    }
    columns
        .into_iter()
        .map(|(metric, values)| {
            let (mean, std, n) = mean_std(&values);
            AggregateRow {
                path: path.to_string(),
                metric: metric.to_string(),
                mean,
                std,
                n,
            }
        })
        .collect()
}

/// Runs every trial of a centering or navigation config in order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    backend: &mut dyn PerceptionBackend,
) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let kind = cfg.experiment.kind;
    let run = match kind {
        ExperimentKind::Centering => run_centering_trial,
        ExperimentKind::Navigation => run_navigation_trial,
        ExperimentKind::Dataset => {
            return Err(HarnessError::Config(
                "dataset configs are run by generate_dataset".into(),
            ))
        }
    };
    let results = (0..cfg.trials())
        .map(|id| run(cfg, backend, id))
        .collect::<Result<Vec<_>, _>>()?;
    let aggregate = aggregate(cfg.path_kind()?.name(), &results);
    Ok(ExperimentOutput {
        config: cfg.clone(),
        kind,
        results,
        aggregate,
    })
}

/// Centering runs on the straight path regardless of the configured one.
pub fn run_centering(
    cfg: &ExperimentConfig,
    backend: &mut dyn PerceptionBackend,
) -> Result<ExperimentOutput, HarnessError> {
    let mut cfg = cfg.clone();
    cfg.experiment.kind = ExperimentKind::Centering;
    cfg.experiment.path = "A".into();
    run_experiment(&cfg, backend)
}

pub fn run_navigation(
    cfg: &ExperimentConfig,
    backend: &mut dyn PerceptionBackend,
) -> Result<ExperimentOutput, HarnessError> {
    let mut cfg = cfg.clone();
    cfg.experiment.kind = ExperimentKind::Navigation;
    run_experiment(&cfg, backend)
}
