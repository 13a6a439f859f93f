//! Files written for a run, and reading them back.
//!
//! Layout of an output directory:
//!   config.toml            effective config
//!   aggregate.csv          path,metric,mean,std,n
//!   trials/trial_NNN.csv   one row per control tick
//!   trials/trial_NNN.json  outcome and report
//!   plots/*.svg

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    aggregate, emit_plots, AggregateRow, ExperimentConfig, ExperimentKind, ExperimentOutput,
    HarnessError, Outcome, TrialReport,
};
use crate::control::Mode;
use crate::metrics::{centering_metrics, navigation_report, ntr, Sample, TrialLog};
use crate::perception::ImagePoint;
use crate::world::{GoalPlane, Point3};

pub const CSV_COLUMNS: [&str; 16] = [
    "t",
    "q1",
    "q2",
    "q3",
    "px",
    "py",
    "phat_x",
    "phat_y",
    "rho",
    "tip_x",
    "tip_y",
    "tip_z",
    "vx",
    "vy",
    "mode",
    "clearance",
];

/// Per-trial JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub report: Option<TrialReport>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_trial_csv<W: Write>(out: W, log: &TrialLog) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for s in &log.samples {
        w.write_record([
            num(s.t),
            num(s.q.x),
            num(s.q.y),
            num(s.q.z),
            opt(s.p.map(|p| p.x)),
            opt(s.p.map(|p| p.y)),
            opt(s.p_hat.map(|p| p.x)),
            opt(s.p_hat.map(|p| p.y)),
            opt(s.rho),
            num(s.tip.x),
            num(s.tip.y),
            num(s.tip.z),
            num(s.v.x),
            num(s.v.y),
            s.mode.name().to_string(),
            num(s.clearance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory CSV. Actuator velocities are not stored and come
/// back as zero.
pub fn read_trial_csv(path: &Path, template: &TrialLog) -> Result<TrialLog, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let bad = |what: String| HarnessError::Config(format!("{}: {what}", path.display()));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(bad("unexpected columns".into()));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<Option<f64>, HarnessError> {
            let f = &rec[i];
            if f.is_empty() {
                return Ok(None);
            }
            f.parse()
                .map(Some)
                .map_err(|_| bad(format!("row {}: bad {} {f:?}", line + 1, CSV_COLUMNS[i])))
        };
        let need = |i: usize| {
            field(i)?.ok_or_else(|| bad(format!("row {}: missing {}", line + 1, CSV_COLUMNS[i])))
        };
        let point = |i: usize| -> Result<Option<ImagePoint>, HarnessError> {
            Ok(match (field(i)?, field(i + 1)?) {
                (Some(x), Some(y)) => Some(ImagePoint::new(x, y)),
                _ => None,
            })
        };
        samples.push(Sample {
            t: need(0)?,
            q: Vector3::new(need(1)?, need(2)?, need(3)?),
            q_dot: Vector3::zeros(),
            p: point(4)?,
            p_hat: point(6)?,
            rho: field(8)?,
            tip: Point3::new(need(9)?, need(10)?, need(11)?),
            v: Vector2::new(need(12)?, need(13)?),
            mode: Mode::from_name(&rec[14])
                .ok_or_else(|| bad(format!("row {}: bad mode", line + 1)))?,
            clearance: need(15)?,
        });
    }
    Ok(TrialLog {
        samples,
        ..template.clone()
    })
}

/// Metrics of a logged trial, as the runner computes them.
pub fn recompute_report(cfg: &ExperimentConfig, log: &TrialLog) -> Option<TrialReport> {
    match cfg.experiment.kind {
        ExperimentKind::Centering => ntr(log)
            .and_then(|s| centering_metrics(&s))
            .ok()
            .map(TrialReport::Centering),
        ExperimentKind::Navigation => {
            let phantom = cfg.phantom(log.path).ok()?;
            let goal = GoalPlane::at_depth(cfg.experiment.goal_depth);
            navigation_report(log, phantom.path(), &goal, &cfg.spectral)
                .ok()
                .map(TrialReport::Navigation)
        }
        ExperimentKind::Dataset => None,
    }
}

fn trial_stem(id: usize) -> String {
    format!("trial_{id:03}")
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path", "metric", "mean", "std", "n"])?;
    for r in rows {
        w.write_record([
            r.path.clone(),
            r.metric.clone(),
            num(r.mean),
            num(r.std),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<Vec<PathBuf>, HarnessError> {
    let trials = dir.join("trials");
    fs::create_dir_all(&trials)?;
    let mut written = Vec::new();
    let config = dir.join("config.toml");
    fs::write(&config, out.config.to_toml())?;
    written.push(config);
    for r in &out.results {
        let stem = trial_stem(r.trial_id);
        let csv_path = trials.join(format!("{stem}.csv"));
        write_trial_csv(fs::File::create(&csv_path)?, &r.log)?;
        let record = TrialRecord {
            trial_id: r.trial_id,
            seed: r.seed,
            outcome: r.outcome.clone(),
            report: r.report,
        };
        let json_path = trials.join(format!("{stem}.json"));
        fs::write(&json_path, serde_json::to_string_pretty(&record)? + "\n")?;
        written.push(csv_path);
        written.push(json_path);
    }
    let agg = dir.join("aggregate.csv");
    write_aggregate(fs::File::create(&agg)?, &out.aggregate)?;
    written.push(agg);
    if out.config.experiment.plots && !out.results.is_empty() {
        written.extend(emit_plots(&dir.join("plots"), &out.config, &out.results)?);
    }
    Ok(written)
}

/// Per-trial reports recomputed from the stored CSVs, and the aggregate
/// over trials whose stored outcome is completed.
pub struct StoredRun {
    pub config: ExperimentConfig,
    pub trials: Vec<(TrialRecord, TrialLog)>,
    pub aggregate: Vec<AggregateRow>,
}

pub fn recompute_run(dir: &Path) -> Result<StoredRun, HarnessError> {
    let config = ExperimentConfig::load(&dir.join("config.toml"))?;
    let kind = config.path_kind()?;
    let (cx, cy) = config.perception.camera.center();
    let template = TrialLog {
        dt: config.control.dt,
        path: kind,
        center: ImagePoint::new(cx, cy),
        samples: Vec::new(),
    };
    let mut names: Vec<PathBuf> = fs::read_dir(dir.join("trials"))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    names.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    names.sort();
    let mut trials = Vec::new();
    let mut results = Vec::new();
    for csv_path in names {
        let log = read_trial_csv(&csv_path, &template)?;
        let stored: TrialRecord =
            serde_json::from_str(&fs::read_to_string(csv_path.with_extension("json"))?)?;
        let report = recompute_report(&config, &log);
        let outcome = if log.collided() {
            Outcome::Collided
        } else {
            stored.outcome.clone()
        };
        results.push(super::TrialResult {
            trial_id: stored.trial_id,
            seed: stored.seed,
            log: log.clone(),
            report,
            outcome: outcome.clone(),
        });
        trials.push((
            TrialRecord {
                outcome,
                report,
                ..stored
            },
            log,
        ));
    }
    let aggregate = aggregate(kind.name(), &results);
    Ok(StoredRun {
        config,
        trials,
        aggregate,
    })
}
