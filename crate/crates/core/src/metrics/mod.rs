//! Trial logs and everything measured on them: normalized target response,
//! centering and navigation errors, and movement smoothness.

mod smoothness;

pub use smoothness::{ldj, peak_count, sparc, tip_speed, SpectralParams};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Mode;
use crate::perception::ImagePoint;
use crate::world::{GoalPlane, LumenPath, PathKind, Point3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("log is empty")]
    Empty,
    #[error("initial target offset is zero")]
    DegenerateStart,
    #[error("goal plane never crossed")]
    GoalNotReached,
    #[error("degenerate speed profile: {0}")]
    DegenerateProfile(String),
    #[error("need at least {0} samples")]
    TooShort(usize),
}

/// One control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: Vector3<f64>,
    pub q_dot: Vector3<f64>,
    pub tip: Point3,
    /// Raw centroid; `None` when the mask was empty.
    pub p: Option<ImagePoint>,
    /// Filter output; frozen while the target is lost.
    pub p_hat: Option<ImagePoint>,
    pub rho: Option<f64>,
    pub v: Vector2<f64>,
    pub mode: Mode,
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub dt: f64,
    pub path: PathKind,
    /// Image center the errors are measured from.
    pub center: ImagePoint,
    pub samples: Vec<Sample>,
}

impl TrialLog {
    pub fn min_clearance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.clearance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn collided(&self) -> bool {
        self.samples.iter().any(|s| s.clearance <= 0.0)
    }

    /// Length of the polyline through the logged tip positions (mm).
    pub fn travel(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].tip - w[0].tip).norm())
            .sum()
    }
}

/// Normalized target response; every series starts at 0 and reaches 1 when
/// the target sits on the image center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtrSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: Vec<f64>,
}

pub const SET_POINT: f64 = 1.0;

pub fn ntr(log: &TrialLog) -> Result<NtrSeries, MetricsError> {
    let first = log.samples.first().ok_or(MetricsError::Empty)?;
    let c = log.center;
    let rel = |s: &Sample| s.p_hat.map(|p| (p.x - c.x, p.y - c.y));
    let (x0, y0) = rel(first).ok_or(MetricsError::DegenerateStart)?;
    let rho0 = x0.hypot(y0);
    if x0.abs() < 1e-9 || y0.abs() < 1e-9 || rho0 < 1e-9 {
        return Err(MetricsError::DegenerateStart);
    }
    let mut out = NtrSeries {
        t: Vec::with_capacity(log.samples.len()),
        x: Vec::new(),
        y: Vec::new(),
        rho: Vec::new(),
    };
    let mut last = (x0, y0);
    for s in &log.samples {
        let (x, y) = rel(s).unwrap_or(last);
        last = (x, y);
        out.t.push(s.t - first.t);
        out.x.push((x0 - x) / x0);
        out.y.push((y0 - y) / y0);
        out.rho.push((rho0 - x.hypot(y)) / rho0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteringReport {
    /// %
    pub sse: f64,
    /// Rise time from 0.2 to 0.8 (s); absent if the response never got there.
    pub rt: Option<f64>,
    /// Settling time into +-0.1 of the set point (s).
    pub st: Option<f64>,
    pub os_x: f64,
    pub os_y: f64,
}

pub const BAND: f64 = 0.1;

/// Time at which the series first reaches `level`, interpolated.
fn first_reach(t: &[f64], y: &[f64], level: f64) -> Option<f64> {
    let i = y.iter().position(|&v| v >= level)?;
    if i == 0 {
        return Some(t[0]);
    }
    let a = (level - y[i - 1]) / (y[i] - y[i - 1]);
    Some(t[i - 1] + a * (t[i] - t[i - 1]))
}

/// Start of the final stretch inside the band, interpolated at the edge
/// that was crossed. `None` when the last sample is outside.
fn settling_time(t: &[f64], y: &[f64]) -> Option<f64> {
    let inside = |v: f64| (v - SET_POINT).abs() <= BAND;
    if !inside(*y.last()?) {
        return None;
    }
    let j = match y.iter().rposition(|&v| !inside(v)) {
        None => return Some(t[0]),
        Some(k) => k + 1,
    };
    let prev = y[j - 1];
    let edge = if prev < SET_POINT {
        SET_POINT - BAND
    } else {
        SET_POINT + BAND
    };
    let a = (edge - prev) / (y[j] - prev);
    Some(t[j - 1] + a * (t[j] - t[j - 1]))
}

pub fn centering_metrics(series: &NtrSeries) -> Result<CenteringReport, MetricsError> {
    let last = *series.rho.last().ok_or(MetricsError::Empty)?;
    let rise = match (
        first_reach(&series.t, &series.rho, 0.2),
        first_reach(&series.t, &series.rho, 0.8),
    ) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let st = if first_reach(&series.t, &series.rho, 0.2).is_some() {
        settling_time(&series.t, &series.rho)
    } else {
        None
    };
    let overshoot = |s: &[f64]| {
        let peak = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (peak - SET_POINT).max(0.0) * 100.0
    };
    Ok(CenteringReport {
        sse: (SET_POINT - last).abs() * 100.0,
        rt: rise,
        st,
        os_x: overshoot(&series.x),
        os_y: overshoot(&series.y),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavigationReport {
    pub ct: f64,
    pub mae: f64,
    pub max_ae: f64,
    pub ldj: f64,
    pub sparc: f64,
    pub np: f64,
    pub collided: bool,
}

/// Lateral error at one tip position: distance to the centerline point at
/// the same depth. `None` outside the axial extent of the path.
pub fn depth_error(path: &LumenPath, tip: &Point3) -> Option<f64> {
    let s = path.s_at_depth(tip.z)?;
    let (c, _) = path.centerline_point(s).ok()?;
    Some((tip - c).norm())
}

/// Completion time, mean and max of the depth-matched error over the
/// samples up to and including the first one past the goal.
pub fn nav_errors(
    log: &TrialLog,
    path: &LumenPath,
    goal: &GoalPlane,
) -> Result<(f64, f64, f64), MetricsError> {
    let first = log.samples.first().ok_or(MetricsError::Empty)?;
    let end = log
        .samples
        .iter()
        .position(|s| goal.crossed(&s.tip))
        .ok_or(MetricsError::GoalNotReached)?;
    let errors: Vec<f64> = log.samples[..=end]
        .iter()
        .filter_map(|s| depth_error(path, &s.tip))
        .collect();
    if errors.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mae = errors.iter().sum::<f64>() / errors.len() as f64;
    let max_ae = errors.iter().cloned().fold(0.0, f64::max);
    Ok((log.samples[end].t - first.t, mae, max_ae))
}

/// Full navigation report for a trial that reached the goal.
pub fn navigation_report(
    log: &TrialLog,
    path: &LumenPath,
    goal: &GoalPlane,
    spectral: &SpectralParams,
) -> Result<NavigationReport, MetricsError> {
    let (ct, mae, max_ae) = nav_errors(log, path, goal)?;
    let speed = tip_speed(log);
    Ok(NavigationReport {
        ct,
        mae,
        max_ae,
        ldj: ldj(&speed, log.dt)?,
        sparc: sparc(&speed, log.dt, spectral)?,
        np: peak_count(&speed, log.travel())?,
        collided: log.collided(),
    })
}

/// Mean, sample standard deviation and count.
pub fn mean_std(values: &[f64]) -> (f64, f64, usize) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 1);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt(), n)
}

/// One-sided sign test: probability of at least `wins` successes out of `n`
/// fair coin flips.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    for k in wins..=n {
        p += binomial(n, k);
    }
    p / 2f64.powi(n as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests;
