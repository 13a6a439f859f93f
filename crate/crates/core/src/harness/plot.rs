//! Small hand-written SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, ExperimentKind, HarnessError, TrialResult};
use crate::metrics::{depth_error, ntr, BAND, SET_POINT};

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 30.0, 45.0); // left, right, top, bottom
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            dashed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference line, drawn gray.
    pub reference: Option<f64>,
    /// Shaded horizontal band.
    pub band: Option<(f64, f64)>,
}

/// Data range with a little padding; degenerate ranges get a unit width.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl LinePlot {
    /// Axis ranges covering every point, the reference line and the band.
    pub fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0));
        let extra: Vec<f64> = self
            .reference
            .into_iter()
            .chain(self.band.into_iter().flat_map(|(a, b)| [a, b]))
            .collect();
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(extra);
        (range(xs), range(ys))
    }

    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.ranges();
        let (ml, mr, mt, mb) = MARGIN;
        let pw = W - ml - mr;
        let ph = H - mt - mb;
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        if let Some((a, b)) = self.band {
            let (top, bot) = (sy(a.max(b)), sy(a.min(b)));
            let _ = writeln!(
                s,
                r##"<rect class="band" x="{ml:.1}" y="{top:.1}" width="{pw:.1}" height="{:.1}" fill="#cccccc" fill-opacity="0.4"/>"##,
                bot - top
            );
        }
        // axes and ticks
        let _ = writeln!(
            s,
            r#"<rect x="{ml:.1}" y="{mt:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
        );
        for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
            let step = nice_step(hi - lo);
            let mut v = (lo / step).ceil() * step;
            while v <= hi {
                let label = format!("{}", (v / step).round() * step);
                if horizontal {
                    let x = sx(v);
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                        mt + ph,
                        mt + ph + 4.0,
                        mt + ph + 16.0
                    );
                } else {
                    let y = sy(v);
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.1}" y1="{y:.1}" x2="{ml:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
                        ml - 4.0,
                        ml - 6.0,
                        y + 4.0
                    );
                }
                v += step;
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            H - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            mt + ph / 2.0,
            escape(&self.y_label)
        );
        if let Some(r) = self.reference {
            let y = sy(r);
            let _ = writeln!(
                s,
                r##"<line class="reference" x1="{ml:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#777777" stroke-dasharray="6 4"/>"##,
                ml + pw
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if series.dashed {
                r#" stroke-dasharray="4 3""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                escape(&series.name),
                pts.join(" ")
            );
            let ly = mt + 14.0 + 14.0 * i as f64;
            let lx = ml + pw - 120.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 18.0,
                lx + 22.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn ntr_plot(r: &TrialResult) -> Option<LinePlot> {
    let n = ntr(&r.log).ok()?;
    let zip = |v: &[f64]| {
        n.t.iter()
            .copied()
            .zip(v.iter().copied())
            .collect::<Vec<_>>()
    };
    Some(LinePlot {
        title: format!("Normalized target response, trial {}", r.trial_id),
        x_label: "t (s)".into(),
        y_label: "NTR".into(),
        series: vec![
            Series::new("x", zip(&n.x)),
            Series::new("y", zip(&n.y)),
            Series::new("rho", zip(&n.rho)),
        ],
        reference: Some(SET_POINT),
        band: Some((SET_POINT - BAND, SET_POINT + BAND)),
    })
}

fn path_plots(
    cfg: &ExperimentConfig,
    r: &TrialResult,
) -> Result<Option<(LinePlot, LinePlot)>, HarnessError> {
    if r.log.samples.is_empty() {
        return Ok(None);
    }
    let phantom = cfg.phantom(r.log.path)?;
    let path = phantom.path();
    let goal = cfg.experiment.goal_depth;
    let last_z = r.log.samples.iter().map(|s| s.tip.z).fold(goal, f64::max);
    let n = 200;
    let centerline: Vec<_> = (0..=n)
        .filter_map(|i| {
            path.centerline_point(path.total_arc_length() * i as f64 / n as f64)
                .ok()
        })
        .map(|(p, _)| p)
        .filter(|p| p.z <= last_z)
        .collect();
    let tip = &r.log.samples;
    let projected = LinePlot {
        title: format!("Tip path against centerline, trial {}", r.trial_id),
        x_label: "z (mm)".into(),
        y_label: "lateral (mm)".into(),
        series: vec![
            Series::new("tip x", tip.iter().map(|s| (s.tip.z, s.tip.x)).collect()),
            Series::new("tip y", tip.iter().map(|s| (s.tip.z, s.tip.y)).collect()),
            Series {
                dashed: true,
                ..Series::new(
                    "centerline x",
                    centerline.iter().map(|p| (p.z, p.x)).collect(),
                )
            },
            Series {
                dashed: true,
                ..Series::new(
                    "centerline y",
                    centerline.iter().map(|p| (p.z, p.y)).collect(),
                )
            },
        ],
        reference: None,
        band: None,
    };
    let errors = LinePlot {
        title: format!("Depth-matched error, trial {}", r.trial_id),
        x_label: "depth (mm)".into(),
        y_label: "e_z (mm)".into(),
        series: vec![Series::new(
            "e_z",
            tip.iter()
                .filter_map(|s| depth_error(path, &s.tip).map(|e| (s.tip.z, e)))
                .collect(),
        )],
        reference: None,
        band: None,
    };
    Ok(Some((projected, errors)))
}

/// One NTR plot per centering trial; a path plot and an error plot per
/// navigation trial. Trials without usable samples get no plot.
pub fn emit_plots(
    dir: &Path,
    cfg: &ExperimentConfig,
    results: &[TrialResult],
) -> Result<Vec<PathBuf>, HarnessError> {
    if results.is_empty() {
        return Err(HarnessError::Plot("no trial results to plot".into()));
    }
    let mut plots = Vec::new();
    for r in results {
        let stem = format!("trial_{:03}", r.trial_id);
        match cfg.experiment.kind {
            ExperimentKind::Centering => {
                if let Some(p) = ntr_plot(r) {
                    plots.push((format!("{stem}_ntr.svg"), p));
                }
            }
            ExperimentKind::Navigation => {
                if let Some((a, b)) = path_plots(cfg, r)? {
                    plots.push((format!("{stem}_path.svg"), a));
                    plots.push((format!("{stem}_error.svg"), b));
                }
            }
            ExperimentKind::Dataset => {}
        }
    }
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, plot) in plots {
        let file = dir.join(name);
        fs::write(&file, plot.to_svg())?;
        written.push(file);
    }
    Ok(written)
}
