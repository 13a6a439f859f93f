//! Lumen centerlines built from straight and circular-arc segments.
//!
//! Paths start at the phantom opening (world origin) heading along +z, the
//! insertion axis of the linear stage. Each segment starts with the frame the
//! previous one ended with, so the centerline is tangent-continuous by
//! construction.

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::WorldError;

pub type Point3 = Vector3<f64>;

/// Lengths shorter than this are treated as numerical noise on `s`.
const S_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    StraightA,
    LeftCurveB,
    RightCurveC,
    SCurveD,
    Custom,
}

impl PathKind {
    /// Parses the built-in path names `"A"`..`"D"`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim() {
            "A" | "a" => Some(PathKind::StraightA),
            "B" | "b" => Some(PathKind::LeftCurveB),
            "C" | "c" => Some(PathKind::RightCurveC),
            "D" | "d" => Some(PathKind::SCurveD),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PathKind::StraightA => "A",
            PathKind::LeftCurveB => "B",
            PathKind::RightCurveC => "C",
            PathKind::SCurveD => "D",
            PathKind::Custom => "custom",
        }
    }
}

/// One piece of a centerline.
///
/// `bend_plane` is the direction the arc turns toward, as an angle about the
/// incoming tangent measured from the transported x axis: 0 turns toward +x
/// (right), pi toward -x (left).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Straight {
        length: f64,
    },
    Arc {
        radius: f64,
        sweep: f64,
        bend_plane: f64,
    },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { length } => length,
            Segment::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    fn validate(&self) -> Result<(), WorldError> {
        let ok = match *self {
            Segment::Straight { length } => length.is_finite() && length > 0.0,
            Segment::Arc {
                radius,
                sweep,
                bend_plane,
            } => {
                radius.is_finite()
                    && radius > 0.0
                    && sweep.is_finite()
                    && sweep > 0.0
                    && sweep < std::f64::consts::PI
                    && bend_plane.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(WorldError::InvalidGeometry(format!("bad segment {self:?}")))
        }
    }
}

/// Orthonormal frame carried along the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Frame {
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub binormal: Vector3<f64>,
}

impl Frame {
    fn insertion() -> Self {
        Frame {
            tangent: Vector3::z(),
            normal: Vector3::x(),
            binormal: Vector3::y(),
        }
    }

    fn rotated(&self, rot: &Rotation3<f64>) -> Self {
        Frame {
            tangent: rot * self.tangent,
            normal: rot * self.normal,
            binormal: rot * self.binormal,
        }
    }
}

/// Precomputed placement of one segment in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Placed {
    Line {
        start: Point3,
        dir: Vector3<f64>,
        length: f64,
    },
    Arc {
        center: Point3,
        /// Unit vector from the center to the arc start.
        radial: Vector3<f64>,
        /// Tangent at the arc start; together with `radial` spans the arc plane.
        tangent0: Vector3<f64>,
        /// Arc plane normal (`radial x tangent0`).
        axis: Vector3<f64>,
        radius: f64,
        sweep: f64,
        /// `(sin, cos)` of `sweep`.
        sweep_sc: (f64, f64),
    },
}

/// Closest point of a segment to a query point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Closest {
    pub dist: f64,
    /// Arc-length offset of the closest point within the segment.
    pub local_s: f64,
}

impl Placed {
    pub(crate) fn point_at(&self, local_s: f64) -> (Point3, Vector3<f64>) {
        match *self {
            Placed::Line { start, dir, .. } => (start + dir * local_s, dir),
            Placed::Arc {
                center,
                radial,
                tangent0,
                radius,
                ..
            } => {
                let a = local_s / radius;
                let (sa, ca) = a.sin_cos();
                let p = center + (radial * ca + tangent0 * sa) * radius;
                let t = tangent0 * ca - radial * sa;
                (p, t)
            }
        }
    }

    /// Distance only; skips the angle computation when the arc spans less
    /// than a half turn.
    #[inline]
    pub(crate) fn dist(&self, p: &Point3) -> f64 {
        match *self {
            Placed::Line { start, dir, length } => {
                let d = p - start;
                let t = d.dot(&dir).clamp(0.0, length);
                (d - dir * t).norm()
            }
            Placed::Arc {
                center,
                radial,
                tangent0,
                axis,
                radius,
                sweep,
                sweep_sc: (se, ce),
            } if sweep < std::f64::consts::PI => {
                let d = p - center;
                let x = d.dot(&radial);
                let y = d.dot(&tangent0);
                let z = d.dot(&axis);
                if y >= 0.0 && x * se - y * ce >= 0.0 {
                    let dr = (x * x + y * y).sqrt() - radius;
                    (dr * dr + z * z).sqrt()
                } else {
                    let a0 = (x - radius).powi(2) + y * y;
                    let a1 = (x - radius * ce).powi(2) + (y - radius * se).powi(2);
                    (a0.min(a1) + z * z).sqrt()
                }
            }
            Placed::Arc { .. } => self.closest(p).dist,
        }
    }

    pub(crate) fn closest(&self, p: &Point3) -> Closest {
        match *self {
            Placed::Line { start, dir, length } => {
                let d = p - start;
                let t = d.dot(&dir).clamp(0.0, length);
                Closest {
                    dist: (d - dir * t).norm(),
                    local_s: t,
                }
            }
            Placed::Arc {
                center,
                radial,
                tangent0,
                axis,
                radius,
                sweep,
                ..
            } => {
                let d = p - center;
                let x = d.dot(&radial);
                let y = d.dot(&tangent0);
                let z = d.dot(&axis);
                let rho = (x * x + y * y).sqrt();
                let ang = y.atan2(x);
                if ang >= 0.0 && ang <= sweep && rho > 0.0 {
                    let dr = rho - radius;
                    Closest {
                        dist: (dr * dr + z * z).sqrt(),
                        local_s: ang * radius,
                    }
                } else {
                    let a0 = (x - radius).powi(2) + y * y + z * z;
                    let (se, ce) = sweep.sin_cos();
                    let a1 = (x - radius * ce).powi(2) + (y - radius * se).powi(2) + z * z;
                    if a0 <= a1 {
                        Closest {
                            dist: a0.sqrt(),
                            local_s: 0.0,
                        }
                    } else {
                        Closest {
                            dist: a1.sqrt(),
                            local_s: sweep * radius,
                        }
                    }
                }
            }
        }
    }
}

/// A lumen centerline.
#[derive(Debug, Clone, PartialEq)]
pub struct LumenPath {
    kind: PathKind,
    segments: Vec<Segment>,
    placed: Vec<Placed>,
    offsets: Vec<f64>,
    end_frame: Frame,
    end_point: Point3,
    total_arc_length: f64,
}

impl LumenPath {
    pub fn new(kind: PathKind, segments: Vec<Segment>) -> Result<Self, WorldError> {
        if segments.is_empty() {
            return Err(WorldError::InvalidGeometry("path has no segments".into()));
        }
        let mut frame = Frame::insertion();
        let mut point = Point3::zeros();
        let mut placed = Vec::with_capacity(segments.len());
        let mut offsets = Vec::with_capacity(segments.len());
        let mut s = 0.0;
        for seg in &segments {
            seg.validate()?;
            offsets.push(s);
            match *seg {
                Segment::Straight { length } => {
                    placed.push(Placed::Line {
                        start: point,
                        dir: frame.tangent,
                        length,
                    });
                    point += frame.tangent * length;
                }
                Segment::Arc {
                    radius,
                    sweep,
                    bend_plane,
                } => {
                    let (sb, cb) = bend_plane.sin_cos();
                    let toward = frame.normal * cb + frame.binormal * sb;
                    let center = point + toward * radius;
                    let radial = -toward;
                    let axis = radial.cross(&frame.tangent);
                    placed.push(Placed::Arc {
                        center,
                        radial,
                        tangent0: frame.tangent,
                        axis,
                        radius,
                        sweep,
                        sweep_sc: sweep.sin_cos(),
                    });
                    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), sweep);
                    point = center + rot * (radial * radius);
                    frame = frame.rotated(&rot);
                }
            }
            s += seg.length();
        }
        Ok(LumenPath {
            kind,
            segments,
            placed,
            offsets,
            end_frame: frame,
            end_point: point,
            total_arc_length: s,
        })
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_arc_length(&self) -> f64 {
        self.total_arc_length
    }

    pub fn start_point(&self) -> Point3 {
        Point3::zeros()
    }

    pub fn start_tangent(&self) -> Vector3<f64> {
        Vector3::z()
    }

    pub fn end_point(&self) -> Point3 {
        self.end_point
    }

    pub fn end_tangent(&self) -> Vector3<f64> {
        self.end_frame.tangent
    }

    pub(crate) fn placed(&self) -> &[Placed] {
        &self.placed
    }

    #[cfg(test)]
    pub(crate) fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Point and unit tangent at arc length `s`.
    pub fn centerline_point(&self, s: f64) -> Result<(Point3, Vector3<f64>), WorldError> {
        if !s.is_finite() || s < -S_EPS || s > self.total_arc_length + S_EPS {
            return Err(WorldError::OutOfRange(format!(
                "arc length {s} outside [0, {}]",
                self.total_arc_length
            )));
        }
        let s = s.clamp(0.0, self.total_arc_length);
        let idx = match self.offsets.iter().rposition(|&o| o <= s) {
            Some(i) => i,
            None => 0,
        };
        let local = (s - self.offsets[idx]).min(self.segments[idx].length());
        Ok(self.placed[idx].point_at(local))
    }

    /// Nearest centerline point: (distance, arc length).
    pub fn closest(&self, p: &Point3) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for (seg, off) in self.placed.iter().zip(&self.offsets) {
            let c = seg.closest(p);
            if c.dist < best.0 {
                best = (c.dist, off + c.local_s);
            }
        }
        best
    }

    /// Arc length of the centerline point whose z coordinate equals `depth`.
    ///
    /// Built-in paths are monotone in z, so bisection on `s` is exact up to
    /// the tolerance. Returns `None` outside the path's axial extent.
    pub fn s_at_depth(&self, depth: f64) -> Option<f64> {
        let z_at = |s: f64| {
            self.centerline_point(s)
                .map(|(p, _)| p.z)
                .unwrap_or(f64::NAN)
        };
        let (mut lo, mut hi) = (0.0, self.total_arc_length);
        let (zlo, zhi) = (z_at(lo), z_at(hi));
        if !(depth >= zlo - 1e-12 && depth <= zhi + 1e-12) {
            return None;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if z_at(mid) < depth {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Reflection of the path across the insertion axis in the x-z plane.
    pub fn mirrored(&self, kind: PathKind) -> Result<Self, WorldError> {
        let segs = self
            .segments
            .iter()
            .map(|s| match *s {
                Segment::Arc {
                    radius,
                    sweep,
                    bend_plane,
                } => Segment::Arc {
                    radius,
                    sweep,
                    bend_plane: std::f64::consts::PI - bend_plane,
                },
                other => other,
            })
            .collect();
        LumenPath::new(kind, segs)
    }
}

/// Shape knobs for the built-in paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuiltinPathParams {
    /// Arc radius used by the curved paths (mm).
    pub arc_radius: f64,
    /// Sweep of the single arc of paths B and C (rad).
    pub single_sweep: f64,
    /// Sweep of each of the two opposed arcs of path D (rad).
    pub s_curve_sweep: f64,
    /// Straight lead-in before the first arc of B and C (mm).
    pub lead_in: f64,
    /// Straight lead-in before the first arc of D (mm).
    pub s_curve_lead_in: f64,
    /// Straight joining the two arcs of D (mm).
    pub s_curve_join: f64,
    /// Straight extension past the last arc (mm). Keeps the camera's view
    /// inside the tube while the tip approaches the goal plane.
    pub tail: f64,
    /// Length of the straight path A (mm).
    pub straight_length: f64,
}

impl Default for BuiltinPathParams {
    fn default() -> Self {
        BuiltinPathParams {
            arc_radius: 120.0,
            single_sweep: 20f64.to_radians(),
            s_curve_sweep: 15f64.to_radians(),
            lead_in: 90.0,
            s_curve_lead_in: 45.0,
            s_curve_join: 25.0,
            tail: 40.0,
            straight_length: 170.0,
        }
    }
}

impl BuiltinPathParams {
    pub fn segments(&self, kind: PathKind) -> Vec<Segment> {
        use std::f64::consts::PI;
        let left = PI;
        let right = 0.0;
        match kind {
            PathKind::StraightA | PathKind::Custom => vec![Segment::Straight {
                length: self.straight_length,
            }],
            PathKind::LeftCurveB | PathKind::RightCurveC => {
                let bend_plane = if kind == PathKind::LeftCurveB {
                    left
                } else {
                    right
                };
                vec![
                    Segment::Straight {
                        length: self.lead_in,
                    },
                    Segment::Arc {
                        radius: self.arc_radius,
                        sweep: self.single_sweep,
                        bend_plane,
                    },
                    Segment::Straight { length: self.tail },
                ]
            }
            PathKind::SCurveD => vec![
                Segment::Straight {
                    length: self.s_curve_lead_in,
                },
                Segment::Arc {
                    radius: self.arc_radius,
                    sweep: self.s_curve_sweep,
                    bend_plane: left,
                },
                Segment::Straight {
                    length: self.s_curve_join,
                },
                Segment::Arc {
                    radius: self.arc_radius,
                    sweep: self.s_curve_sweep,
                    bend_plane: right,
                },
                Segment::Straight { length: self.tail },
            ],
        }
    }

    pub fn build(&self, kind: PathKind) -> Result<LumenPath, WorldError> {
        LumenPath::new(kind, self.segments(kind))
    }
}

impl LumenPath {
    /// Built-in path with default shape parameters.
    pub fn builtin(kind: PathKind) -> Self {
        BuiltinPathParams::default()
            .build(kind)
            .expect("default built-in geometry is valid")
    }
}
