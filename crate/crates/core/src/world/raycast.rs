//! Sphere tracing inside the tube.
//!
//! Inside the bore `inner_radius - dist(p, centerline)` is a lower bound on
//! the free distance to the wall in every direction, so stepping by it never
//! skips a wall crossing.

use nalgebra::Vector3;

use super::path::{Placed, Point3};
use super::{TubePhantom, WorldError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitResult {
    /// Ray meets the wall after this many mm.
    Wall(f64),
    /// Ray leaves through an open end of the tube.
    Exit(f64),
    /// Nothing within `max_range`.
    NoHit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchSettings {
    /// Remaining clearance (mm) at which the march reports a wall hit.
    pub hit_epsilon: f64,
    pub max_iterations: usize,
}

impl Default for MarchSettings {
    fn default() -> Self {
        MarchSettings {
            hit_epsilon: 1e-6,
            max_iterations: 20_000,
        }
    }
}

/// The segments that can matter for rays starting near one origin.
pub(crate) struct TubeView<'a> {
    tube: &'a TubePhantom,
    near: Vec<Placed>,
}

impl<'a> TubeView<'a> {
    /// Keeps the segments within `reach` of `origin`. Any inside point at most
    /// `reach - inner_radius` away from the origin has its nearest centerline
    /// point among them.
    pub(crate) fn new(tube: &'a TubePhantom, origin: &Point3, reach: f64) -> Self {
        let near: Vec<Placed> = tube
            .path()
            .placed()
            .iter()
            .filter(|seg| !reach.is_finite() || seg.dist(origin) <= reach)
            .copied()
            .collect();
        let near = if near.is_empty() {
            tube.path().placed().to_vec()
        } else {
            near
        };
        TubeView { tube, near }
    }

    #[inline]
    fn dist(&self, p: &Point3) -> f64 {
        let mut best = f64::INFINITY;
        for seg in &self.near {
            let d = seg.dist(p);
            if d < best {
                best = d;
            }
        }
        best
    }

    pub(crate) fn march(
        &self,
        origin: &Point3,
        dir: &Vector3<f64>,
        max_range: f64,
        settings: &MarchSettings,
    ) -> HitResult {
        let path = self.tube.path();
        let radius = self.tube.inner_radius();
        // End caps are planes, so the exit distance is known up front.
        let cap = |normal: Vector3<f64>, margin: f64| {
            let rate = dir.dot(&normal);
            if rate < 0.0 {
                margin / -rate
            } else {
                f64::INFINITY
            }
        };
        let t_front = cap(
            path.start_tangent(),
            (origin - path.start_point()).dot(&path.start_tangent()),
        );
        let t_back = cap(
            -path.end_tangent(),
            (path.end_point() - origin).dot(&path.end_tangent()),
        );
        let t_exit = t_front.min(t_back).max(0.0);
        let horizon = t_exit.min(max_range);
        let open = || {
            if t_exit <= max_range {
                HitResult::Exit(t_exit)
            } else {
                HitResult::NoHit
            }
        };

        let clearance = |t: f64| radius - self.dist(&(origin + dir * t));
        let mut t = 0.0;
        let mut c = clearance(t);
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..settings.max_iterations {
            if c < settings.hit_epsilon {
                return HitResult::Wall(t);
            }
            // the ball of radius `c` around the sample is free
            if t + c >= horizon {
                return open();
            }
            let safe = t + c;
            let mut next = (safe, None);
            // Near the wall plain sphere tracing converges linearly. Try the
            // secant root of the clearance instead; it is accepted only when
            // the free balls cover the jump, or when it lands outside, which
            // brackets a wall crossing.
            if let Some((tp, cp)) = prev {
                if cp > c {
                    let guess = t + c * (t - tp) / (cp - c);
                    if guess > safe && guess < horizon {
                        let cg = clearance(guess);
                        if cg < 0.0 {
                            return HitResult::Wall(
                                self.bracket(safe, guess, &clearance, settings),
                            );
                        }
                        if guess - cg <= safe {
                            next = (guess, Some(cg));
                        }
                    }
                }
            }
            prev = Some((t, c));
            t = next.0;
            c = next.1.unwrap_or_else(|| clearance(t));
        }
        HitResult::Wall(t)
    }

    /// Whether the ray from a point inside the tube meets the wall within
    /// `range`. Same stepping as [`march`](Self::march), but any sample
    /// outside the bore settles the answer without locating the crossing.
    pub(crate) fn wall_within(
        &self,
        origin: &Point3,
        dir: &Vector3<f64>,
        range: f64,
        settings: &MarchSettings,
    ) -> bool {
        let path = self.tube.path();
        let radius = self.tube.inner_radius();
        let front_rate = dir.dot(&path.start_tangent());
        let back_rate = -dir.dot(&path.end_tangent());
        let mut horizon = range;
        if front_rate < 0.0 {
            horizon =
                horizon.min((origin - path.start_point()).dot(&path.start_tangent()) / -front_rate);
        }
        if back_rate < 0.0 {
            horizon =
                horizon.min((path.end_point() - origin).dot(&path.end_tangent()) / -back_rate);
        }
        let clearance = |t: f64| radius - self.dist(&(origin + dir * t));
        let (mut t, mut c) = (0.0, clearance(0.0));
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..settings.max_iterations {
            if c < settings.hit_epsilon {
                return true;
            }
            let safe = t + c;
            if safe >= horizon {
                return false;
            }
            let mut next = (safe, None);
            if let Some((tp, cp)) = prev {
                if cp > c {
                    let guess = t + c * (t - tp) / (cp - c);
                    if guess > safe && guess < horizon {
                        let cg = clearance(guess);
                        if cg < 0.0 {
                            return true;
                        }
                        if guess - cg <= safe {
                            next = (guess, Some(cg));
                        }
                    }
                }
            }
            prev = Some((t, c));
            t = next.0;
            c = next.1.unwrap_or_else(|| clearance(t));
        }
        true
    }

    /// Regula falsi (Illinois variant) on a clearance sign change in
    /// `[lo, hi]`, where `lo` is inside and `hi` outside.
    fn bracket(
        &self,
        mut lo: f64,
        mut hi: f64,
        clearance: &impl Fn(f64) -> f64,
        settings: &MarchSettings,
    ) -> f64 {
        let (mut flo, mut fhi) = (clearance(lo), clearance(hi));
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo < settings.hit_epsilon || flo < settings.hit_epsilon {
                break;
            }
            let mid = (lo * fhi - hi * flo) / (fhi - flo);
            let mid = if mid > lo && mid < hi {
                mid
            } else {
                0.5 * (lo + hi)
            };
            let fm = clearance(mid);
            if fm < 0.0 {
                hi = mid;
                fhi = fm;
                if side == -1 {
                    flo *= 0.5;
                }
                side = -1;
            } else {
                lo = mid;
                flo = fm;
                if side == 1 {
                    fhi *= 0.5;
                }
                side = 1;
            }
        }
        lo
    }
}

/// First wall hit or end-cap exit along a ray from inside the tube.
pub fn ray_tube_hit(
    phantom: &TubePhantom,
    origin: &Point3,
    dir: &Vector3<f64>,
    max_range: f64,
) -> Result<HitResult, WorldError> {
    ray_tube_hit_with(phantom, origin, dir, max_range, &MarchSettings::default())
}

pub fn ray_tube_hit_with(
    phantom: &TubePhantom,
    origin: &Point3,
    dir: &Vector3<f64>,
    max_range: f64,
    settings: &MarchSettings,
) -> Result<HitResult, WorldError> {
    if !((dir.norm() - 1.0).abs() <= 1e-9) {
        return Err(WorldError::InvalidRay(format!(
            "direction norm {} is not 1",
            dir.norm()
        )));
    }
    if !phantom.contains(origin) {
        return Err(WorldError::InvalidRay(
            "origin is not inside the tube".into(),
        ));
    }
    if !(max_range > 0.0) {
        return Err(WorldError::InvalidRay(format!(
            "max range {max_range} must be positive"
        )));
    }
    let reach = max_range + 2.0 * phantom.inner_radius();
    let view = TubeView::new(phantom, origin, reach);
    Ok(view.march(origin, dir, max_range, settings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{LumenPath, PathKind};

    fn tube(kind: PathKind) -> TubePhantom {
        TubePhantom::with_default_bore(LumenPath::builtin(kind))
    }

    /// Fixed-step march: first sample whose centerline distance reaches the
    /// radius, refined by bisection on the last step.
    fn brute_force(
        t: &TubePhantom,
        o: &Point3,
        d: &Vector3<f64>,
        step: f64,
        max: f64,
    ) -> Option<f64> {
        let r = t.inner_radius();
        let mut s = 0.0;
        while s < max {
            let next = s + step;
            let p = o + d * next;
            if t.path().closest(&p).0 >= r {
                let (mut lo, mut hi) = (s, next);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if t.path().closest(&(o + d * mid)).0 >= r {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            s = next;
        }
        None
    }

    #[test]
    fn axial_ray_exits_at_the_far_end() {
        let t = tube(PathKind::StraightA);
        let len = t.path().total_arc_length();
        let o = Point3::new(0.0, 0.0, 20.0);
        match ray_tube_hit(&t, &o, &Vector3::z(), 1e6).unwrap() {
            HitResult::Exit(d) => assert!((d - (len - 20.0)).abs() < 1e-9, "{d}"),
            other => panic!("expected exit, got {other:?}"),
        }
        match ray_tube_hit(&t, &o, &-Vector3::z(), 1e6).unwrap() {
            HitResult::Exit(d) => assert!((d - 20.0).abs() < 1e-9),
            other => panic!("expected exit through the opening, got {other:?}"),
        }
    }

    #[test]
    fn perpendicular_ray_hits_at_radius() {
        let t = tube(PathKind::StraightA);
        let o = Point3::new(0.0, 0.0, 40.0);
        for dir in [
            Vector3::x(),
            -Vector3::y(),
            Vector3::new(1.0, 1.0, 0.0).normalize(),
        ] {
            match ray_tube_hit(&t, &o, &dir, 100.0).unwrap() {
                HitResult::Wall(d) => assert!((d - 7.5).abs() < 1e-5, "{d}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn short_range_reports_no_hit() {
        let t = tube(PathKind::StraightA);
        let o = Point3::new(0.0, 0.0, 40.0);
        assert_eq!(
            ray_tube_hit(&t, &o, &Vector3::x(), 5.0).unwrap(),
            HitResult::NoHit
        );
    }

    #[test]
    fn invalid_rays_are_rejected() {
        let t = tube(PathKind::StraightA);
        let inside = Point3::new(0.0, 0.0, 10.0);
        assert!(matches!(
            ray_tube_hit(&t, &inside, &Vector3::new(0.0, 0.0, 2.0), 10.0),
            Err(WorldError::InvalidRay(_))
        ));
        assert!(matches!(
            ray_tube_hit(&t, &Point3::new(8.0, 0.0, 10.0), &Vector3::z(), 10.0),
            Err(WorldError::InvalidRay(_))
        ));
    }

    #[test]
    fn oblique_rays_in_curved_tube_match_brute_force() {
        let t = tube(PathKind::LeftCurveB);
        let cases = [
            (Point3::new(1.0, -0.5, 60.0), Vector3::new(-0.3, 0.1, 1.0)),
            (Point3::new(-3.0, 2.0, 75.0), Vector3::new(0.25, -0.2, 1.0)),
            (Point3::new(0.5, 0.5, 30.0), Vector3::new(-0.05, 0.02, 1.0)),
        ];
        for (o, d) in cases {
            let d = d.normalize();
            let got = ray_tube_hit(&t, &o, &d, 1e3).unwrap();
            let oracle = brute_force(&t, &o, &d, 1e-4, 1e3).expect("oracle hit");
            match got {
                HitResult::Wall(w) => assert!((w - oracle).abs() < 1e-3, "{w} vs {oracle}"),
                other => panic!("{other:?}"),
            }
            // the hit point sits on the wall
            if let HitResult::Wall(w) = got {
                let (_, clearance) = t.radial_clearance(&(o + d * w)).unwrap();
                assert!(clearance.abs() < 1e-3);
            }
        }
    }
}
