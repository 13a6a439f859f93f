//! Geometric lumen masks and depth-shaded frames by casting one ray per
//! pixel into the phantom.

use serde::{Deserialize, Serialize};

use super::{CameraModel, Frame, Mask, PerceptionConfig, PerceptionError};
use crate::plant::TipPose;
use crate::world::{HitResult, MarchSettings, TubePhantom, TubeView};

/// Ray marching stops this close to the wall (mm).
const RENDER_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RenderMode {
    /// One ray per pixel.
    Exact,
    /// Rays at the corners of `block`-sized tiles; tiles whose corners
    /// disagree are split down to single cells. Uniform tiles are filled
    /// without tracing their interior, so features thinner than a tile that
    /// touch no corner can be missed. Cells are `subsample` pixels square
    /// and traced through their center; the image size must be a multiple
    /// of `subsample`.
    Adaptive {
        block: u32,
        #[serde(default = "one")]
        subsample: u32,
    },
}

fn one() -> u32 {
    1
}

impl Default for RenderMode {
    fn default() -> Self {
        RenderMode::Adaptive {
            block: 16,
            subsample: 2,
        }
    }
}

fn settings() -> MarchSettings {
    MarchSettings {
        hit_epsilon: RENDER_EPSILON,
        ..Default::default()
    }
}

fn check_origin(phantom: &TubePhantom, pose: &TipPose) -> Result<(), PerceptionError> {
    if phantom.contains(&pose.position) {
        Ok(())
    } else {
        Err(PerceptionError::CameraOutsideLumen)
    }
}

/// Lumen mask: a pixel is set when its ray meets no wall within
/// `lumen_depth` mm (rays leaving through an open end count as lumen).
pub fn render_mask(
    phantom: &TubePhantom,
    pose: &TipPose,
    cam: &CameraModel,
    lumen_depth: f64,
    mode: RenderMode,
) -> Result<Mask, PerceptionError> {
    check_origin(phantom, pose)?;
    let view = TubeView::new(
        phantom,
        &pose.position,
        lumen_depth + 2.0 * phantom.inner_radius(),
    );
    let settings = settings();
    let basis = cam.ray_basis(pose);
    let lumen = |u: u32, w: u32| {
        !view.wall_within(&pose.position, &basis.dir(u, w), lumen_depth, &settings)
    };
    let mut mask = Mask::zeros(cam.width, cam.height);
    match mode {
        RenderMode::Exact => {
            for w in 0..cam.height {
                for u in 0..cam.width {
                    if lumen(u, w) {
                        mask.set(u, w, true);
                    }
                }
            }
        }
        RenderMode::Adaptive { block, subsample } => {
            let s = subsample.max(1);
            if cam.width % s != 0 || cam.height % s != 0 {
                return Err(PerceptionError::InvalidConfig(format!(
                    "{}x{} image is not a multiple of subsample {s}",
                    cam.width, cam.height
                )));
            }
            // a cell of the coarse camera covers s x s pixels and its ray
            // passes through their common center
            let coarse = CameraModel {
                width: cam.width / s,
                height: cam.height / s,
                horizontal_fov: cam.horizontal_fov,
            };
            let basis = coarse.ray_basis(pose);
            let mut cells = Mask::zeros(coarse.width, coarse.height);
            let mut tiler = Tiler {
                width: coarse.width,
                cache: vec![UNKNOWN; coarse.pixel_count()],
                classify: |u: u32, w: u32| {
                    !view.wall_within(&pose.position, &basis.dir(u, w), lumen_depth, &settings)
                },
            };
            let mut w0 = 0;
            while w0 < coarse.height {
                let mut u0 = 0;
                while u0 < coarse.width {
                    let u1 = (u0 + block).min(coarse.width);
                    let w1 = (w0 + block).min(coarse.height);
                    tiler.tile(u0, w0, u1, w1, &mut cells);
                    u0 += block;
                }
                w0 += block;
            }
            if s == 1 {
                return Ok(cells);
            }
            let out = mask.pixels_mut();
            for w in 0..cam.height {
                let src =
                    &cells.pixels()[(w / s * coarse.width) as usize..][..coarse.width as usize];
                let row = &mut out[(w * cam.width) as usize..][..cam.width as usize];
                for (chunk, &v) in row.chunks_mut(s as usize).zip(src) {
                    chunk.fill(v);
                }
            }
        }
    }
    Ok(mask)
}

const UNKNOWN: u8 = 2;

struct Tiler<F> {
    width: u32,
    cache: Vec<u8>,
    classify: F,
}

impl<F: Fn(u32, u32) -> bool> Tiler<F> {
    fn sample(&mut self, u: u32, w: u32) -> u8 {
        let idx = w as usize * self.width as usize + u as usize;
        if self.cache[idx] == UNKNOWN {
            self.cache[idx] = (self.classify)(u, w) as u8;
        }
        self.cache[idx]
    }

    /// Fills pixels `[u0, u1) x [w0, w1)`.
    fn tile(&mut self, u0: u32, w0: u32, u1: u32, w1: u32, mask: &mut Mask) {
        let (du, dw) = (u1 - u0, w1 - w0);
        if du <= 2 && dw <= 2 {
            for w in w0..w1 {
                for u in u0..u1 {
                    let v = self.sample(u, w);
                    mask.set(u, w, v == 1);
                }
            }
            return;
        }
        let corners = [
            self.sample(u0, w0),
            self.sample(u1 - 1, w0),
            self.sample(u0, w1 - 1),
            self.sample(u1 - 1, w1 - 1),
            self.sample(u0 + du / 2, w0 + dw / 2),
        ];
        if corners.iter().all(|&c| c == corners[0]) {
            let value = corners[0];
            for w in w0..w1 {
                let row = w as usize * self.width as usize;
                mask.pixels_mut()[row + u0 as usize..row + u1 as usize].fill(value);
            }
            return;
        }
        let (um, wm) = (u0 + du.div_ceil(2), w0 + dw.div_ceil(2));
        for (a, b, c, d) in [
            (u0, w0, um, wm),
            (um, w0, u1, wm),
            (u0, wm, um, w1),
            (um, wm, u1, w1),
        ] {
            if a < c && b < d {
                self.tile(a, b, c, d, mask);
            }
        }
    }
}

/// Depth-shaded grayscale frame and the exact lumen mask. Wall pixels are
/// lit in proportion to `1/d^2`, saturating at `shading_depth`; rays that
/// see no wall within `frame_range` are black.
pub fn render_frame(
    phantom: &TubePhantom,
    pose: &TipPose,
    cfg: &PerceptionConfig,
) -> Result<(Frame, Mask), PerceptionError> {
    // the mask comes from the mask renderer itself: the longer march below
    // can disagree with it on a few grazing rays
    let mask = render_mask(
        phantom,
        pose,
        &cfg.camera,
        cfg.lumen_depth,
        RenderMode::Exact,
    )?;
    let cam = &cfg.camera;
    let view = TubeView::new(
        phantom,
        &pose.position,
        cfg.frame_range + 2.0 * phantom.inner_radius(),
    );
    let settings = settings();
    let basis = cam.ray_basis(pose);
    let mut frame = Frame::black(cam.width, cam.height);
    let s2 = cfg.shading_depth * cfg.shading_depth;
    for w in 0..cam.height {
        for u in 0..cam.width {
            let dir = basis.dir(u, w);
            if let HitResult::Wall(d) = view.march(&pose.position, &dir, cfg.frame_range, &settings)
            {
                let shade = if d <= cfg.shading_depth {
                    255.0
                } else {
                    255.0 * s2 / (d * d)
                };
                frame.data[w as usize * cam.width as usize + u as usize] = shade.round() as u8;
            }
        }
    }
    Ok((frame, mask))
}

/// Frame and exact mask with the default shading.
pub fn render_lumen(
    phantom: &TubePhantom,
    pose: &TipPose,
    cam: &CameraModel,
    lumen_depth: f64,
) -> Result<(Frame, Mask), PerceptionError> {
    let cfg = PerceptionConfig {
        camera: *cam,
        lumen_depth,
        render: RenderMode::Exact,
        ..Default::default()
    };
    render_frame(phantom, pose, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::centroid;
    use crate::world::{LumenPath, PathKind, Point3};
    use nalgebra::Vector3;

    fn straight() -> TubePhantom {
        TubePhantom::with_default_bore(LumenPath::builtin(PathKind::StraightA))
    }

    fn small_cam() -> CameraModel {
        CameraModel::new(160, 120, 1.309).unwrap()
    }

    #[test]
    fn on_axis_view_is_a_centered_disc() {
        let t = straight();
        let cam = small_cam();
        let pose = TipPose::looking(Point3::new(0.0, 0.0, 20.0), Vector3::z());
        let (_, mask) = render_lumen(&t, &pose, &cam, 25.0).unwrap();
        let p = centroid(&mask).unwrap();
        let (cx, cy) = cam.center();
        assert!((p.x - cx).abs() < 0.5 && (p.y - cy).abs() < 0.5, "{p:?}");
        // rays reach the wall 25 mm out at sin(alpha) = 7.5 / 25
        let expected_r = cam.focal() * (7.5f64 / 25.0).asin().tan();
        let area = mask.count() as f64;
        let r = (area / std::f64::consts::PI).sqrt();
        assert!((r - expected_r).abs() < 1.5, "{r} vs {expected_r}");
    }

    #[test]
    fn facing_the_wall_sees_no_lumen() {
        let t = straight();
        let pose = TipPose::looking(Point3::new(6.5, 0.0, 40.0), Vector3::x());
        let (frame, mask) = render_lumen(&t, &pose, &small_cam(), 25.0).unwrap();
        assert_eq!(mask.count(), 0);
        assert!(frame.data.iter().all(|&v| v > 0));
    }

    #[test]
    fn camera_outside_is_rejected() {
        let t = straight();
        let pose = TipPose::looking(Point3::new(9.0, 0.0, 40.0), Vector3::z());
        assert!(matches!(
            render_mask(&t, &pose, &small_cam(), 25.0, RenderMode::Exact),
            Err(PerceptionError::CameraOutsideLumen)
        ));
    }

    #[test]
    fn offset_camera_sees_lumen_on_the_opposite_side() {
        let t = straight();
        let cam = small_cam();
        let pose = TipPose::looking(Point3::new(2.0, 0.0, 20.0), Vector3::z());
        let (_, mask) = render_lumen(&t, &pose, &cam, 25.0).unwrap();
        let p = centroid(&mask).unwrap();
        let (cx, _) = cam.center();
        assert!(p.x < cx);

        // independent estimate: supersampled rays tested against the
        // cylinder in closed form, centroid divided back to the base grid
        let fine = cam.scaled(4);
        let (mut n, mut sx) = (0.0, 0.0);
        for w in 0..fine.height {
            for u in 0..fine.width {
                let d = fine.ray_camera(u as f64, w as f64);
                // ray (2,0,0) + t d against x^2 + y^2 = 7.5^2
                let (a, b, c) = (d.x * d.x + d.y * d.y, 2.0 * 2.0 * d.x, 4.0 - 56.25);
                let free = if a < 1e-15 {
                    true
                } else {
                    let tw = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
                    tw > 25.0
                };
                if free {
                    n += 1.0;
                    sx += u as f64;
                }
            }
        }
        let oracle_x = (sx / n - 1.5) / 4.0;
        assert!((p.x - oracle_x).abs() < 2.0, "{} vs {}", p.x, oracle_x);
    }

    #[test]
    fn adaptive_matches_exact_closely() {
        let cam = CameraModel::new(320, 240, 1.309).unwrap();
        for (kind, pos, dir) in [
            (
                PathKind::StraightA,
                Point3::new(1.0, -2.0, 15.0),
                Vector3::new(0.2, 0.1, 1.0),
            ),
            (
                PathKind::LeftCurveB,
                Point3::new(0.0, 1.0, 60.0),
                Vector3::new(-0.3, 0.0, 1.0),
            ),
            (
                PathKind::SCurveD,
                Point3::new(-1.0, 0.0, 40.0),
                Vector3::new(0.1, -0.2, 1.0),
            ),
        ] {
            let t = TubePhantom::with_default_bore(LumenPath::builtin(kind));
            let pose = TipPose::looking(pos, dir);
            let exact = render_mask(&t, &pose, &cam, 25.0, RenderMode::Exact).unwrap();
            let fast = render_mask(
                &t,
                &pose,
                &cam,
                25.0,
                RenderMode::Adaptive {
                    block: 16,
                    subsample: 1,
                },
            )
            .unwrap();
            let diff = exact
                .pixels()
                .iter()
                .zip(fast.pixels())
                .filter(|(a, b)| a != b)
                .count();
            assert!(
                diff * 1000 < cam.pixel_count(),
                "{kind:?}: {diff} pixels differ"
            );
            let (a, b) = (centroid(&exact).unwrap(), centroid(&fast).unwrap());
            assert!((a.x - b.x).abs() < 0.5 && (a.y - b.y).abs() < 0.5);
        }
    }

    #[test]
    fn roll_about_the_axis_keeps_the_centroid() {
        let t = straight();
        let cam = small_cam();
        let base = TipPose::looking(Point3::new(0.0, 0.0, 30.0), Vector3::z());
        let reference =
            centroid(&render_mask(&t, &base, &cam, 25.0, RenderMode::Exact).unwrap()).unwrap();
        for roll in [0.3, 1.1, 2.5] {
            let mut pose = base;
            pose.orientation = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
            let p =
                centroid(&render_mask(&t, &pose, &cam, 25.0, RenderMode::Exact).unwrap()).unwrap();
            assert!((p.x - reference.x).abs() < 0.5 && (p.y - reference.y).abs() < 0.5);
        }
    }

    #[test]
    fn frame_and_mask_agree_with_the_mask_renderer() {
        let t = TubePhantom::with_default_bore(LumenPath::builtin(PathKind::RightCurveC));
        let cam = small_cam();
        let pose = TipPose::looking(Point3::new(1.0, 0.5, 50.0), Vector3::new(0.2, 0.0, 1.0));
        let (_, mask) = render_lumen(&t, &pose, &cam, 25.0).unwrap();
        let direct = render_mask(&t, &pose, &cam, 25.0, RenderMode::Exact).unwrap();
        assert_eq!(mask, direct);
    }
}
