//! Training data for an external segmentation model: three consecutive
//! rendered frames and the ground-truth mask of the last one, per sample.
//!
//! Layout:
//!   index.csv                     one row per sample
//!   samples/NNNNNN_f0.pgm .. f2   oldest frame first
//!   samples/NNNNNN_mask.pgm       0 or 255

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{trial_seed, ExperimentConfig, HarnessError};
use crate::perception::{
    render_frame, write_pgm, CameraModel, Frame, PerceptionConfig, RenderMode,
};
use crate::plant::TipPose;
use crate::world::{PathKind, Point3, TubePhantom};

const PATHS: [PathKind; 4] = [
    PathKind::StraightA,
    PathKind::LeftCurveB,
    PathKind::RightCurveC,
    PathKind::SCurveD,
];
const POSE_ATTEMPTS: usize = 64;

/// One row of index.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: usize,
    pub path: String,
    pub frame0: String,
    pub frame1: String,
    pub frame2: String,
    pub mask: String,
    /// Camera position and viewing direction of the last frame.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub dir_x: f64,
    pub dir_y: f64,
    pub dir_z: f64,
}

fn unit_perpendicular(t: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let a = if t.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = t.cross(&a).normalize();
    let e2 = t.cross(&e1);
    e1 * angle.cos() + e2 * angle.sin()
}

/// Three camera poses stepping forward along a tilted direction from a
/// random point near the centerline. `None` if any pose leaves the tube.
fn sample_poses(
    phantom: &TubePhantom,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Option<[TipPose; 3]> {
    let x = &cfg.experiment;
    let path = phantom.path();
    let back = 2.0 * x.dataset_frame_step;
    // keep the view inside the tube: the lumen needs room ahead
    let s_max = path.total_arc_length() - cfg.perception.lumen_depth - 1.0;
    if s_max <= back {
        return None;
    }
    let s = rng.gen_range(back..s_max);
    let (c, t) = path.centerline_point(s).ok()?;
    let r = x.dataset_offset * rng.gen::<f64>().sqrt();
    let offset = unit_perpendicular(&t, rng.gen_range(0.0..std::f64::consts::TAU)) * r;
    let tilt = x.dataset_tilt * rng.gen::<f64>();
    let axis = Unit::new_normalize(unit_perpendicular(
        &t,
        rng.gen_range(0.0..std::f64::consts::TAU),
    ));
    let dir = Rotation3::from_axis_angle(&axis, tilt) * t;
    let last: Point3 = c + offset;
    let mut poses = [TipPose::looking(last, dir); 3];
    for (k, pose) in poses.iter_mut().enumerate() {
        let p = last - dir * (x.dataset_frame_step * (2 - k) as f64);
        if !phantom.contains(&p) {
            return None;
        }
        *pose = TipPose::looking(p, dir);
    }
    Some(poses)
}

fn write_frame(path: &Path, frame: &Frame) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_pgm(&mut out, frame)?;
    Ok(())
}

/// Renders `count` samples into `dir`, cycling through paths A to D. Each
/// sample has its own seed, so a sample does not depend on the count.
pub fn generate_dataset(
    cfg: &ExperimentConfig,
    dir: &Path,
    count: usize,
) -> Result<Vec<DatasetEntry>, HarnessError> {
    cfg.validate()?;
    let x = &cfg.experiment;
    let perception = PerceptionConfig {
        camera: CameraModel::new(
            x.dataset_width,
            x.dataset_height,
            cfg.perception.camera.horizontal_fov,
        )?,
        render: RenderMode::Exact,
        ..cfg.perception
    };
    let phantoms = PATHS
        .iter()
        .map(|&k| cfg.phantom(k))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(dir)?;
    let samples = dir.join("samples");
    if count > 0 {
        fs::create_dir_all(&samples)?;
    }
    let mut index = csv::Writer::from_path(dir.join("index.csv"))?;
    let mut entries = Vec::with_capacity(count);
    if count == 0 {
        index.write_record([
            "id", "path", "frame0", "frame1", "frame2", "mask", "x", "y", "z", "dir_x", "dir_y",
            "dir_z",
        ])?;
    }
    for id in 0..count {
        let phantom = &phantoms[id % PATHS.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(x.rng_seed, id));
        let poses = (0..POSE_ATTEMPTS)
            .find_map(|_| sample_poses(phantom, cfg, &mut rng))
            .ok_or_else(|| HarnessError::Config("no dataset pose fits inside the tube".into()))?;
        let stem = format!("{id:06}");
        let mut names = Vec::with_capacity(4);
        let mut mask = None;
        for (k, pose) in poses.iter().enumerate() {
            let (frame, m) = render_frame(phantom, pose, &perception)?;
            let name = format!("samples/{stem}_f{k}.pgm");
            write_frame(&dir.join(&name), &frame)?;
            names.push(name);
            mask = Some(m);
        }
        let name = format!("samples/{stem}_mask.pgm");
        write_frame(&dir.join(&name), &mask.expect("three frames").to_frame())?;
        names.push(name);
        let last = &poses[2];
        let d = last.view_dir();
        let entry = DatasetEntry {
            id,
            path: phantom.path().kind().name().to_string(),
            frame0: names[0].clone(),
            frame1: names[1].clone(),
            frame2: names[2].clone(),
            mask: names[3].clone(),
            x: last.position.x,
            y: last.position.y,
            z: last.position.z,
            dir_x: d.x,
            dir_y: d.y,
            dir_z: d.z,
        };
        index.serialize(&entry)?;
        entries.push(entry);
    }
    index.flush()?;
    Ok(entries)
}
