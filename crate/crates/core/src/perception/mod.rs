//! Tip camera, lumen masks, image-moment target detection and the
//! segmentation backends.

mod backend;
mod camera;
mod image;
mod moments;
mod noise;
pub mod protocol;
mod render;

pub use backend::{GeometricBackend, PerceptionBackend, RemoteBackend, View};
pub use camera::CameraModel;
pub use image::{read_pgm, write_pgm, Frame, Mask};
pub use moments::{centroid, filter_update, ImagePoint, TargetFilter};
pub use noise::{corrupt, NoiseConfig, Occluder};
pub use render::{render_frame, render_lumen, render_mask, RenderMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("camera origin is outside the lumen")]
    CameraOutsideLumen,
    #[error("mask has no lumen pixels")]
    NoLumen,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid perception settings: {0}")]
    InvalidConfig(String),
    #[error("mask service replied with error code {0}")]
    Remote(u16),
    #[error("malformed mask service message: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Free-ray distance beyond which a pixel counts as lumen (mm).
pub const DEFAULT_LUMEN_DEPTH: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub camera: CameraModel,
    pub lumen_depth: f64,
    pub render: RenderMode,
    /// Wall distance at which rendered frames saturate to white (mm).
    pub shading_depth: f64,
    /// Rays in rendered frames stop after this distance (mm).
    pub frame_range: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            camera: CameraModel::default(),
            lumen_depth: DEFAULT_LUMEN_DEPTH,
            render: RenderMode::default(),
            shading_depth: 5.0,
            frame_range: 150.0,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        self.camera.validate()?;
        if !(self.lumen_depth.is_finite() && self.lumen_depth > 0.0) {
            return Err(PerceptionError::InvalidConfig(
                "lumen_depth must be > 0".into(),
            ));
        }
        if !(self.shading_depth > 0.0 && self.frame_range > self.lumen_depth) {
            return Err(PerceptionError::InvalidConfig(
                "need shading_depth > 0 and frame_range > lumen_depth".into(),
            ));
        }
        if let RenderMode::Adaptive { block, subsample } = self.render {
            if !(2..=256).contains(&block) || !block.is_power_of_two() {
                return Err(PerceptionError::InvalidConfig(format!(
                    "adaptive block {block} must be a power of two in [2, 256]"
                )));
            }
            let (w, h) = (self.camera.width, self.camera.height);
            if subsample == 0 || w % subsample != 0 || h % subsample != 0 {
                return Err(PerceptionError::InvalidConfig(format!(
                    "subsample {subsample} must divide the {w}x{h} image"
                )));
            }
        }
        Ok(())
    }
}
