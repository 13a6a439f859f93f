use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::control::ControlParams;
use crate::metrics::SpectralParams;
use crate::perception::{NoiseConfig, PerceptionConfig};
use crate::plant::ContinuumParams;
use crate::world::{BuiltinPathParams, PathKind, TubePhantom, DEFAULT_GOAL_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Centering,
    Navigation,
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Geometric,
    Remote { host: String, port: u16 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// One of A, B, C, D.
    pub path: String,
    /// Unset: 10 centering trials, 5 navigation trials on A, 15 on B to D.
    pub n_trials: Option<usize>,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub backend: BackendConfig,
    /// Stage position held during centering trials (mm).
    pub centering_insertion: f64,
    /// Smallest detected offset accepted as a centering start (px).
    pub initial_rho: f64,
    /// Centering stops once the response has stayed in the band this long (s).
    pub settle_hold: f64,
    pub centering_timeout: f64,
    pub navigation_timeout: f64,
    /// Depth of the tip inside the opening at the start of navigation (mm).
    pub start_depth: f64,
    /// Largest random bend at the start of navigation (rad).
    pub start_max_bend: f64,
    pub goal_depth: f64,
    /// Samples written by the dataset generator.
    pub dataset_count: usize,
    /// Largest lateral offset of dataset poses from the centerline (mm).
    pub dataset_offset: f64,
    /// Largest tilt of dataset poses from the centerline tangent (rad).
    pub dataset_tilt: f64,
    /// Forward motion between consecutive dataset frames (mm).
    pub dataset_frame_step: f64,
    /// Image size of dataset frames; same field of view as the camera.
    pub dataset_width: u32,
    pub dataset_height: u32,
    pub plots: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            kind: ExperimentKind::Centering,
            path: "A".into(),
            n_trials: None,
            rng_seed: 1,
            output_dir: PathBuf::from("out"),
            backend: BackendConfig::Geometric,
            centering_insertion: 10.0,
            initial_rho: 320.0,
            settle_hold: 5.0,
            centering_timeout: 120.0,
            navigation_timeout: 600.0,
            start_depth: 2.0,
            start_max_bend: 0.1,
            goal_depth: DEFAULT_GOAL_DEPTH,
            dataset_count: 100,
            dataset_offset: 3.0,
            dataset_tilt: 0.25,
            dataset_frame_step: 0.5,
            dataset_width: 160,
            dataset_height: 120,
            plots: true,
        }
    }
}

/// Everything one run needs. Every section is optional in the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub plant: ContinuumParams,
    pub control: ControlParams,
    pub perception: PerceptionConfig,
    pub noise: NoiseConfig,
    pub spectral: SpectralParams,
    pub paths: BuiltinPathParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn path_kind(&self) -> Result<PathKind, HarnessError> {
        PathKind::from_name(&self.experiment.path)
            .filter(|k| *k != PathKind::Custom)
            .ok_or_else(|| HarnessError::Config(format!("unknown path {:?}", self.experiment.path)))
    }

    pub fn trials(&self) -> usize {
        let x = &self.experiment;
        x.n_trials.unwrap_or(match (x.kind, x.path.trim()) {
            (ExperimentKind::Navigation, "A") => 5,
            (ExperimentKind::Navigation, _) => 15,
            _ => 10,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |e: String| HarnessError::Config(e);
        let x = &self.experiment;
        if x.n_trials == Some(0) {
            return Err(cfg("n_trials must be at least 1".into()));
        }
        if x.dataset_width == 0 || x.dataset_height == 0 {
            return Err(cfg("dataset image size must be positive".into()));
        }
        self.plant.validate().map_err(|e| cfg(e.to_string()))?;
        self.control.validate().map_err(|e| cfg(e.to_string()))?;
        self.perception.validate().map_err(|e| cfg(e.to_string()))?;
        self.noise.validate().map_err(|e| cfg(e.to_string()))?;
        self.spectral.validate().map_err(cfg)?;
        let kind = self.path_kind()?;
        let phantom = self.phantom(kind)?;
        let positive = [
            ("centering_timeout", x.centering_timeout),
            ("navigation_timeout", x.navigation_timeout),
            ("settle_hold", x.settle_hold),
            ("initial_rho", x.initial_rho),
            ("goal_depth", x.goal_depth),
            ("dataset_frame_step", x.dataset_frame_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(cfg(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("centering_insertion", x.centering_insertion),
            ("start_depth", x.start_depth),
            ("start_max_bend", x.start_max_bend),
            ("dataset_offset", x.dataset_offset),
            ("dataset_tilt", x.dataset_tilt),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(cfg(format!("{name} must be non-negative")));
            }
        }
        if x.dataset_offset >= phantom.inner_radius() {
            return Err(cfg("dataset_offset must stay inside the bore".into()));
        }
        Ok(())
    }

    pub fn phantom(&self, kind: PathKind) -> Result<TubePhantom, HarnessError> {
        let path = self
            .paths
            .build(kind)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(TubePhantom::with_default_bore(path))
    }
}
