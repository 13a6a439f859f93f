use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Mask, PerceptionError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub flip_prob: f64,
    pub occluder: Option<Occluder>,
    pub illumination_dropout_prob: f64,
    pub rng_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            flip_prob: 0.0,
            occluder: None,
            illumination_dropout_prob: 0.0,
            rng_seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        for (name, p) in [
            ("flip_prob", self.flip_prob),
            ("illumination_dropout_prob", self.illumination_dropout_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(PerceptionError::InvalidConfig(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        if let Some(o) = self.occluder {
            if !(o.radius >= 0.0 && o.center_x.is_finite() && o.center_y.is_finite()) {
                return Err(PerceptionError::InvalidConfig("bad occluder".into()));
            }
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.flip_prob == 0.0 && self.occluder.is_none() && self.illumination_dropout_prob == 0.0
    }
}

/// Applies dropout, pixel flips and the occluder, in that order. The random
/// stream is ChaCha8 seeded with `rng_seed`: one draw for the dropout, then
/// one draw per pixel in row-major order.
pub fn corrupt(mask: &Mask, cfg: &NoiseConfig) -> Mask {
    let mut out = mask.clone();
    if cfg.is_clean() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    if rng.gen::<f64>() < cfg.illumination_dropout_prob {
        return Mask::zeros(mask.width(), mask.height());
    }
    if cfg.flip_prob > 0.0 {
        for v in out.pixels_mut() {
            if rng.gen::<f64>() < cfg.flip_prob {
                *v ^= 1;
            }
        }
    }
    if let Some(o) = cfg.occluder {
        let r2 = o.radius * o.radius;
        for w in 0..mask.height() {
            for u in 0..mask.width() {
                let (du, dw) = (u as f64 - o.center_x, w as f64 - o.center_y);
                if du * du + dw * dw <= r2 {
                    out.set(u, w, false);
                }
            }
        }
    }
    out
}
