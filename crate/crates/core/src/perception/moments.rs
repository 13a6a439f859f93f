use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Mask, PerceptionError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub fn new(x: f64, y: f64) -> Self {
        ImagePoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Centroid from the raw moments m00, m10 and m01. The sums are exact
/// integers, so the result does not depend on summation order.
pub fn centroid(mask: &Mask) -> Result<ImagePoint, PerceptionError> {
    let width = mask.width() as usize;
    let (mut m00, mut m10, mut m01) = (0u64, 0u64, 0u64);
    for (w, row) in mask.pixels().chunks_exact(width.max(1)).enumerate() {
        let mut count = 0u64;
        let mut sum_u = 0u64;
        for (u, &v) in row.iter().enumerate() {
            if v != 0 {
                count += 1;
                sum_u += u as u64;
            }
        }
        m00 += count;
        m10 += sum_u;
        m01 += count * w as u64;
    }
    if m00 == 0 {
        return Err(PerceptionError::NoLumen);
    }
    Ok(ImagePoint::new(
        m10 as f64 / m00 as f64,
        m01 as f64 / m00 as f64,
    ))
}

/// Moving average over the last four detections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetFilter {
    window: VecDeque<ImagePoint>,
}

impl TargetFilter {
    pub const WINDOW: usize = 4;

    pub fn new() -> Self {
        TargetFilter::default()
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Mean of the buffered points, `None` before the first detection.
    pub fn output(&self) -> Option<ImagePoint> {
        if self.window.is_empty() {
            return None;
        }
        let n = self.window.len() as f64;
        let (sx, sy) = self
            .window
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some(ImagePoint::new(sx / n, sy / n))
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }
}

/// Pushes `p` and returns the new average.
pub fn filter_update(filter: &mut TargetFilter, p: ImagePoint) -> ImagePoint {
    debug_assert!(p.is_finite());
    if filter.window.len() == TargetFilter::WINDOW {
        filter.window.pop_front();
    }
    filter.window.push_back(p);
    filter.output().expect("window is non-empty")
}
