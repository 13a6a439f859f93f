use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{MetricsError, TrialLog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralParams {
    /// Upper limit of the cutoff frequency (Hz).
    pub max_frequency: f64,
    /// Normalized magnitude that marks the cutoff.
    pub amp_threshold: f64,
    /// The FFT length is the next power of two of `n * zero_pad_factor`.
    pub zero_pad_factor: usize,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            max_frequency: 20.0,
            amp_threshold: 0.05,
            zero_pad_factor: 4,
        }
    }
}

impl SpectralParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_frequency > 0.0) {
            return Err("max_frequency must be positive".into());
        }
        if !(self.amp_threshold > 0.0 && self.amp_threshold < 1.0) {
            return Err("amp_threshold must lie in (0, 1)".into());
        }
        if self.zero_pad_factor == 0 {
            return Err("zero_pad_factor must be at least 1".into());
        }
        Ok(())
    }
}

/// Tip speed (mm/s) from the logged positions: central differences inside,
/// one-sided at the ends.
pub fn tip_speed(log: &TrialLog) -> Vec<f64> {
    let s = &log.samples;
    let n = s.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (s[b].tip - s[a].tip).norm() / ((b - a) as f64 * log.dt)
        })
        .collect()
}

/// Log dimensionless jerk of a speed profile: `-ln(T / vp^2 * int |v''|^2)`.
pub fn ldj(speed: &[f64], dt: f64) -> Result<f64, MetricsError> {
    let n = speed.len();
    if n < 4 {
        return Err(MetricsError::TooShort(4));
    }
    let vp = speed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vp == 0.0 {
        return Err(MetricsError::DegenerateProfile("zero speed".into()));
    }
    let acc2: Vec<f64> = speed
        .windows(3)
        .map(|w| {
            let j = (w[2] - 2.0 * w[1] + w[0]) / (dt * dt);
            j * j
        })
        .collect();
    let integral: f64 = acc2.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
    if integral == 0.0 {
        return Err(MetricsError::DegenerateProfile("zero jerk".into()));
    }
    let duration = (n - 1) as f64 * dt;
    Ok(-(duration / (vp * vp) * integral).ln())
}

/// Spectral arc length of a speed profile. The cutoff is the highest
/// frequency (up to `max_frequency`) where the normalized spectrum is still
/// above `amp_threshold`, with the crossing interpolated between bins.
pub fn sparc(speed: &[f64], dt: f64, params: &SpectralParams) -> Result<f64, MetricsError> {
    let n = speed.len();
    if n < 8 {
        return Err(MetricsError::TooShort(8));
    }
    if speed.iter().all(|v| *v == 0.0) {
        return Err(MetricsError::DegenerateProfile("zero speed".into()));
    }
    let nfft = (n * params.zero_pad_factor.max(1)).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = speed.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(nfft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let v0 = buf[0].norm();
    if v0 == 0.0 {
        return Err(MetricsError::DegenerateProfile("zero mean speed".into()));
    }
    let df = 1.0 / (nfft as f64 * dt);
    let bins = ((params.max_frequency / df).floor() as usize).min(nfft / 2);
    let mag: Vec<f64> = buf[..=bins].iter().map(|c| c.norm() / v0).collect();
    let th = params.amp_threshold;
    let last = mag.iter().rposition(|&m| m >= th).unwrap_or(0);
    let mut freqs: Vec<f64> = (0..=last).map(|k| k as f64 * df).collect();
    let mut amps: Vec<f64> = mag[..=last].to_vec();
    if last + 1 < mag.len() {
        let a = (mag[last] - th) / (mag[last] - mag[last + 1]);
        freqs.push((last as f64 + a) * df);
        amps.push(th);
    }
    let fc = *freqs.last().expect("at least the zero bin");
    if fc == 0.0 {
        return Err(MetricsError::DegenerateProfile("empty band".into()));
    }
    let arc: f64 = freqs
        .windows(2)
        .zip(amps.windows(2))
        .map(|(f, a)| ((f[1] - f[0]) / fc).hypot(a[1] - a[0]))
        .sum();
    Ok(-arc)
}

/// Peaks of the peak-normalized profile with topographic prominence of at
/// least 0.05, per mm of `path_length`.
pub fn peak_count(speed: &[f64], path_length: f64) -> Result<f64, MetricsError> {
    if !(path_length > 0.0) {
        return Err(MetricsError::DegenerateProfile(
            "path length must be positive".into(),
        ));
    }
    let vp = speed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vp == 0.0 {
        return Ok(0.0);
    }
    let y: Vec<f64> = speed.iter().map(|v| v / vp).collect();
    let count = local_maxima(&y)
        .into_iter()
        .filter(|&i| prominence(&y, i) >= 0.05 - 1e-12)
        .count();
    Ok(count as f64 / path_length)
}

/// Interior local maxima; a flat top counts once, at its middle.
fn local_maxima(y: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = y.len();
    let mut i = 1;
    while i + 1 < n {
        if y[i - 1] < y[i] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Height above the higher of the two lowest points reachable on either
/// side before meeting a strictly higher sample.
fn prominence(y: &[f64], peak: usize) -> f64 {
    let h = y[peak];
    let mut left = h;
    for &v in y[..peak].iter().rev() {
        if v > h {
            break;
        }
        left = left.min(v);
    }
    let mut right = h;
    for &v in &y[peak + 1..] {
        if v > h {
            break;
        }
        right = right.min(v);
    }
    h - left.max(right)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_top_counts_once() {
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 1.0, 0.0]), vec![2]);
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0]), Vec::<usize>::new());
    }

    #[test]
    fn prominence_of_a_shoulder() {
        let y = [0.0, 1.0, 0.7, 0.8, 0.2];
        assert!((prominence(&y, 1) - 0.8).abs() < 1e-12);
        assert!((prominence(&y, 3) - 0.1).abs() < 1e-12);
    }
}
