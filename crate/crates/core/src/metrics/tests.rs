use super::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

fn sample(t: f64, p_hat: Option<ImagePoint>, tip: Point3) -> Sample {
    Sample {
        t,
        q: Vector3::zeros(),
        q_dot: Vector3::zeros(),
        tip,
        p: p_hat,
        p_hat,
        rho: None,
        v: Vector2::zeros(),
        mode: Mode::Centering,
        clearance: 1.0,
    }
}

fn log_of(points: &[(f64, f64)], dt: f64) -> TrialLog {
    TrialLog {
        dt,
        path: PathKind::StraightA,
        center: ImagePoint::new(100.0, 50.0),
        samples: points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| sample(i as f64 * dt, Some(ImagePoint::new(x, y)), Point3::zeros()))
            .collect(),
    }
}

fn series(rho: Vec<f64>, dt: f64) -> NtrSeries {
    NtrSeries {
        t: (0..rho.len()).map(|i| i as f64 * dt).collect(),
        x: rho.clone(),
        y: rho.clone(),
        rho,
    }
}

#[test]
fn ntr_examples() {
    // offsets from the (100, 50) center: (40, -30), then the center, then half way
    let log = log_of(&[(140.0, 20.0), (100.0, 50.0), (120.0, 35.0)], 0.1);
    let s = ntr(&log).unwrap();
    assert_eq!((s.x[0], s.y[0], s.rho[0]), (0.0, 0.0, 0.0));
    assert_eq!((s.x[1], s.y[1], s.rho[1]), (1.0, 1.0, 1.0));
    assert!((s.rho[2] - 0.5).abs() < 1e-12);
}

#[test]
fn ntr_rejects_a_start_on_an_axis() {
    assert_eq!(
        ntr(&log_of(&[(100.0, 20.0)], 0.1)),
        Err(MetricsError::DegenerateStart)
    );
    assert_eq!(ntr(&log_of(&[], 0.1)), Err(MetricsError::Empty));
}

#[test]
fn first_order_rise_time() {
    let tau = 4.0;
    let rho: Vec<f64> = (0..600)
        .map(|i| 1.0 - (-(i as f64 * 0.1) / tau).exp())
        .collect();
    let r = centering_metrics(&series(rho, 0.1)).unwrap();
    let expect = tau * (5f64.ln() - 1.25f64.ln());
    assert!((r.rt.unwrap() - expect).abs() < 0.05, "{:?}", r.rt);
    // enters the band at 0.9
    assert!((r.st.unwrap() - tau * 10f64.ln()).abs() < 0.05);
    assert!(r.rt.unwrap() <= r.st.unwrap());
}

#[test]
fn at_the_set_point_from_the_start() {
    let r = centering_metrics(&series(vec![1.0; 20], 0.1)).unwrap();
    assert_eq!((r.sse, r.os_x, r.os_y), (0.0, 0.0, 0.0));
}

#[test]
fn overshoot_formula() {
    let mut s = series(vec![0.0, 0.5, 1.0, 1.0], 0.1);
    s.x = vec![0.0, 0.7, 1.118, 1.0];
    let r = centering_metrics(&s).unwrap();
    assert!((r.os_x - 11.8).abs() < 1e-9);
    assert_eq!(r.os_y, 0.0);
}

#[test]
fn never_rising_leaves_times_absent() {
    let r = centering_metrics(&series(vec![0.0, 0.1, 0.15], 0.1)).unwrap();
    assert_eq!((r.rt, r.st), (None, None));
    assert!((r.sse - 85.0).abs() < 1e-9);
}

fn straight_log(offset: impl Fn(f64) -> f64, n: usize) -> TrialLog {
    let dt = 0.1;
    TrialLog {
        dt,
        path: PathKind::StraightA,
        center: ImagePoint::new(0.0, 0.0),
        samples: (0..n)
            .map(|i| {
                let z = 140.0 * i as f64 / (n - 1) as f64;
                sample(i as f64 * dt, None, Point3::new(offset(z), 0.0, z))
            })
            .collect(),
    }
}

#[test]
fn nav_errors_on_a_straight_tube() {
    let path = LumenPath::builtin(PathKind::StraightA);
    let goal = GoalPlane::at_depth(130.0);
    let (ct, mae, max_ae) = nav_errors(&straight_log(|_| 0.0, 141), &path, &goal).unwrap();
    assert!(mae < 1e-9 && max_ae < 1e-9);
    assert!((ct - 13.0).abs() < 1e-9);
    let (_, mae, max_ae) = nav_errors(&straight_log(|_| 1.0, 141), &path, &goal).unwrap();
    assert!((mae - 1.0).abs() < 1e-9 && (max_ae - 1.0).abs() < 1e-9);
    let short = GoalPlane::at_depth(500.0);
    assert_eq!(
        nav_errors(&straight_log(|_| 0.0, 10), &path, &short),
        Err(MetricsError::GoalNotReached)
    );
}

#[test]
fn sinusoidal_wobble_mean_error() {
    let path = LumenPath::builtin(PathKind::StraightA);
    // 13 whole periods before the goal at 130 mm
    let a = 0.8;
    let log = straight_log(
        |z| a * (2.0 * std::f64::consts::PI * z / 10.0).sin(),
        14_001,
    );
    let (_, mae, max_ae) = nav_errors(&log, &path, &GoalPlane::at_depth(130.0)).unwrap();
    let expect = 2.0 * a / std::f64::consts::PI;
    assert!((mae - expect).abs() < 0.01 * expect, "{mae} vs {expect}");
    assert!((max_ae - a).abs() < 1e-6);
}

fn min_jerk(dt: f64) -> Vec<f64> {
    let n = (1.0 / dt).round() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            30.0 * (t * t - 2.0 * t.powi(3) + t.powi(4))
        })
        .collect()
}

/// For v = 30(t^2 - 2t^3 + t^4) on [0, 1]: v'' = 30(2 - 12t + 12t^2),
/// int v''^2 = 900 * 0.8 = 720 and vp = 30/16, so the argument of the
/// logarithm is 720 / 1.875^2 = 204.8.
const MIN_JERK_LDJ: f64 = -5.322033893165353;

#[test]
fn ldj_of_minimum_jerk() {
    assert!((MIN_JERK_LDJ + 204.8f64.ln()).abs() < 1e-12);
    let l = ldj(&min_jerk(1e-3), 1e-3).unwrap();
    assert!((l - MIN_JERK_LDJ).abs() < 0.005 * MIN_JERK_LDJ.abs(), "{l}");
}

#[test]
fn ldj_errors() {
    assert_eq!(ldj(&[1.0, 2.0, 3.0], 0.1), Err(MetricsError::TooShort(4)));
    assert!(matches!(
        ldj(&[0.0; 10], 0.1),
        Err(MetricsError::DegenerateProfile(_))
    ));
    // linear speed has no second derivative
    assert!(matches!(
        ldj(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.1),
        Err(MetricsError::DegenerateProfile(_))
    ));
}

fn gaussian_pulse(dt: f64) -> Vec<f64> {
    let n = (2.0 / dt).round() as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 * dt - 1.0;
            (-t * t / (2.0 * 0.2 * 0.2)).exp()
        })
        .collect()
}

/// Spectral arc length of the Gaussian pulse computed offline from 200,001
/// samples at 1e-5 s with 16x padding.
const GAUSSIAN_SPARC: f64 = -1.416_441;

/// Independent check of the frozen value: the continuous spectrum of a
/// Gaussian with sigma_t = 0.2 s is exp(-f^2 / (2 sf^2)) with
/// sf = 1 / (2 pi 0.2), cut where it falls to 0.05.
#[test]
fn frozen_sparc_matches_the_continuous_spectrum() {
    let sf = 1.0 / (2.0 * std::f64::consts::PI * 0.2);
    let fc = sf * (2.0 * 20f64.ln()).sqrt();
    assert!((fc - 1.948).abs() < 1e-3);
    let n = 200_000;
    let mut arc = 0.0;
    let mut prev = 1.0;
    for k in 1..=n {
        let f = fc * k as f64 / n as f64;
        let v = (-f * f / (2.0 * sf * sf)).exp();
        arc += (1.0 / n as f64).hypot(v - prev);
        prev = v;
    }
    assert!((-arc - GAUSSIAN_SPARC).abs() < 1e-4, "{}", -arc);
}

#[test]
fn sparc_of_a_gaussian_pulse() {
    let s = sparc(&gaussian_pulse(1e-3), 1e-3, &SpectralParams::default()).unwrap();
    assert!(
        (s - GAUSSIAN_SPARC).abs() < 0.01 * GAUSSIAN_SPARC.abs(),
        "{s}"
    );
}

#[test]
fn smoothness_is_amplitude_invariant() {
    let p = SpectralParams::default();
    for profile in [min_jerk(1e-3), gaussian_pulse(1e-3)] {
        let scaled: Vec<f64> = profile.iter().map(|v| 3.0 * v).collect();
        assert!((ldj(&profile, 1e-3).unwrap() - ldj(&scaled, 1e-3).unwrap()).abs() < 1e-9);
        assert!(
            (sparc(&profile, 1e-3, &p).unwrap() - sparc(&scaled, 1e-3, &p).unwrap()).abs() < 1e-9
        );
    }
}

/// Sum of 20 random-phase sines between 2 and 10 Hz with the given RMS.
fn band_noise(n: usize, dt: f64, rms: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let freq = Uniform::new(2.0, 10.0);
    let phase = Uniform::new(0.0, 2.0 * std::f64::consts::PI);
    let tones: Vec<(f64, f64)> = (0..20)
        .map(|_| (freq.sample(rng), phase.sample(rng)))
        .collect();
    let amp = rms * (2.0f64 / 20.0).sqrt();
    (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            tones
                .iter()
                .map(|(f, ph)| amp * (2.0 * std::f64::consts::PI * f * t + ph).sin())
                .sum()
        })
        .collect()
}

#[test]
fn noise_makes_both_metrics_worse() {
    let dt = 1e-3;
    let p = SpectralParams::default();
    let mj = min_jerk(dt);
    let vp = 1.875;
    let pulse = gaussian_pulse(dt);
    let (l0, s0) = (ldj(&mj, dt).unwrap(), sparc(&pulse, dt, &p).unwrap());
    let (mut ldj_wins, mut sparc_wins) = (0, 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.05 * vp).unwrap();
        let noisy: Vec<f64> = mj.iter().map(|v| v + normal.sample(&mut rng)).collect();
        ldj_wins += (ldj(&noisy, dt).unwrap() < l0) as usize;
        let noise = band_noise(pulse.len(), dt, 0.1, &mut rng);
        let noisy: Vec<f64> = pulse.iter().zip(&noise).map(|(a, b)| a + b).collect();
        sparc_wins += (sparc(&noisy, dt, &p).unwrap() < s0) as usize;
    }
    assert!(sign_test_p(ldj_wins, 20) < 0.01, "{ldj_wins}/20");
    assert!(sign_test_p(sparc_wins, 20) < 0.01, "{sparc_wins}/20");
}

#[test]
fn sign_test_values() {
    assert!((sign_test_p(20, 20) - 1.0 / 1_048_576.0).abs() < 1e-15);
    assert!(sign_test_p(16, 20) < 0.01);
    assert!(sign_test_p(15, 20) > 0.01);
    assert_eq!(sign_test_p(0, 20), 1.0);
}

fn bumps(heights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    for h in heights {
        for k in 1..=20 {
            out.push(h * (std::f64::consts::PI * k as f64 / 20.0).sin());
        }
    }
    out
}

#[test]
fn peak_count_examples() {
    let ramp: Vec<f64> = (0..50).map(|i| i as f64).collect();
    assert_eq!(peak_count(&ramp, 10.0).unwrap(), 0.0);
    assert!((peak_count(&bumps(&[1.0, 1.0]), 100.0).unwrap() - 0.02).abs() < 1e-12);
    // a ripple of prominence 0.04 between two bumps of prominence 0.5
    let mut y = vec![0.5, 1.0, 0.5, 0.54, 0.5, 1.0, 0.5];
    assert!((peak_count(&y, 1.0).unwrap() - 2.0).abs() < 1e-12);
    y[3] = 0.56;
    assert!((peak_count(&y, 1.0).unwrap() - 3.0).abs() < 1e-12);
    assert!(peak_count(&y, 0.0).is_err());
}

#[test]
fn aggregate_uses_sample_std() {
    let (m, s, n) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!((m, n), (2.5, 4));
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(mean_std(&[7.0]), (7.0, 0.0, 1));
}

proptest! {
    #[test]
    fn ntr_ignores_time_shift(shift in -100.0..100.0f64, pts in prop::collection::vec((0.0..200.0f64, 0.0..100.0f64), 2..30)) {
        prop_assume!((pts[0].0 - 100.0).abs() > 1e-3 && (pts[0].1 - 50.0).abs() > 1e-3);
        let a = log_of(&pts, 0.1);
        let mut b = a.clone();
        for s in &mut b.samples {
            s.t += shift;
        }
        let (sa, sb) = (ntr(&a).unwrap(), ntr(&b).unwrap());
        prop_assert_eq!(&sa.rho, &sb.rho);
        prop_assert_eq!(&sa.x, &sb.x);
        for (x, y) in sa.t.iter().zip(&sb.t) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn settling_follows_rising(rho in prop::collection::vec(0.0..1.0f64, 2..200)) {
        let s = series(rho, 0.1);
        let r = centering_metrics(&s).unwrap();
        if let Some(st) = r.st {
            let rise_end = first_reach(&s.t, &s.rho, 0.8).unwrap();
            prop_assert!(st >= rise_end - 1e-9);
            prop_assert!(r.rt.unwrap() <= st + 1e-9);
        }
        prop_assert!(r.sse >= 0.0 && r.os_x >= 0.0 && r.os_y >= 0.0);
    }

    #[test]
    fn mae_never_exceeds_max(offsets in prop::collection::vec(-5.0..5.0f64, 3..60)) {
        let n = offsets.len();
        let log = straight_log(|z| offsets[((z / 140.0) * (n - 1) as f64).round() as usize], n);
        let (_, mae, max_ae) = nav_errors(&log, &LumenPath::builtin(PathKind::StraightA), &GoalPlane::at_depth(130.0)).unwrap();
        prop_assert!(mae <= max_ae + 1e-12);
    }

    #[test]
    fn peak_count_is_scale_free(y in prop::collection::vec(0.0..10.0f64, 3..100), k in -6..6i32) {
        // powers of two keep the normalized profile bit-identical
        let scaled: Vec<f64> = y.iter().map(|v| v * 2f64.powi(k)).collect();
        prop_assert_eq!(peak_count(&y, 50.0).unwrap(), peak_count(&scaled, 50.0).unwrap());
    }
}
