use super::*;
use nalgebra::Vector3;
use proptest::prelude::*;

fn params() -> ControlParams {
    ControlParams::default()
}

fn err(x: f64, y: f64) -> ErrorVector {
    ErrorVector::new(Vector2::new(x, y))
}

#[test]
fn defaults_validate() {
    params().validate().unwrap();
    let mut p = params();
    p.delta_c = 30.0;
    assert!(p.validate().is_err());
    p = params();
    p.damping = 1.0;
    assert!(p.validate().is_err());
}

#[test]
fn gradient_vanishes_at_the_minimum() {
    assert_eq!(
        potential_gradient(&err(0.0, 0.0), &params()),
        Vector2::zeros()
    );
}

#[test]
fn conic_region_has_constant_slope() {
    let p = params();
    for rho in [2.0 * p.delta, 5.0 * p.delta, 40.0 * p.delta] {
        let g = potential_gradient(&err(rho * 0.6, rho * 0.8), &p);
        assert!((g.norm() - p.gain * p.delta).abs() < 1e-12);
    }
}

fn fd_slope(rho: f64, p: &ControlParams) -> f64 {
    let h = 1e-4;
    (potential(&err(rho + h, 0.0), p) - potential(&err(rho - h, 0.0), p)) / (2.0 * h)
}

#[test]
fn gradient_matches_finite_differences_near_delta() {
    let p = params();
    for rho in [p.delta - 0.01, p.delta + 0.01, 3.0, 100.0] {
        let g = potential_gradient(&err(rho, 0.0), &p);
        assert!((g.x - fd_slope(rho, &p)).abs() < 1e-6, "rho {rho}");
        assert_eq!(g.y, 0.0);
    }
}

#[test]
fn literal_variant_jumps_at_delta() {
    let p = ControlParams {
        potential: PotentialKind::Clamped,
        ..params()
    };
    let inside = potential_gradient(&err(p.delta - 1e-9, 0.0), &p).x;
    let outside = potential_gradient(&err(p.delta, 0.0), &p).x;
    assert!((inside - 1.5 * p.delta).abs() < 1e-6);
    assert!((outside - p.delta).abs() < 1e-12);
    for rho in [p.delta - 0.01, p.delta + 0.01, 7.0] {
        assert!((potential_gradient(&err(rho, 0.0), &p).x - fd_slope(rho, &p)).abs() < 1e-6);
    }
    // the potential itself is still continuous
    let gap = potential(&err(p.delta - 1e-9, 0.0), &p) - potential(&err(p.delta, 0.0), &p);
    assert!(gap.abs() < 1e-6);
}

#[test]
fn velocity_update_examples() {
    let mut p = params();
    assert_eq!(
        velocity_update(&Vector2::zeros(), &err(0.0, 0.0), &p),
        Vector2::zeros()
    );
    p.damping = 0.0;
    let v = velocity_update(&Vector2::zeros(), &err(0.0, 2.0 * p.delta), &p);
    assert!((v.norm() - p.dt * p.gain * p.delta / p.mass).abs() < 1e-12);
}

#[test]
fn speed_is_clamped() {
    let p = params();
    let v = velocity_update(&Vector2::new(1e4, 0.0), &err(1.0, 0.0), &p);
    assert!((v.norm() - p.max_speed).abs() < 1e-9);
}

/// Point target driven straight by `v`: returns the normalized distance
/// `1 - rho/rho0` at every step.
fn ideal_loop(damping: f64, steps: usize) -> Vec<f64> {
    let p = ControlParams {
        damping,
        ..params()
    };
    let mut r = err(100.0, 0.0);
    let mut v = Vector2::zeros();
    let mut out = Vec::new();
    for _ in 0..steps {
        v = velocity_update(&v, &r, &p);
        r = ErrorVector::new(r.r - v * p.dt);
        out.push(r.r.x / 100.0);
    }
    out.iter().map(|x| 1.0 - x).collect()
}

#[test]
fn damped_well_settles_in_the_band() {
    let ntr = ideal_loop(0.15, 600);
    let first = ntr.iter().position(|&n| (0.9..=1.1).contains(&n)).unwrap();
    assert!(ntr[first..].iter().all(|&n| (0.9..=1.1).contains(&n)));
    // the approach is monotone until the band is reached
    assert!(ntr[..=first].windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn undamped_well_overshoots() {
    let ntr = ideal_loop(0.0, 600);
    let peak = ntr.iter().cloned().fold(f64::MIN, f64::max);
    assert!(peak > 1.5, "{peak}");
}

#[test]
fn resolved_rates_examples() {
    let diag = JacobianEstimate::new(Matrix2x3::new(2.0, 0.0, 7.0, 0.0, 4.0, -3.0));
    assert_eq!(
        resolved_rates(&diag, &Vector2::zeros(), true),
        Vector3::zeros()
    );
    let q = resolved_rates(&diag, &Vector2::new(2.0, 4.0), true);
    assert!((q - Vector3::new(1.0, 1.0, 0.0)).norm() < 1e-12);
    assert_eq!(q.z, 0.0);

    let rank1 = JacobianEstimate::new(Matrix2x3::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0));
    let q = resolved_rates(&rank1, &Vector2::new(1.0, 0.0), true);
    assert!((q - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
}

#[test]
fn pseudo_inverse_of_zero_is_zero() {
    assert_eq!(pseudo_inverse(&Matrix2x3::zeros()), Matrix3x2::zeros());
}

fn some_jacobian() -> JacobianEstimate {
    JacobianEstimate::new(Matrix2x3::new(-1800.0, 30.0, 1.0, 25.0, 1900.0, -0.5))
}

#[test]
fn control_step_examples() {
    let p = params();
    let c = ImagePoint::new(639.5, 479.5);
    let jac = some_jacobian();
    let s = ControllerState::default();

    let (q, next) = control_step(&s, Observation::Target(c), c, &p, &jac).unwrap();
    assert_eq!(next.mode, Mode::Advancing);
    assert_eq!(q, Vector3::new(0.0, 0.0, p.insertion_speed));

    let far = ImagePoint::new(c.x + 60.0, c.y - 80.0);
    let (q, next) = control_step(&s, Observation::Target(far), c, &p, &jac).unwrap();
    assert_eq!(next.mode, Mode::Centering);
    assert_eq!(q.z, 0.0);
    assert!(q.x != 0.0 && q.y != 0.0);

    let mut lost = s;
    let steps = (p.lost_timeout / p.dt).round() as usize;
    for k in 0..steps {
        match control_step(&lost, Observation::NoTarget, c, &p, &jac) {
            Ok((q, next)) => {
                assert!(k + 1 < steps);
                assert_eq!(q, Vector3::zeros());
                assert_eq!(next.mode, Mode::Lost);
                lost = next;
            }
            Err(ControlError::Aborted(t)) => {
                assert_eq!(k + 1, steps);
                assert!((t - p.lost_timeout).abs() < 1e-9);
            }
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn reacquiring_resets_the_lost_timer() {
    let p = params();
    let c = ImagePoint::new(0.0, 0.0);
    let s = ControllerState {
        mode: Mode::Lost,
        v: Vector2::zeros(),
        time_lost: 4.0,
    };
    let (_, next) = control_step(
        &s,
        Observation::Target(ImagePoint::new(100.0, 0.0)),
        c,
        &p,
        &some_jacobian(),
    )
    .unwrap();
    assert_eq!(next.time_lost, 0.0);
}

/// Feature that is an exact linear function of `q`.
struct Linear(Matrix2x3<f64>, u32);

impl FeatureSource for Linear {
    fn feature_at(&mut self, q: &Actuation) -> Option<ImagePoint> {
        self.1 += 1;
        let f = self.0 * q;
        Some(ImagePoint::new(f.x + 320.0, f.y + 240.0))
    }
}

struct Blind;

impl FeatureSource for Blind {
    fn feature_at(&mut self, _: &Actuation) -> Option<ImagePoint> {
        None
    }
}

#[test]
fn probing_recovers_a_linear_map() {
    let m = Matrix2x3::new(-1500.0, 20.0, 0.3, 10.0, 1700.0, -2.0);
    let mut src = Linear(m, 0);
    let jac = estimate_jacobian(&mut src, &Vector3::new(0.1, -0.2, 30.0), 0.05, 1.0).unwrap();
    assert!((jac.full - m).norm() < 1e-9);
    assert_eq!(src.1, 6);
    assert!(jac.centering().column(2).iter().all(|&v| v == 0.0));
}

#[test]
fn probing_errors() {
    let mut src = Linear(Matrix2x3::zeros(), 0);
    assert_eq!(
        estimate_jacobian(&mut src, &Vector3::zeros(), 0.0, 1.0),
        Err(ControlError::ZeroStep)
    );
    assert_eq!(
        estimate_jacobian(&mut Blind, &Vector3::zeros(), 0.05, 1.0),
        Err(ControlError::TargetLostDuringProbe(0))
    );
}

fn matrix() -> impl Strategy<Value = Matrix2x3<f64>> {
    prop::array::uniform6(-1e3..1e3f64).prop_map(|a| Matrix2x3::from_row_slice(&a))
}

proptest! {
    #[test]
    fn gradient_is_attractive(x in -500.0..500.0f64, y in -500.0..500.0f64, literal: bool) {
        let p = ControlParams {
            potential: if literal { PotentialKind::Clamped } else { PotentialKind::Standard },
            ..params()
        };
        let r = err(x, y);
        let g = potential_gradient(&r, &p);
        // parallel with a non-negative factor
        prop_assert!((g.x * y - g.y * x).abs() <= 1e-9 * (1.0 + g.norm() * r.rho));
        prop_assert!(g.dot(&r.r) >= 0.0);
        if !literal {
            let expect = if r.rho < p.delta { p.gain * r.rho } else { p.gain * p.delta };
            prop_assert!((g.norm() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn moore_penrose_first_identity(m in matrix()) {
        let pinv = pseudo_inverse(&m);
        prop_assert!((m * pinv * m - m).abs().max() < 1e-8 * (1.0 + m.abs().max()));
    }

    #[test]
    fn centering_never_inserts(x in -700.0..700.0f64, y in -500.0..500.0f64, m in matrix(),
                                vx in -50.0..50.0f64, vy in -50.0..50.0f64) {
        let p = params();
        let c = ImagePoint::new(0.0, 0.0);
        let s = ControllerState { mode: Mode::Centering, v: Vector2::new(vx, vy), time_lost: 0.0 };
        let (q, next) = control_step(&s, Observation::Target(ImagePoint::new(x, y)), c, &p, &JacobianEstimate::new(m)).unwrap();
        let rho = (x * x + y * y).sqrt();
        if next.mode == Mode::Centering {
            prop_assert_eq!(q.z, 0.0);
        } else {
            // advancing only from inside the gate
            prop_assert_eq!(next.mode, Mode::Advancing);
            prop_assert!(rho < p.delta_c);
        }
        prop_assert!(next.v.iter().all(|v| v.is_finite()));
    }
}
