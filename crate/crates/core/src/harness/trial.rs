//! One closed-loop trial: plant, camera, filter and controller stepped at
//! the control period, with every tick logged.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, HarnessError};
use crate::control::{
    control_step, estimate_jacobian, ControlError, ControllerState, FeatureSource,
    JacobianEstimate, Observation,
};
use crate::metrics::{
    centering_metrics, navigation_report, ntr, CenteringReport, NavigationReport, Sample, TrialLog,
    BAND, SET_POINT,
};
use crate::perception::{
    centroid, corrupt, filter_update, ImagePoint, NoiseConfig, PerceptionBackend, PerceptionError,
    TargetFilter, View,
};
use crate::plant::{
    forward_kinematics, step_actuators, Actuation, ActuatorState, InsertionFrame, TipPose,
};
use crate::world::{GoalPlane, PathKind, TubePhantom};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted(String),
    Collided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrialReport {
    Centering(CenteringReport),
    Navigation(NavigationReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_id: usize,
    pub seed: u64,
    pub log: TrialLog,
    pub report: Option<TrialReport>,
    pub outcome: Outcome,
}

/// Seed of trial `id`, independent of how many trials run.
pub fn trial_seed(master: u64, id: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id as u64 + 1);
    rng.next_u64()
}

/// Plant, phantom and perception for one trial.
pub struct Rig<'a> {
    cfg: &'a ExperimentConfig,
    pub phantom: TubePhantom,
    base: InsertionFrame,
    pub state: ActuatorState,
    backend: &'a mut dyn PerceptionBackend,
    filter: TargetFilter,
    noise_rng: ChaCha8Rng,
    pub center: ImagePoint,
}

impl<'a> Rig<'a> {
    pub fn new(
        cfg: &'a ExperimentConfig,
        phantom: TubePhantom,
        backend: &'a mut dyn PerceptionBackend,
        seed: u64,
    ) -> Self {
        let (cx, cy) = cfg.perception.camera.center();
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ cfg.noise.rng_seed);
        noise_rng.set_stream(1);
        backend.reset();
        Rig {
            cfg,
            phantom,
            base: InsertionFrame::tip_at_opening(&cfg.plant),
            state: ActuatorState::default(),
            backend,
            filter: TargetFilter::default(),
            noise_rng,
            center: ImagePoint::new(cx, cy),
        }
    }

    pub fn pose(&self, q: &Actuation) -> Option<TipPose> {
        forward_kinematics(&self.cfg.plant, q, &self.base).ok()
    }

    /// Wall clearance of the tip; a tip outside the tube ends has none.
    pub fn clearance(&self, pose: &TipPose) -> f64 {
        match self.phantom.radial_clearance(&pose.position) {
            Ok((_, c)) if self.phantom.contains(&pose.position) => c,
            Ok((_, c)) => c.min(0.0),
            Err(_) => 0.0,
        }
    }

    /// Raw lumen centroid seen from `pose`, after image corruption.
    pub fn detect(&mut self, pose: &TipPose) -> Result<Option<ImagePoint>, HarnessError> {
        let mask = self.backend.segment(&View {
            phantom: &self.phantom,
            pose: *pose,
        })?;
        let mask = if self.cfg.noise.is_clean() {
            mask
        } else {
            let noise = NoiseConfig {
                rng_seed: self.noise_rng.next_u64(),
                ..self.cfg.noise
            };
            corrupt(&mask, &noise)
        };
        match centroid(&mask) {
            Ok(p) => Ok(Some(p)),
            Err(PerceptionError::NoLumen) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Puts the actuators at rest at `q` and forgets the image history.
    pub fn place(&mut self, q: Actuation) {
        self.state = ActuatorState::at_rest(q);
        self.filter.clear();
        self.backend.reset();
    }

    fn probe(&mut self, q: &Actuation) -> Result<Option<ImagePoint>, HarnessError> {
        let Some(pose) = self.pose(q) else {
            return Ok(None);
        };
        if !self.phantom.contains(&pose.position) {
            return Ok(None);
        }
        self.backend.reset();
        // a clean image does not change while the robot holds still
        let frames = if self.cfg.noise.is_clean() {
            1
        } else {
            TargetFilter::WINDOW
        };
        let mut filter = TargetFilter::default();
        let mut out = None;
        for _ in 0..frames {
            if let Some(p) = self.detect(&pose)? {
                out = Some(filter_update(&mut filter, p));
            }
        }
        Ok(out)
    }

    pub fn estimate_jacobian(&mut self, q0: Actuation) -> Result<JacobianEstimate, HarnessError> {
        let c = &self.cfg.control;
        let (step, insertion) = (c.jac_step, c.insertion_probe_step);
        let mut source = ProbeSource {
            rig: self,
            error: None,
        };
        let result = estimate_jacobian(&mut source, &q0, step, insertion);
        if let Some(e) = source.error {
            return Err(e);
        }
        self.place(q0);
        Ok(result?)
    }
}

struct ProbeSource<'r, 'a> {
    rig: &'r mut Rig<'a>,
    error: Option<HarnessError>,
}

impl FeatureSource for ProbeSource<'_, '_> {
    fn feature_at(&mut self, q: &Actuation) -> Option<ImagePoint> {
        if self.error.is_some() {
            return None;
        }
        match self.rig.probe(q) {
            Ok(p) => p,
            Err(e) => {
                self.error = Some(e);
                None
            }
        }
    }
}

/// What ends a run early with success.
enum Goal {
    /// Stay inside the response band for this many consecutive ticks.
    Settle {
        ticks: usize,
    },
    Plane(GoalPlane),
}

struct LoopEnd {
    samples: Vec<Sample>,
    outcome: Outcome,
}

fn run_loop(
    rig: &mut Rig<'_>,
    jac: &JacobianEstimate,
    insertion: bool,
    goal: Goal,
    timeout: f64,
) -> Result<LoopEnd, HarnessError> {
    let params = rig.cfg.control;
    let dt = params.dt;
    let max_ticks = (timeout / dt).round() as usize;
    let mut ctl = ControllerState::default();
    let mut samples = Vec::with_capacity(max_ticks.min(10_000) + 1);
    let mut rho0 = None;
    let mut settled = 0usize;
    for k in 0..=max_ticks {
        let t = k as f64 * dt;
        let q = rig.state.q;
        let pose = rig
            .pose(&q)
            .expect("actuator limits are enforced by the plant");
        let clearance = rig.clearance(&pose);
        let mut sample = Sample {
            t,
            q,
            q_dot: rig.state.q_dot,
            tip: pose.position,
            p: None,
            p_hat: rig.filter.output(),
            rho: None,
            v: ctl.v,
            mode: ctl.mode,
            clearance,
        };
        if clearance <= 0.0 {
            samples.push(sample);
            return Ok(LoopEnd {
                samples,
                outcome: Outcome::Collided,
            });
        }
        let p = rig.detect(&pose)?;
        let observation = match p {
            Some(p) => Observation::Target(filter_update(&mut rig.filter, p)),
            None => Observation::NoTarget,
        };
        sample.p = p;
        sample.p_hat = rig.filter.output();
        sample.rho = sample
            .p_hat
            .map(|h| (h.x - rig.center.x).hypot(h.y - rig.center.y));
        let step = control_step(&ctl, observation, rig.center, &params, jac);
        let (mut command, next) = match step {
            Ok(x) => x,
            Err(ControlError::Aborted(_)) => {
                samples.push(sample);
                return Ok(LoopEnd {
                    samples,
                    outcome: Outcome::Aborted("target lost".into()),
                });
            }
            Err(e) => return Err(e.into()),
        };
        ctl = next;
        sample.v = ctl.v;
        sample.mode = ctl.mode;
        if !insertion {
            command.z = 0.0;
        }
        samples.push(sample);
        let done = match &goal {
            Goal::Plane(plane) => plane.crossed(&pose.position),
            Goal::Settle { ticks } => {
                if let Some(rho) = sample.rho {
                    let r0 = *rho0.get_or_insert(rho);
                    let n = (r0 - rho) / r0;
                    if (n - SET_POINT).abs() <= BAND {
                        settled += 1;
                    } else {
                        settled = 0;
                    }
                }
                settled >= *ticks
            }
        };
        if done {
            return Ok(LoopEnd {
                samples,
                outcome: Outcome::Completed,
            });
        }
        rig.state = step_actuators(&rig.state, &command, dt, &rig.cfg.plant);
    }
    Ok(LoopEnd {
        samples,
        outcome: Outcome::Aborted("timeout".into()),
    })
}

fn finish(rig: &Rig<'_>, kind: PathKind, end: LoopEnd) -> (TrialLog, Outcome) {
    let log = TrialLog {
        dt: rig.cfg.control.dt,
        path: kind,
        center: rig.center,
        samples: end.samples,
    };
    let outcome = if log.collided() {
        Outcome::Collided
    } else {
        end.outcome
    };
    (log, outcome)
}

/// Bend plane and angle tried when looking for a centering start.
const START_BEND_STEP: f64 = 0.005;
const START_ATTEMPTS: usize = 16;

/// Grows the bend in plane `phi` until the detected target lies at least
/// `initial_rho` from the image center.
fn centering_candidate(rig: &mut Rig<'_>, phi: f64) -> Result<Option<Actuation>, HarnessError> {
    let cfg = rig.cfg;
    let x = &cfg.experiment;
    let max_bend = cfg.plant.bend_per_rev() * (cfg.plant.motor_max_travel - cfg.plant.dead_zone);
    let mut theta = START_BEND_STEP;
    while theta <= max_bend {
        let (q1, q2) = cfg.plant.motors_for_bend(theta, phi);
        let q = Actuation::new(q1, q2, x.centering_insertion);
        let Some(pose) = rig.pose(&q) else { break };
        if rig.clearance(&pose) <= 0.0 {
            break;
        }
        rig.backend.reset();
        match rig.detect(&pose)? {
            Some(p) if (p.x - rig.center.x).hypot(p.y - rig.center.y) >= x.initial_rho => {
                return Ok(Some(q))
            }
            Some(_) => theta += START_BEND_STEP,
            None => break,
        }
    }
    Ok(None)
}

/// Random bend plane, then a bend far enough out. Planes where no bend
/// works, or where a Jacobian probe would lose the target, are redrawn.
fn centering_start(
    rig: &mut Rig<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<(Actuation, JacobianEstimate), HarnessError> {
    for _ in 0..START_ATTEMPTS {
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let Some(q0) = centering_candidate(rig, phi)? else {
            continue;
        };
        match rig.estimate_jacobian(q0) {
            Ok(j) => return Ok((q0, j)),
            Err(HarnessError::Control(ControlError::TargetLostDuringProbe(_))) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(HarnessError::InfeasibleStart(format!(
        "no bend puts the target {} px from the center with room to probe",
        rig.cfg.experiment.initial_rho
    )))
}

pub fn run_centering_trial(
    cfg: &ExperimentConfig,
    backend: &mut dyn PerceptionBackend,
    trial_id: usize,
) -> Result<TrialResult, HarnessError> {
    let kind = cfg.path_kind()?;
    let seed = trial_seed(cfg.experiment.rng_seed, trial_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rig = Rig::new(cfg, cfg.phantom(kind)?, backend, seed);
    let (q0, jac) = centering_start(&mut rig, &mut rng)?;
    rig.place(q0);
    let ticks = (cfg.experiment.settle_hold / cfg.control.dt)
        .round()
        .max(1.0) as usize;
    let end = run_loop(
        &mut rig,
        &jac,
        false,
        Goal::Settle { ticks },
        cfg.experiment.centering_timeout,
    )?;
    let (log, outcome) = finish(&rig, kind, end);
    let report = ntr(&log)
        .and_then(|s| centering_metrics(&s))
        .ok()
        .map(TrialReport::Centering);
    Ok(TrialResult {
        trial_id,
        seed,
        log,
        report,
        outcome,
    })
}

/// Random bend at the opening: angle uniform up to `start_max_bend`, plane
/// uniform, stage set so the tip sits `start_depth` inside the tube.
fn navigation_start(rig: &Rig<'_>, rng: &mut ChaCha8Rng) -> Result<Actuation, HarnessError> {
    let cfg = rig.cfg;
    let x = &cfg.experiment;
    let theta = rng.gen_range(0.0..=x.start_max_bend);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let (q1, q2) = cfg.plant.motors_for_bend(theta, phi);
    let at_zero = rig.pose(&Actuation::new(q1, q2, 0.0)).ok_or_else(|| {
        HarnessError::InfeasibleStart("start bend exceeds the motor travel".into())
    })?;
    let q3 = x.start_depth - at_zero.position.z;
    let q = Actuation::new(q1, q2, q3);
    match rig.pose(&q) {
        Some(pose) if rig.phantom.contains(&pose.position) => Ok(q),
        _ => Err(HarnessError::InfeasibleStart(
            "start pose is outside the tube".into(),
        )),
    }
}

pub fn run_navigation_trial(
    cfg: &ExperimentConfig,
    backend: &mut dyn PerceptionBackend,
    trial_id: usize,
) -> Result<TrialResult, HarnessError> {
    let kind = cfg.path_kind()?;
    let seed = trial_seed(cfg.experiment.rng_seed, trial_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rig = Rig::new(cfg, cfg.phantom(kind)?, backend, seed);
    let q0 = navigation_start(&rig, &mut rng)?;
    let jac = match rig.estimate_jacobian(q0) {
        Ok(j) => j,
        Err(HarnessError::Control(e)) => {
            return Ok(aborted(&rig, kind, trial_id, seed, e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let goal = GoalPlane::at_depth(cfg.experiment.goal_depth);
    let end = run_loop(
        &mut rig,
        &jac,
        true,
        Goal::Plane(goal),
        cfg.experiment.navigation_timeout,
    )?;
    let (log, outcome) = finish(&rig, kind, end);
    let report = navigation_report(&log, rig.phantom.path(), &goal, &cfg.spectral)
        .ok()
        .map(TrialReport::Navigation);
    Ok(TrialResult {
        trial_id,
        seed,
        log,
        report,
        outcome,
    })
}

fn aborted(
    rig: &Rig<'_>,
    kind: PathKind,
    trial_id: usize,
    seed: u64,
    reason: String,
) -> TrialResult {
    TrialResult {
        trial_id,
        seed,
        log: TrialLog {
            dt: rig.cfg.control.dt,
            path: kind,
            center: rig.center,
            samples: Vec::new(),
        },
        report: None,
        outcome: Outcome::Aborted(reason),
    }
}
