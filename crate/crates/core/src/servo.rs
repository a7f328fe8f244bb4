//! Closed-loop positional servoing on pixel error.
//!
//! Each axis runs through the same single-input fuzzy controller. The crisp
//! output is scaled by a distance-dependent gain, clamped, and suppressed
//! entirely inside the dead zone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{
    Clause, FuzzyError, It2FuzzySystem, LinguisticVariable, Rule, Universe, STANDARD_LABELS,
};
use crate::geometry::Point;
use crate::perception::{PerceptionError, PoseProvider};
use crate::scene::{Scene, SceneError};

pub const ERROR_VARIABLE: &str = "error";
pub const CORRECTION_VARIABLE: &str = "correction";

/// Seconds per control tick (camera pose rate).
pub const CONTROL_PERIOD: f64 = 1.0 / 30.0;

#[derive(Debug, Error)]
pub enum ServoError {
    #[error("non-finite error ({0}, {1})")]
    NonFiniteError(f64, f64),
    #[error("invalid servo config: {0}")]
    Config(String),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoConfig {
    pub dead_zone: f64,
    pub gain_near: f64,
    pub gain_far: f64,
    pub gain_knee: f64,
    pub max_iters: usize,
    pub step_clamp: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        ServoConfig {
            dead_zone: 5.0,
            gain_near: 0.3,
            gain_far: 1.0,
            gain_knee: 60.0,
            max_iters: 200,
            step_clamp: 25.0,
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<(), ServoError> {
        let fail = |m: &str| Err(ServoError::Config(m.to_string()));
        if !(self.dead_zone >= 0.0) {
            return fail("dead_zone must be nonnegative");
        }
        if !(self.gain_near > 0.0 && self.gain_far > 0.0 && self.gain_knee > 0.0) {
            return fail("gains and knee must be positive");
        }
        if self.gain_near > self.gain_far {
            return fail("gain_near must not exceed gain_far");
        }
        if self.dead_zone >= self.gain_knee {
            return fail("dead_zone must be below gain_knee");
        }
        if self.max_iters == 0 || !(self.step_clamp > 0.0) {
            return fail("max_iters and step_clamp must be positive");
        }
        Ok(())
    }

    /// Step gain at error distance `d`: linear ramp up to the knee, flat after.
    pub fn gain(&self, d: f64) -> f64 {
        self.gain_near + (self.gain_far - self.gain_near) * (d / self.gain_knee).min(1.0)
    }
}

/// Single-axis controller: eleven error terms, each mapped to the mirrored
/// correction term (negative error pushes positive).
pub fn axis_system(sigma: f64, spread: f64) -> Result<It2FuzzySystem, FuzzyError> {
    let u = Universe::default();
    let input = LinguisticVariable::standard(ERROR_VARIABLE, u, sigma, spread)?;
    let output = LinguisticVariable::standard(CORRECTION_VARIABLE, u, sigma, spread)?;
    let n = STANDARD_LABELS.len();
    let rules = (0..n)
        .map(|i| {
            Rule::new(
                vec![Clause::new(ERROR_VARIABLE, STANDARD_LABELS[i])],
                Clause::new(CORRECTION_VARIABLE, STANDARD_LABELS[n - 1 - i]),
            )
        })
        .collect();
    It2FuzzySystem::new(vec![input], vec![output], rules)
}

/// The default axis controller: sigma 10, center spread 2.
pub fn default_axis_system() -> It2FuzzySystem {
    axis_system(10.0, 2.0).expect("default axis system is valid")
}

/// Corrective step for an effector-minus-target error.
pub fn compute_step(
    error_x: f64,
    error_y: f64,
    system: &It2FuzzySystem,
    cfg: &ServoConfig,
) -> Result<(f64, f64), ServoError> {
    if !(error_x.is_finite() && error_y.is_finite()) {
        return Err(ServoError::NonFiniteError(error_x, error_y));
    }
    let d = error_x.hypot(error_y);
    if d <= cfg.dead_zone {
        return Ok((0.0, 0.0));
    }
    let g = cfg.gain(d);
    let axis = |e: f64| -> Result<f64, ServoError> {
        if e == 0.0 {
            return Ok(0.0);
        }
        let out = system.evaluate_scalar(e)?;
        Ok((g * out).clamp(-cfg.step_clamp, cfg.step_clamp))
    };
    Ok((axis(error_x)?, axis(error_y)?))
}

/// One control tick, as exported for plotting and the event stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    /// Observed (possibly noisy) effector position.
    pub pose: Point,
    /// Norm of the observed error.
    pub error: f64,
    pub step: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServoOutcome {
    pub converged: bool,
    /// Movement steps taken.
    pub iterations: usize,
    /// Ground-truth effector positions, starting point first.
    pub trajectory: Vec<Point>,
    /// Observed error norm when the loop stopped.
    pub final_error: f64,
    /// Simulated seconds spent (ticks × control period).
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct Servo {
    system: It2FuzzySystem,
    cfg: ServoConfig,
}

impl Default for Servo {
    fn default() -> Self {
        Servo {
            system: default_axis_system(),
            cfg: ServoConfig::default(),
        }
    }
}

impl Servo {
    pub fn new(system: It2FuzzySystem, cfg: ServoConfig) -> Result<Self, ServoError> {
        cfg.validate()?;
        if system.inputs().len() != 1 || system.outputs().len() != 1 {
            return Err(ServoError::Config(
                "axis controller must have one input and one output".into(),
            ));
        }
        Ok(Servo { system, cfg })
    }

    pub fn config(&self) -> &ServoConfig {
        &self.cfg
    }

    pub fn system(&self) -> &It2FuzzySystem {
        &self.system
    }

    pub fn step(&self, error_x: f64, error_y: f64) -> Result<(f64, f64), ServoError> {
        compute_step(error_x, error_y, &self.system, &self.cfg)
    }

    /// Drive the effector until the observed error is inside the dead zone
    /// or `max_iters` moves have been made. Exhausting the budget is
    /// reported through `converged = false`, not as an error.
    pub fn servo_to(
        &self,
        target: Point,
        scene: &mut Scene,
        poses: &mut dyn PoseProvider,
        start_time: f64,
        on_tick: &mut dyn FnMut(&TrajectoryRecord),
    ) -> Result<ServoOutcome, ServoError> {
        let target = scene.state().frame.clamp(target);
        let mut trajectory = vec![scene.effector()];
        let mut now = start_time;
        let mut iteration = 0;
        loop {
            let pose = poses.latest(scene.state(), now)?;
            let ex = pose.position.x - target.x;
            let ey = pose.position.y - target.y;
            let error = ex.hypot(ey);
            let step = self.step(ex, ey)?;
            on_tick(&TrajectoryRecord {
                iteration,
                pose: pose.position,
                error,
                step,
            });
            let settled = step == (0.0, 0.0) && error <= self.cfg.dead_zone;
            if settled || iteration == self.cfg.max_iters {
                return Ok(ServoOutcome {
                    converged: settled,
                    iterations: iteration,
                    trajectory,
                    final_error: error,
                    elapsed: now - start_time,
                });
            }
            scene.apply_move(step.0, step.1)?;
            trajectory.push(scene.effector());
            iteration += 1;
            now += CONTROL_PERIOD;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameSize;
    use crate::perception::SimPoseProvider;
    use crate::scene::{NoiseModel, SceneState};
    use std::collections::BTreeMap;

    fn scene_at(p: Point) -> Scene {
        Scene::new(
            SceneState {
                frame: FrameSize::default(),
                objects: BTreeMap::new(),
                effector: p,
                held: None,
                rng_seed: 0,
            },
            NoiseModel::NONE,
        )
        .unwrap()
    }

    #[test]
    fn dead_zone_is_quiet() {
        let s = default_axis_system();
        let cfg = ServoConfig::default();
        assert_eq!(compute_step(0.0, 0.0, &s, &cfg).unwrap(), (0.0, 0.0));
        assert_eq!(compute_step(3.0, -4.0, &s, &cfg).unwrap(), (0.0, 0.0));
        assert_ne!(compute_step(3.0, -4.01, &s, &cfg).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn negative_x_error_moves_positive() {
        let s = default_axis_system();
        let (dx, dy) = compute_step(-40.0, 0.0, &s, &ServoConfig::default()).unwrap();
        assert!(dx > 0.0);
        assert_eq!(dy, 0.0);
    }

    #[test]
    fn opposite_errors_give_opposite_steps() {
        let s = default_axis_system();
        let cfg = ServoConfig::default();
        for (ex, ey) in [(12.0, -7.0), (150.0, 30.0), (-3.0, 90.0)] {
            let (a, b) = compute_step(ex, ey, &s, &cfg).unwrap();
            let (c, d) = compute_step(-ex, -ey, &s, &cfg).unwrap();
            assert!((a + c).abs() < 1e-9 && (b + d).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let s = default_axis_system();
        assert!(matches!(
            compute_step(f64::INFINITY, 0.0, &s, &ServoConfig::default()),
            Err(ServoError::NonFiniteError(..))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = ServoConfig::default();
        c.gain_near = 2.0;
        assert!(c.validate().is_err());
        let mut c = ServoConfig::default();
        c.dead_zone = 70.0;
        assert!(c.validate().is_err());
        assert!(ServoConfig::default().validate().is_ok());
    }

    #[test]
    fn already_at_target() {
        let servo = Servo::default();
        let mut scene = scene_at(Point::new(300.0, 200.0));
        let mut poses = SimPoseProvider::new(0.0, 1);
        let out = servo
            .servo_to(
                Point::new(300.0, 200.0),
                &mut scene,
                &mut poses,
                0.0,
                &mut |_| {},
            )
            .unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.trajectory.len(), 1);
    }

    #[test]
    fn noise_free_error_strictly_decreases() {
        let servo = Servo::default();
        let target = Point::new(80.0, 60.0);
        let mut scene = scene_at(Point::new(0.0, 0.0));
        let mut poses = SimPoseProvider::new(0.0, 1);
        let mut records = vec![];
        let out = servo
            .servo_to(target, &mut scene, &mut poses, 0.0, &mut |r| {
                records.push(*r)
            })
            .unwrap();
        assert!(out.converged);
        assert!(out.final_error <= 5.0);
        assert_eq!(records.len(), out.iterations + 1);
        let errs: Vec<f64> = out.trajectory.iter().map(|p| p.distance(target)).collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn noisy_pose_converges_within_twice_noise_free() {
        let servo = Servo::default();
        let start = Point::new(0.0, 0.0);
        let target = Point::new(80.0, 60.0);
        let mut scene = scene_at(start);
        let clean = servo
            .servo_to(
                target,
                &mut scene,
                &mut SimPoseProvider::new(0.0, 0),
                0.0,
                &mut |_| {},
            )
            .unwrap();
        let budget = 2 * clean.iterations;
        let converged = (0..100u64)
            .filter(|&seed| {
                let mut scene = scene_at(start);
                let mut poses = SimPoseProvider::new(2.0, seed);
                let out = servo
                    .servo_to(target, &mut scene, &mut poses, 0.0, &mut |_| {})
                    .unwrap();
                out.converged && out.iterations <= budget
            })
            .count();
        assert!(converged >= 95, "{converged}/100 (budget {budget})");
    }

    #[test]
    fn exhausting_budget_is_not_an_error() {
        let cfg = ServoConfig {
            max_iters: 3,
            ..ServoConfig::default()
        };
        let servo = Servo::new(default_axis_system(), cfg).unwrap();
        let mut scene = scene_at(Point::new(0.0, 0.0));
        let out = servo
            .servo_to(
                Point::new(1000.0, 700.0),
                &mut scene,
                &mut SimPoseProvider::new(0.0, 0),
                0.0,
                &mut |_| {},
            )
            .unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert_eq!(out.trajectory.len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn steps_bounded_and_signed(ex in -400.0f64..400.0, ey in -400.0f64..400.0) {
                let s = default_axis_system();
                let cfg = ServoConfig::default();
                let (dx, dy) = compute_step(ex, ey, &s, &cfg).unwrap();
                prop_assert!(dx.abs() <= cfg.step_clamp && dy.abs() <= cfg.step_clamp);
                if ex.hypot(ey) > cfg.dead_zone {
                    if ex.abs() > cfg.dead_zone { prop_assert_eq!(dx.signum(), -ex.signum()); }
                    if ey.abs() > cfg.dead_zone { prop_assert_eq!(dy.signum(), -ey.signum()); }
                } else {
                    prop_assert_eq!((dx, dy), (0.0, 0.0));
                }
            }

            #[test]
            fn larger_error_never_smaller_step(
                angle in 0.0f64..std::f64::consts::TAU,
                d1 in 5.01f64..300.0,
                extra in 0.0f64..300.0,
            ) {
                let s = default_axis_system();
                let cfg = ServoConfig::default();
                let d2 = d1 + extra;
                let (c, sn) = (angle.cos(), angle.sin());
                let a = compute_step(d1 * c, d1 * sn, &s, &cfg).unwrap();
                let b = compute_step(d2 * c, d2 * sn, &s, &cfg).unwrap();
                prop_assert!(a.0.hypot(a.1) <= b.0.hypot(b.1) + 1e-9);
            }
        }
    }
}
