//! Runs validated calls against the simulated arm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commands::{CommandRegistry, Primitive, QueuedCall};
use crate::geometry::Point;
use crate::grammar::ActionCall;
use crate::perception::{ObjectPositionMap, PoseProvider};
use crate::scene::{resolve_spatial_goal, Relation, Scene};
use crate::servo::{Servo, ServoError, TrajectoryRecord};

/// Label under which the user's hand is detected.
pub const HAND_LABEL: &str = "hand";
pub const DEFAULT_MARGIN: f64 = 10.0;
/// Simulated seconds for the suction cup to grip or let go.
pub const SUCTION_TIME: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecFailure {
    #[error("object not detected: {0}")]
    NotDetected(String),
    #[error("gripper occupied by {0}")]
    GripperOccupied(String),
    #[error("servo did not converge")]
    NoConvergence,
    #[error("grasp failed on {0}")]
    GraspFailed(String),
    #[error("invalid coordinates ({0}, {1})")]
    InvalidCoordinates(String, String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("`{method}` expects {expected} arguments")]
    Arity { method: String, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub success: bool,
    pub failure: Option<ExecFailure>,
    /// Simulated seconds spent moving and gripping.
    pub elapsed: f64,
    pub servo_iterations: usize,
    pub trajectory: Vec<Point>,
    /// A spatial goal had to be pulled back inside the frame.
    pub goal_clipped: bool,
}

impl ExecOutcome {
    fn new() -> Self {
        ExecOutcome {
            success: true,
            failure: None,
            elapsed: 0.0,
            servo_iterations: 0,
            trajectory: vec![],
            goal_clipped: false,
        }
    }

    fn fail(mut self, f: ExecFailure) -> Self {
        self.success = false;
        self.failure = Some(f);
        self
    }
}

pub struct Executor<'a> {
    pub servo: &'a Servo,
    pub margin: f64,
}

struct Run<'s, 'p, 'f> {
    servo: &'s Servo,
    scene: &'s mut Scene,
    poses: &'p mut dyn PoseProvider,
    on_tick: &'f mut dyn FnMut(&TrajectoryRecord),
    start: f64,
    out: ExecOutcome,
}

impl Run<'_, '_, '_> {
    fn now(&self) -> f64 {
        self.start + self.out.elapsed
    }

    fn go(&mut self, target: Point) -> Result<bool, ServoError> {
        let now = self.now();
        let o = self
            .servo
            .servo_to(target, self.scene, self.poses, now, self.on_tick)?;
        self.out.elapsed += o.elapsed;
        self.out.servo_iterations += o.iterations;
        let skip = usize::from(!self.out.trajectory.is_empty());
        self.out
            .trajectory
            .extend(o.trajectory.into_iter().skip(skip));
        Ok(o.converged)
    }

    /// Servo onto the detected box and grip. Returns the effector offset
    /// from the detected center at the moment of the grasp.
    fn pick(
        &mut self,
        label: &str,
        p: &ObjectPositionMap,
    ) -> Result<Result<Point, ExecFailure>, ServoError> {
        if let Some(h) = self.scene.held() {
            return Ok(Err(ExecFailure::GripperOccupied(h.to_string())));
        }
        let Some(seen) = p.get(label) else {
            return Ok(Err(ExecFailure::NotDetected(label.to_string())));
        };
        let center = seen.center();
        if !self.go(center)? {
            return Ok(Err(ExecFailure::NoConvergence));
        }
        self.out.elapsed += SUCTION_TIME;
        let eff = self.scene.effector();
        let touching = self.scene.object(label).is_some_and(|b| b.contains(eff));
        if !touching || self.scene.suction_fault {
            return Ok(Err(ExecFailure::GraspFailed(label.to_string())));
        }
        self.scene.attach(label).expect("object exists");
        Ok(Ok(Point::new(eff.x - center.x, eff.y - center.y)))
    }

    /// Pick `label` unless it is already in the gripper.
    fn ensure_held(
        &mut self,
        label: &str,
        p: &ObjectPositionMap,
    ) -> Result<Result<Point, ExecFailure>, ServoError> {
        if self.scene.held() == Some(label) {
            let b = self.scene.object(label).expect("held object exists");
            let (eff, c) = (self.scene.effector(), b.center());
            return Ok(Ok(Point::new(eff.x - c.x, eff.y - c.y)));
        }
        self.pick(label, p)
    }

    fn carry(&mut self, goal: Point, offset: Point) -> Result<Option<ExecFailure>, ServoError> {
        if !self.go(Point::new(goal.x + offset.x, goal.y + offset.y))? {
            return Ok(Some(ExecFailure::NoConvergence));
        }
        self.out.elapsed += SUCTION_TIME;
        self.scene.release();
        Ok(None)
    }
}

impl<'a> Executor<'a> {
    pub fn new(servo: &'a Servo) -> Self {
        Executor {
            servo,
            margin: DEFAULT_MARGIN,
        }
    }

    /// Resolve a raw call through `registry` and run it.
    pub fn execute_call(
        &self,
        scene: &mut Scene,
        call: &ActionCall,
        registry: &CommandRegistry,
        p: &ObjectPositionMap,
        poses: &mut dyn PoseProvider,
        start: f64,
        on_tick: &mut dyn FnMut(&TrajectoryRecord),
    ) -> Result<ExecOutcome, ServoError> {
        let Some(spec) = registry.get(&call.method) else {
            return Ok(ExecOutcome::new().fail(ExecFailure::UnknownMethod(call.method.clone())));
        };
        let q = QueuedCall {
            call: call.clone(),
            primitive: spec.primitive,
        };
        self.execute(scene, &q, p, poses, start, on_tick)
    }

    /// Run one primitive. Errors are reserved for broken plumbing (stale
    /// pose feed, invalid scene); task-level failures come back in the
    /// outcome.
    pub fn execute(
        &self,
        scene: &mut Scene,
        q: &QueuedCall,
        p: &ObjectPositionMap,
        poses: &mut dyn PoseProvider,
        start: f64,
        on_tick: &mut dyn FnMut(&TrajectoryRecord),
    ) -> Result<ExecOutcome, ServoError> {
        let args = &q.call.args;
        let expected = match q.primitive {
            Primitive::PickUp | Primitive::HandOver => 1,
            Primitive::MoveRelative(_) => 2,
            Primitive::PlaceAt => 3,
        };
        if args.len() != expected {
            return Ok(ExecOutcome::new().fail(ExecFailure::Arity {
                method: q.call.method.clone(),
                expected,
            }));
        }
        let mut run = Run {
            servo: self.servo,
            scene,
            poses,
            on_tick,
            start,
            out: ExecOutcome::new(),
        };
        let failure = match q.primitive {
            Primitive::PickUp => run.pick(&args[0], p)?.err(),
            Primitive::HandOver => hand_over(&mut run, &args[0], p)?,
            Primitive::MoveRelative(rel) => {
                self.move_relative(&mut run, rel, &args[0], &args[1], p)?
            }
            Primitive::PlaceAt => place_at(&mut run, &args[0], &args[1], &args[2], p)?,
        };
        let out = std::mem::replace(&mut run.out, ExecOutcome::new());
        Ok(match failure {
            Some(f) => out.fail(f),
            None => out,
        })
    }

    fn move_relative(
        &self,
        run: &mut Run,
        rel: Relation,
        moving: &str,
        reference: &str,
        p: &ObjectPositionMap,
    ) -> Result<Option<ExecFailure>, ServoError> {
        let (Some(mb), Some(rb)) = (p.get(moving), p.get(reference)) else {
            let missing = if p.contains(moving) {
                reference
            } else {
                moving
            };
            return Ok(Some(ExecFailure::NotDetected(missing.to_string())));
        };
        let offset = match run.ensure_held(moving, p)? {
            Ok(o) => o,
            Err(f) => return Ok(Some(f)),
        };
        let frame = run.scene.state().frame;
        let goal = resolve_spatial_goal(rel, rb, mb, self.margin, frame);
        run.out.goal_clipped = goal.clipped;
        run.carry(goal.point, offset)
    }
}

fn hand_over(
    run: &mut Run,
    label: &str,
    p: &ObjectPositionMap,
) -> Result<Option<ExecFailure>, ServoError> {
    let Some(hand) = p.get(HAND_LABEL) else {
        return Ok(Some(ExecFailure::NotDetected(HAND_LABEL.to_string())));
    };
    let offset = match run.ensure_held(label, p)? {
        Ok(o) => o,
        Err(f) => return Ok(Some(f)),
    };
    run.carry(hand.center(), offset)
}

fn place_at(
    run: &mut Run,
    label: &str,
    x: &str,
    y: &str,
    p: &ObjectPositionMap,
) -> Result<Option<ExecFailure>, ServoError> {
    let goal = match (x.trim().parse::<f64>(), y.trim().parse::<f64>()) {
        (Ok(gx), Ok(gy)) if gx.is_finite() && gy.is_finite() => Point::new(gx, gy),
        _ => return Ok(Some(ExecFailure::InvalidCoordinates(x.into(), y.into()))),
    };
    if !p.contains(label) && run.scene.held() != Some(label) {
        return Ok(Some(ExecFailure::NotDetected(label.to_string())));
    }
    let offset = match run.ensure_held(label, p)? {
        Ok(o) => o,
        Err(f) => return Ok(Some(f)),
    };
    run.carry(goal, offset)
}
