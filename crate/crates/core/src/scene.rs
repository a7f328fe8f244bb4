//! Planar table-top world: labelled boxes, a point effector and a single
//! suction slot.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, FrameSize, GeometryError, Point};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("object `{0}` lies outside the frame")]
    ObjectOutOfFrame(String),
    #[error("effector ({0}, {1}) lies outside the frame")]
    EffectorOutOfFrame(f64, f64),
    #[error("held object `{0}` is not in the scene")]
    UnknownHeld(String),
    #[error("non-finite move ({0}, {1})")]
    NonFiniteMove(f64, f64),
    #[error("object `{0}` not in scene")]
    UnknownObject(String),
    #[error("noise sigma must be nonnegative and finite")]
    BadNoise,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("scene file {path}: {reason}")]
    File { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub frame: FrameSize,
    pub objects: BTreeMap<String, BBox>,
    pub effector: Point,
    pub held: Option<String>,
    pub rng_seed: u64,
}

impl SceneState {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (label, b) in &self.objects {
            if !self.frame.contains_box(b) {
                return Err(SceneError::ObjectOutOfFrame(label.clone()));
            }
        }
        if !self.effector.is_finite() || !self.frame.contains(self.effector) {
            return Err(SceneError::EffectorOutOfFrame(
                self.effector.x,
                self.effector.y,
            ));
        }
        if let Some(h) = &self.held {
            if !self.objects.contains_key(h) {
                return Err(SceneError::UnknownHeld(h.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub actuation_sigma: f64,
    pub perception_sigma: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        actuation_sigma: 0.0,
        perception_sigma: 0.0,
    };

    fn validate(&self) -> Result<(), SceneError> {
        let ok = |s: f64| s >= 0.0 && s.is_finite();
        if ok(self.actuation_sigma) && ok(self.perception_sigma) {
            Ok(())
        } else {
            Err(SceneError::BadNoise)
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            actuation_sigma: 0.5,
            perception_sigma: 1.0,
        }
    }
}

/// Owner of a [`SceneState`] plus the seeded actuation noise stream.
#[derive(Debug, Clone)]
pub struct Scene {
    state: SceneState,
    noise: NoiseModel,
    rng: ChaCha8Rng,
    /// Injected fault: the suction cup never grips.
    pub suction_fault: bool,
}

impl Scene {
    pub fn new(state: SceneState, noise: NoiseModel) -> Result<Self, SceneError> {
        state.validate()?;
        noise.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
        Ok(Scene {
            state,
            noise,
            rng,
            suction_fault: false,
        })
    }

    pub fn state(&self) -> &SceneState {
        &self.state
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn effector(&self) -> Point {
        self.state.effector
    }

    pub fn held(&self) -> Option<&str> {
        self.state.held.as_deref()
    }

    pub fn object(&self, label: &str) -> Option<&BBox> {
        self.state.objects.get(label)
    }

    /// Translate the effector (and anything it holds) by the commanded step
    /// plus actuation noise, staying inside the frame.
    pub fn apply_move(&mut self, dx: f64, dy: f64) -> Result<(), SceneError> {
        if !(dx.is_finite() && dy.is_finite()) {
            return Err(SceneError::NonFiniteMove(dx, dy));
        }
        let (nx, ny) = if self.noise.actuation_sigma > 0.0 {
            let n = Normal::new(0.0, self.noise.actuation_sigma).expect("validated");
            (n.sample(&mut self.rng), n.sample(&mut self.rng))
        } else {
            (0.0, 0.0)
        };
        let frame = self.state.frame;
        let from = self.state.effector;
        let mut to = frame.clamp(Point::new(from.x + dx + nx, from.y + dy + ny));
        if let Some(label) = &self.state.held {
            let b = self.state.objects[label];
            // keep the carried box inside the frame too
            let mdx = (to.x - from.x).clamp(-b.x_min, frame.width - b.x_max);
            let mdy = (to.y - from.y).clamp(-b.y_min, frame.height - b.y_max);
            to = Point::new(from.x + mdx, from.y + mdy);
            let moved = b.translated(mdx, mdy);
            self.state.objects.insert(label.clone(), moved);
        }
        self.state.effector = to;
        Ok(())
    }

    pub(crate) fn attach(&mut self, label: &str) -> Result<(), SceneError> {
        if !self.state.objects.contains_key(label) {
            return Err(SceneError::UnknownObject(label.to_string()));
        }
        self.state.held = Some(label.to_string());
        Ok(())
    }

    pub(crate) fn release(&mut self) -> Option<String> {
        self.state.held.take()
    }

    pub fn snapshot(&self, trajectory: &[Point]) -> SceneSnapshot {
        SceneSnapshot {
            frame: self.state.frame,
            objects: self
                .state
                .objects
                .iter()
                .map(|(label, bbox)| LabelledBox {
                    label: label.clone(),
                    bbox: *bbox,
                })
                .collect(),
            effector: self.state.effector,
            held: self.state.held.clone(),
            trajectory: trajectory.to_vec(),
        }
    }
}

/// Free-function form of [`Scene::apply_move`].
pub fn apply_move(scene: &mut Scene, dx: f64, dy: f64) -> Result<(), SceneError> {
    scene.apply_move(dx, dy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledBox {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

/// Read-only view published to the gateway and UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub frame: FrameSize,
    pub objects: Vec<LabelledBox>,
    pub effector: Point,
    pub held: Option<String>,
    pub trajectory: Vec<Point>,
}

/// Scene setup file: objects, effector start and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSetup {
    #[serde(default)]
    pub frame: FrameSize,
    pub objects: Vec<LabelledBox>,
    pub effector: Point,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
}

impl SceneSetup {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::File {
            path: "<inline>".into(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let err = |reason: String| SceneError::File {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn state(&self) -> SceneState {
        SceneState {
            frame: self.frame,
            objects: self
                .objects
                .iter()
                .map(|o| (o.label.clone(), o.bbox))
                .collect(),
            effector: self.effector,
            held: None,
            rng_seed: self.seed,
        }
    }

    /// Build the scene, overriding the seed when one is given.
    pub fn build(&self, seed: Option<u64>) -> Result<Scene, SceneError> {
        let mut state = self.state();
        if let Some(s) = seed {
            state.rng_seed = s;
        }
        Scene::new(state, self.noise.unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGoal {
    pub point: Point,
    /// The raw goal would have pushed the moving box out of the frame.
    pub clipped: bool,
}

/// Where the center of `moving` must go so it sits beside `reference`,
/// `margin` pixels clear of its edge. Image y grows downward.
pub fn resolve_spatial_goal(
    relation: Relation,
    reference: &BBox,
    moving: &BBox,
    margin: f64,
    frame: FrameSize,
) -> SpatialGoal {
    let rc = reference.center();
    let (hw, hh) = (moving.width() / 2.0, moving.height() / 2.0);
    let raw = match relation {
        Relation::LeftOf => Point::new(reference.x_min - margin - hw, rc.y),
        Relation::RightOf => Point::new(reference.x_max + margin + hw, rc.y),
        Relation::Above => Point::new(rc.x, reference.y_min - margin - hh),
        Relation::Below => Point::new(rc.x, reference.y_max + margin + hh),
    };
    let point = Point::new(
        raw.x.clamp(
            hw.min(frame.width / 2.0),
            (frame.width - hw).max(frame.width / 2.0),
        ),
        raw.y.clamp(
            hh.min(frame.height / 2.0),
            (frame.height - hh).max(frame.height / 2.0),
        ),
    );
    SpatialGoal {
        point,
        clipped: point != raw,
    }
}
