//! Object localization and end-effector pose.
//!
//! Detection goes through the [`Detector`] trait one label at a time, the
//! way open-vocabulary detectors are prompted. [`MockDetector`] answers from
//! simulator ground truth with seeded noise; an HTTP client lives in
//! [`crate::external`].

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::geometry::{bbox_center, BBox, FrameSize, Point};
use crate::scene::SceneState;

/// Task tag prefixed to every detection prompt.
pub const OPEN_VOCABULARY_TASK: &str = "<OPEN_VOCABULARY_DETECTION>";

/// Poses older than this (seconds) are refused.
pub const STALENESS_LIMIT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("no labels to query")]
    EmptyQuery,
    #[error("pose is stale: last update {age:.3} s ago (limit {limit} s)")]
    StalePose { age: f64, limit: f64 },
    #[error("no pose has been published yet")]
    NoPose,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("detector failed for `{label}`: {reason}")]
pub struct DetectorError {
    pub label: String,
    pub reason: String,
}

pub fn detection_prompt(label: &str) -> String {
    format!("{OPEN_VOCABULARY_TASK} {label}")
}

/// Identifies the camera frame a query runs against.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameRef {
    pub frame_id: u64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionQuery {
    pub frame: FrameRef,
    pub label: String,
    pub prompt: String,
}

impl DetectionQuery {
    pub fn new(frame: FrameRef, label: &str) -> Self {
        DetectionQuery {
            frame,
            label: label.to_string(),
            prompt: detection_prompt(label),
        }
    }
}

pub trait Detector {
    /// `Ok(None)` means the detector ran and found nothing.
    fn detect(&self, query: &DetectionQuery) -> Result<Option<BBox>, DetectorError>;
}

/// Label → box. Re-inserting a label replaces its box.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectPositionMap(BTreeMap<String, BBox>);

impl ObjectPositionMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, bbox: BBox) {
        self.0.insert(label.into(), bbox);
    }

    pub fn get(&self, label: &str) -> Option<&BBox> {
        self.0.get(label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BBox)> {
        self.0.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

impl FromIterator<(String, BBox)> for ObjectPositionMap {
    fn from_iter<T: IntoIterator<Item = (String, BBox)>>(iter: T) -> Self {
        ObjectPositionMap(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub objects: ObjectPositionMap,
    /// Labels whose query errored, with the reason.
    pub failures: BTreeMap<String, String>,
    pub queries: usize,
}

/// Query each distinct label separately and merge the hits.
pub fn query_objects(
    labels: &[impl AsRef<str>],
    detector: &dyn Detector,
    frame: FrameRef,
) -> Result<DetectionReport, PerceptionError> {
    if labels.is_empty() {
        return Err(PerceptionError::EmptyQuery);
    }
    let mut report = DetectionReport::default();
    let mut seen = BTreeSet::new();
    for label in labels.iter().map(AsRef::as_ref) {
        if !seen.insert(label) {
            continue;
        }
        report.queries += 1;
        match detector.detect(&DetectionQuery::new(frame, label)) {
            Ok(Some(bbox)) => report.objects.insert(label, bbox),
            Ok(None) => {}
            Err(e) => {
                log::warn!("{e}");
                report.failures.insert(label.to_string(), e.reason);
            }
        }
    }
    Ok(report)
}

/// Detector backed by simulator ground truth.
///
/// Each label's noise stream is seeded from `(seed, label, frame_id)` only,
/// so querying one label never perturbs another's answer.
#[derive(Debug, Clone)]
pub struct MockDetector {
    objects: BTreeMap<String, BBox>,
    frame: FrameSize,
    sigma: f64,
    seed: u64,
    /// Labels the detector pretends not to see.
    pub blind_to: BTreeSet<String>,
    /// Labels whose query errors out.
    pub failing: BTreeSet<String>,
}

impl MockDetector {
    pub fn new(objects: BTreeMap<String, BBox>, frame: FrameSize, sigma: f64, seed: u64) -> Self {
        MockDetector {
            objects,
            frame,
            sigma: sigma.max(0.0),
            seed,
            blind_to: BTreeSet::new(),
            failing: BTreeSet::new(),
        }
    }

    pub fn from_scene(scene: &SceneState, sigma: f64, seed: u64) -> Self {
        Self::new(scene.objects.clone(), scene.frame, sigma, seed)
    }

    /// Replace the ground truth with a fresh simulator snapshot.
    pub fn observe(&mut self, scene: &SceneState) {
        self.objects = scene.objects.clone();
        self.frame = scene.frame;
    }

    /// Per-coordinate deviation never exceeds this.
    pub fn noise_bound(&self) -> f64 {
        3.0 * self.sigma
    }
}

impl Detector for MockDetector {
    fn detect(&self, query: &DetectionQuery) -> Result<Option<BBox>, DetectorError> {
        let label = query.label.as_str();
        if self.failing.contains(label) {
            return Err(DetectorError {
                label: label.to_string(),
                reason: "injected detector fault".into(),
            });
        }
        if self.blind_to.contains(label) {
            return Ok(None);
        }
        let Some(truth) = self.objects.get(label) else {
            return Ok(None);
        };
        if self.sigma == 0.0 {
            return Ok(Some(*truth));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ fnv1a(label.as_bytes()) ^ query.frame.frame_id.rotate_left(17),
        );
        let normal = Normal::new(0.0, self.sigma).expect("sigma checked");
        let bound = self.noise_bound();
        let mut jitter = || normal.sample(&mut rng).clamp(-bound, bound);
        let noisy = BBox::new(
            (truth.x_min + jitter()).clamp(0.0, self.frame.width),
            (truth.y_min + jitter()).clamp(0.0, self.frame.height),
            (truth.x_max + jitter()).clamp(0.0, self.frame.width),
            (truth.y_max + jitter()).clamp(0.0, self.frame.height),
        );
        // tiny boxes can invert under noise; fall back to the truth
        Ok(Some(noisy.unwrap_or(*truth)))
    }
}

/// 64-bit FNV-1a, stable across platforms and releases.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSource {
    GroundTruthNoisy,
    ExternalMarker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectorPose {
    pub position: Point,
    pub timestamp: f64,
    pub source: PoseSource,
}

pub trait PoseProvider {
    /// Most recent pose at simulation time `now`. `world` is the simulator
    /// snapshot; camera-backed providers ignore it.
    fn latest(&mut self, world: &SceneState, now: f64) -> Result<EffectorPose, PerceptionError>;
}

pub fn effector_pose(
    provider: &mut dyn PoseProvider,
    world: &SceneState,
    now: f64,
) -> Result<EffectorPose, PerceptionError> {
    provider.latest(world, now)
}

/// Publishes the simulator's effector position plus Gaussian noise.
#[derive(Debug, Clone)]
pub struct SimPoseProvider {
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    last: Option<EffectorPose>,
    /// When set the provider stops publishing, as a frozen camera would.
    pub frozen: bool,
}

impl SimPoseProvider {
    pub fn new(sigma: f64, seed: u64) -> Self {
        SimPoseProvider {
            noise: (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("positive sigma")),
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
            frozen: false,
        }
    }

    pub fn last(&self) -> Option<EffectorPose> {
        self.last
    }
}

impl PoseProvider for SimPoseProvider {
    fn latest(&mut self, world: &SceneState, now: f64) -> Result<EffectorPose, PerceptionError> {
        if !self.frozen {
            let truth = world.effector;
            let position = match &self.noise {
                Some(n) => world.frame.clamp(Point::new(
                    truth.x + n.sample(&mut self.rng),
                    truth.y + n.sample(&mut self.rng),
                )),
                None => truth,
            };
            let timestamp = self.last.map_or(now, |p| p.timestamp.max(now));
            self.last = Some(EffectorPose {
                position,
                timestamp,
                source: PoseSource::GroundTruthNoisy,
            });
        }
        let pose = self.last.ok_or(PerceptionError::NoPose)?;
        let age = now - pose.timestamp;
        if age > STALENESS_LIMIT {
            return Err(PerceptionError::StalePose {
                age,
                limit: STALENESS_LIMIT,
            });
        }
        Ok(pose)
    }
}
