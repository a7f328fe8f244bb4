use serde::{Deserialize, Serialize};

use super::metrics::{Stage, TrialRecord};
use crate::grammar::ActionCall;
use crate::perception::ObjectPositionMap;
use crate::scene::SceneSnapshot;
use crate::servo::TrajectoryRecord;

/// Everything the pipeline reports while it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PipelineEvent {
    Wake {
        trial: String,
        at: f64,
    },
    StageStarted {
        trial: String,
        stage: Stage,
    },
    StageFinished {
        trial: String,
        stage: Stage,
        seconds: f64,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Transcript {
        trial: String,
        text: String,
    },
    Actions {
        trial: String,
        calls: Vec<ActionCall>,
    },
    Detections {
        trial: String,
        objects: ObjectPositionMap,
    },
    Trajectory {
        trial: String,
        #[serde(flatten)]
        point: TrajectoryRecord,
    },
    Scene {
        snapshot: SceneSnapshot,
    },
    TrialFinished {
        record: Box<TrialRecord>,
    },
}

pub trait EventSink {
    fn emit(&mut self, event: PipelineEvent);
}

impl<F: FnMut(PipelineEvent)> EventSink for F {
    fn emit(&mut self, event: PipelineEvent) {
        self(event)
    }
}

/// Drops everything.
pub fn discard() -> impl EventSink {
    |_: PipelineEvent| {}
}
