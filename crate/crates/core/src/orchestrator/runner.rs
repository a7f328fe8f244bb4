//! Wake → record → STT → AE → OD → RA, timed per stage.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adapters::{
    ActionExtractor, AdapterError, MockTranscriber, MockVision, RuleExtractor, SpeechClip,
    Transcriber, Vision,
};
use super::clock::{Clock, MonotonicClock, SimClock};
use super::events::{EventSink, PipelineEvent};
use super::judge::{actions_match, detections_ok, referenced_labels, transcript_matches};
use super::metrics::{
    aggregate, Accuracy, AggregateReport, MetricsError, Stage, StageMetrics, TrialRecord,
};
use super::script::{FaultPlan, FaultPlanError, TrialEntry};
use crate::audio::{
    chunk_stream, endpoint_silence, first_wake, synth, AudioError, ChunkConfig, EndpointConfig,
    MarkerToneClassifier, WakeClassifier, WakeConfig,
};
use crate::commands::{validate, CommandQueue, CommandRegistry};
use crate::executor::{ExecOutcome, Executor, DEFAULT_MARGIN};
use crate::grammar::{parse_actions, ActionCall};
use crate::perception::{DetectionReport, SimPoseProvider};
use crate::scene::{Scene, SceneState};
use crate::servo::{Servo, ServoError, TrajectoryRecord};

/// Simulated cost of passing data from one stage to the next.
pub const HANDOFF_SECONDS: f64 = 0.05;
/// Speaking rate used when synthesizing trial audio.
pub const SECONDS_PER_WORD: f64 = 0.32;
const MIN_SPEECH_SECONDS: f64 = 0.8;
/// Trailing silence recorded after the utterance, a little longer than
/// the end-pointer needs.
const TRAILING_SILENCE: f64 = 5.5;
const LEAD_IN_SECONDS: f64 = 0.75;
const NOISE_AMP: f64 = 0.002;
const SPEECH_AMP: f64 = 0.2;
const MARKER_AMP: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSettings {
    pub chunk: ChunkConfig,
    pub wake: WakeConfig,
    pub endpoint: EndpointConfig,
}

impl Default for AudioSettings {
    fn default() -> Self {
        AudioSettings {
            chunk: ChunkConfig::default(),
            wake: WakeConfig::default(),
            endpoint: EndpointConfig::default(),
        }
    }
}

pub struct Adapters {
    pub wake: Box<dyn WakeClassifier + Send + Sync>,
    pub transcriber: Box<dyn Transcriber>,
    pub extractor: Box<dyn ActionExtractor>,
    pub vision: Box<dyn Vision>,
}

impl Adapters {
    pub fn mock(perception_sigma: f64) -> Self {
        Adapters {
            wake: Box::new(MarkerToneClassifier::default()),
            transcriber: Box::new(MockTranscriber::default()),
            extractor: Box::new(RuleExtractor::default()),
            vision: Box::new(MockVision::new(perception_sigma)),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Faults(#[from] FaultPlanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub final_state: Option<SceneState>,
    pub trajectory: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub trials: Vec<TrialOutcome>,
    pub report: AggregateReport,
}

impl BatchResult {
    pub fn records(&self) -> Vec<TrialRecord> {
        self.trials.iter().map(|t| t.record.clone()).collect()
    }
}

/// A command typed or posted rather than spoken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "input", rename_all = "snake_case")]
pub enum CommandInput {
    /// Natural language; goes through the action extractor.
    Text(String),
    /// An action list; parsed directly.
    Actions(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandReport {
    pub input: CommandInput,
    pub calls: Vec<ActionCall>,
    pub detections: Option<DetectionReport>,
    pub outcomes: Vec<ExecOutcome>,
    pub seconds: BTreeMap<Stage, f64>,
    /// Stages that ran and passed; a stage that never ran is absent.
    pub passed: BTreeMap<Stage, bool>,
    pub ok: bool,
    pub message: String,
}

impl CommandReport {
    /// Score the command like a trial: stages that never ran count as
    /// failed with zero time, and the total is the stage sum.
    pub fn to_record(&self, id: impl Into<String>) -> TrialRecord {
        let t = |s| self.seconds.get(&s).copied().unwrap_or(0.0);
        let a = |s| Accuracy::from_bool(self.passed.get(&s).copied().unwrap_or(false));
        let m = StageMetrics {
            t_stt: t(Stage::Stt),
            t_ae: t(Stage::Ae),
            t_od: t(Stage::Od),
            t_ra: t(Stage::Ra),
            a_stt: a(Stage::Stt),
            a_ae: a(Stage::Ae),
            a_od: a(Stage::Od),
            a_ra: a(Stage::Ra),
        };
        let text = match &self.input {
            CommandInput::Text(t) | CommandInput::Actions(t) => t.clone(),
        };
        let mut r = TrialRecord::new(id, text, self.calls.clone(), m, m.stage_sum());
        r.failure = (!self.ok).then(|| self.message.clone());
        r
    }
}

/// Speech end-pointed out of a post-wake recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub clip: SpeechClip,
    pub duration: f64,
    pub speech_detected: bool,
}

pub struct Pipeline {
    pub registry: CommandRegistry,
    pub servo: Servo,
    pub margin: f64,
    pub audio: AudioSettings,
    pub adapters: Adapters,
    /// Time batch trials on the wall clock instead of a simulated one.
    pub wall_clock: bool,
    commands_run: u64,
}

struct Stages {
    m: StageMetrics,
    failure: Option<String>,
    errored: bool,
}

impl Stages {
    fn new() -> Self {
        let f = Accuracy::FAIL;
        Stages {
            m: StageMetrics {
                t_stt: 0.0,
                t_ae: 0.0,
                t_od: 0.0,
                t_ra: 0.0,
                a_stt: f,
                a_ae: f,
                a_od: f,
                a_ra: f,
            },
            failure: None,
            errored: false,
        }
    }

    fn set(&mut self, stage: Stage, seconds: f64, ok: bool) {
        let a = Accuracy::from_bool(ok);
        match stage {
            Stage::Stt => (self.m.t_stt, self.m.a_stt) = (seconds, a),
            Stage::Ae => (self.m.t_ae, self.m.a_ae) = (seconds, a),
            Stage::Od => (self.m.t_od, self.m.a_od) = (seconds, a),
            Stage::Ra => (self.m.t_ra, self.m.a_ra) = (seconds, a),
        }
    }

    fn fail(&mut self, why: String) {
        self.failure.get_or_insert(why);
    }
}

fn finished(
    trial: &str,
    stage: Stage,
    seconds: f64,
    ok: bool,
    detail: Option<String>,
) -> PipelineEvent {
    PipelineEvent::StageFinished {
        trial: trial.to_string(),
        stage,
        seconds,
        ok,
        detail,
    }
}

/// Synthesized audio for one spoken command: background noise, the wake
/// marker, then speech-like babble followed by silence.
pub fn synth_trial_audio(
    marker: &[f64],
    utterance: &str,
    sample_rate: u32,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut wake = synth::noise(LEAD_IN_SECONDS, sample_rate, NOISE_AMP, seed);
    let at = wake.len();
    synth::overlay(&mut wake, marker, at);
    let words = utterance.split_whitespace().count() as f64;
    let speech_secs = (words * SECONDS_PER_WORD).max(MIN_SPEECH_SECONDS);
    let mut speech = synth::babble(speech_secs, sample_rate, SPEECH_AMP, seed ^ 0xb0b);
    speech.extend(synth::silence(TRAILING_SILENCE, sample_rate));
    (wake, speech)
}

impl Pipeline {
    pub fn new(adapters: Adapters) -> Self {
        Pipeline {
            registry: CommandRegistry::default(),
            servo: Servo::default(),
            margin: DEFAULT_MARGIN,
            audio: AudioSettings::default(),
            adapters,
            wall_clock: false,
            commands_run: 0,
        }
    }

    pub fn mock(perception_sigma: f64) -> Self {
        Self::new(Adapters::mock(perception_sigma))
    }

    /// Seconds into `stream` at which the wake word is decided, if ever.
    pub fn listen(&self, stream: &[f64]) -> Result<Option<f64>, AudioError> {
        let windows = chunk_stream(stream, &self.audio.chunk)?;
        let hit = first_wake(&windows, self.adapters.wake.as_ref(), &self.audio.wake);
        Ok(hit.map(|w| w.end_time(self.audio.chunk.sample_rate)))
    }

    /// End-point a post-wake recording.
    pub fn record(&self, stream: &[f64], spoken: Option<String>) -> Result<Recording, AudioError> {
        let u = endpoint_silence(stream, &self.audio.endpoint)?;
        Ok(Recording {
            clip: SpeechClip {
                samples: u.samples,
                sample_rate: self.audio.endpoint.sample_rate,
                spoken,
            },
            duration: u.duration,
            speech_detected: u.speech_detected,
        })
    }

    fn extract(
        &mut self,
        text: &str,
        clock: &mut dyn Clock,
    ) -> Result<Result<(Vec<ActionCall>, CommandQueue), String>, AdapterError> {
        let raw = self.adapters.extractor.extract(text, clock)?;
        let calls = match parse_actions(&raw) {
            Ok(c) => c,
            Err(e) => return Ok(Err(format!("unparseable actions: {e}"))),
        };
        Ok(validate(&calls, &self.registry)
            .map(|q| (calls, q))
            .map_err(|e| e.to_string()))
    }

    fn act(
        &self,
        scene: &mut Scene,
        queue: &CommandQueue,
        detections: &DetectionReport,
        pose_seed: u64,
        clock: &mut dyn Clock,
        ticks: &mut Vec<TrajectoryRecord>,
    ) -> Result<Vec<ExecOutcome>, ServoError> {
        let mut exec = Executor::new(&self.servo);
        exec.margin = self.margin;
        let mut poses = SimPoseProvider::new(scene.noise().perception_sigma, pose_seed);
        let mut outcomes = vec![];
        for q in queue.iter() {
            let mut on_tick = |r: &TrajectoryRecord| ticks.push(*r);
            let o = exec.execute(
                scene,
                q,
                &detections.objects,
                &mut poses,
                clock.now(),
                &mut on_tick,
            )?;
            clock.advance(o.elapsed);
            let ok = o.success;
            outcomes.push(o);
            if !ok {
                break;
            }
        }
        Ok(outcomes)
    }

    /// Run one scripted trial end to end. `fault` makes that stage's
    /// adapter misbehave.
    pub fn run_trial(
        &mut self,
        entry: &TrialEntry,
        mut scene: Scene,
        fault: Option<Stage>,
        clock: &mut dyn Clock,
        sink: &mut dyn EventSink,
    ) -> TrialOutcome {
        let id = entry.id.as_str();
        let seed = entry.seed;
        let a = &mut self.adapters;
        a.transcriber.begin_trial(seed, fault == Some(Stage::Stt));
        a.extractor.begin_trial(seed, fault == Some(Stage::Ae));
        a.vision.begin_trial(seed, fault == Some(Stage::Od));
        scene.suction_fault = fault == Some(Stage::Ra);

        let mut st = Stages::new();
        let mut trajectory = vec![];

        // wake; timing starts once it is decided
        let marker = MarkerToneClassifier {
            sample_rate: self.audio.chunk.sample_rate,
            ..MarkerToneClassifier::default()
        }
        .marker(MARKER_AMP);
        let (wake_audio, speech_audio) = synth_trial_audio(
            &marker,
            &entry.utterance,
            self.audio.chunk.sample_rate,
            seed,
        );
        let t_wake = match self.listen(&wake_audio) {
            Ok(Some(t)) => t,
            Ok(None) => {
                st.fail("wake word not detected".into());
                st.errored = true;
                return self.close(entry, st, 0.0, None, trajectory, sink);
            }
            Err(e) => {
                st.fail(e.to_string());
                st.errored = true;
                return self.close(entry, st, 0.0, None, trajectory, sink);
            }
        };
        clock.advance(t_wake);
        sink.emit(PipelineEvent::Wake {
            trial: id.into(),
            at: clock.now(),
        });
        let t0 = clock.now();

        let rec = match self.record(&speech_audio, Some(entry.utterance.clone())) {
            Ok(r) => r,
            Err(e) => {
                st.fail(e.to_string());
                st.errored = true;
                return self.close(entry, st, 0.0, None, trajectory, sink);
            }
        };
        clock.advance(rec.duration);

        // STT
        sink.emit(PipelineEvent::StageStarted {
            trial: id.into(),
            stage: Stage::Stt,
        });
        let s = clock.now();
        let transcript = if rec.speech_detected {
            self.adapters.transcriber.transcribe(&rec.clip, clock)
        } else {
            Err(AdapterError::Rejected("no speech recorded".into()))
        };
        let dt = clock.now() - s;
        let transcript = match transcript {
            Ok(t) => {
                let ok = transcript_matches(&t, &entry.expected_transcript);
                if !ok {
                    st.fail(format!("transcript mismatch: {t:?}"));
                }
                st.set(Stage::Stt, dt, ok);
                sink.emit(finished(id, Stage::Stt, dt, ok, None));
                sink.emit(PipelineEvent::Transcript {
                    trial: id.into(),
                    text: t.clone(),
                });
                t
            }
            Err(e) => {
                st.errored |= matches!(e, AdapterError::Unavailable { .. });
                st.fail(e.to_string());
                st.set(Stage::Stt, dt, false);
                sink.emit(finished(id, Stage::Stt, dt, false, Some(e.to_string())));
                return self.close(entry, st, clock.now() - t0, None, trajectory, sink);
            }
        };
        clock.advance(HANDOFF_SECONDS);

        // AE
        sink.emit(PipelineEvent::StageStarted {
            trial: id.into(),
            stage: Stage::Ae,
        });
        let s = clock.now();
        let extracted = self.extract(&transcript, clock);
        let dt = clock.now() - s;
        let queue = match extracted {
            Ok(Ok((calls, queue))) => {
                let ok = actions_match(&calls, &entry.expected_actions);
                if !ok {
                    st.fail(format!(
                        "actions mismatch: {}",
                        crate::grammar::to_canonical(&calls)
                    ));
                }
                st.set(Stage::Ae, dt, ok);
                sink.emit(finished(id, Stage::Ae, dt, ok, None));
                sink.emit(PipelineEvent::Actions {
                    trial: id.into(),
                    calls,
                });
                queue
            }
            Ok(Err(why)) => {
                st.fail(why.clone());
                st.set(Stage::Ae, dt, false);
                sink.emit(finished(id, Stage::Ae, dt, false, Some(why)));
                return self.close(entry, st, clock.now() - t0, Some(scene), trajectory, sink);
            }
            Err(e) => {
                st.errored |= matches!(e, AdapterError::Unavailable { .. });
                st.fail(e.to_string());
                st.set(Stage::Ae, dt, false);
                sink.emit(finished(id, Stage::Ae, dt, false, Some(e.to_string())));
                return self.close(entry, st, clock.now() - t0, Some(scene), trajectory, sink);
            }
        };
        clock.advance(HANDOFF_SECONDS);

        // OD
        sink.emit(PipelineEvent::StageStarted {
            trial: id.into(),
            stage: Stage::Od,
        });
        let labels = referenced_labels(&queue);
        let s = clock.now();
        let detected = if labels.is_empty() {
            Ok(DetectionReport::default())
        } else {
            self.adapters.vision.detect(scene.state(), &labels, clock)
        };
        let dt = clock.now() - s;
        let detections = match detected {
            Ok(r) => {
                let ok = detections_ok(&labels, &r.objects, scene.state());
                if !ok {
                    let missing: Vec<&str> = labels
                        .iter()
                        .map(String::as_str)
                        .filter(|l| !r.objects.contains(l))
                        .collect();
                    st.fail(format!("detection failed for [{}]", missing.join(", ")));
                }
                st.set(Stage::Od, dt, ok);
                sink.emit(finished(id, Stage::Od, dt, ok, None));
                sink.emit(PipelineEvent::Detections {
                    trial: id.into(),
                    objects: r.objects.clone(),
                });
                r
            }
            Err(e) => {
                st.fail(e.to_string());
                st.set(Stage::Od, dt, false);
                sink.emit(finished(id, Stage::Od, dt, false, Some(e.to_string())));
                return self.close(entry, st, clock.now() - t0, Some(scene), trajectory, sink);
            }
        };
        clock.advance(HANDOFF_SECONDS);

        // RA
        sink.emit(PipelineEvent::StageStarted {
            trial: id.into(),
            stage: Stage::Ra,
        });
        let s = clock.now();
        let acted = self.act(
            &mut scene,
            &queue,
            &detections,
            seed ^ 0x5241,
            clock,
            &mut trajectory,
        );
        let dt = clock.now() - s;
        for r in &trajectory {
            sink.emit(PipelineEvent::Trajectory {
                trial: id.into(),
                point: *r,
            });
        }
        match acted {
            Ok(outcomes) => {
                let failed = outcomes.iter().find_map(|o| o.failure.clone());
                let ok = match &failed {
                    Some(f) => {
                        st.fail(f.to_string());
                        false
                    }
                    None => {
                        let holds = entry.expected_final.holds(scene.state());
                        if !holds {
                            st.fail("final scene does not satisfy the goal".into());
                        }
                        holds
                    }
                };
                st.set(Stage::Ra, dt, ok);
                sink.emit(finished(
                    id,
                    Stage::Ra,
                    dt,
                    ok,
                    failed.map(|f| f.to_string()),
                ));
            }
            Err(e) => {
                st.errored = true;
                st.fail(e.to_string());
                st.set(Stage::Ra, dt, false);
                sink.emit(finished(id, Stage::Ra, dt, false, Some(e.to_string())));
            }
        }
        sink.emit(PipelineEvent::Scene {
            snapshot: scene.snapshot(&[]),
        });
        self.close(entry, st, clock.now() - t0, Some(scene), trajectory, sink)
    }

    fn close(
        &self,
        entry: &TrialEntry,
        st: Stages,
        total: f64,
        scene: Option<Scene>,
        trajectory: Vec<TrajectoryRecord>,
        sink: &mut dyn EventSink,
    ) -> TrialOutcome {
        let mut record = TrialRecord::new(
            entry.id.clone(),
            entry.utterance.clone(),
            entry.expected_actions.clone(),
            st.m,
            total,
        );
        record.failure = st.failure;
        record.errored = st.errored;
        sink.emit(PipelineEvent::TrialFinished {
            record: Box::new(record.clone()),
        });
        TrialOutcome {
            record,
            final_state: scene.map(|s| s.state().clone()),
            trajectory,
        }
    }

    /// Run every entry on a fresh simulated clock. Scene files resolve
    /// against `base_dir`; a scene that fails to load yields an errored
    /// record rather than aborting the batch.
    pub fn run_batch(
        &mut self,
        entries: &[TrialEntry],
        base_dir: &Path,
        faults: &FaultPlan,
        sink: &mut dyn EventSink,
    ) -> Result<BatchResult, PipelineError> {
        let plan = faults.assign(entries.len())?;
        let mut trials = Vec::with_capacity(entries.len());
        for (entry, fault) in entries.iter().zip(plan) {
            let scene = crate::scene::SceneSetup::load(base_dir.join(&entry.scene_file))
                .and_then(|s| s.build(Some(entry.seed)));
            let outcome = match scene {
                Ok(scene) => {
                    let mut clock: Box<dyn Clock> = if self.wall_clock {
                        Box::new(MonotonicClock::new())
                    } else {
                        Box::new(SimClock::new())
                    };
                    self.run_trial(entry, scene, fault, clock.as_mut(), sink)
                }
                Err(e) => {
                    let mut st = Stages::new();
                    st.fail(e.to_string());
                    st.errored = true;
                    self.close(entry, st, 0.0, None, vec![], sink)
                }
            };
            trials.push(outcome);
        }
        let records: Vec<TrialRecord> = trials.iter().map(|t| t.record.clone()).collect();
        let report = aggregate(&records)?;
        Ok(BatchResult { trials, report })
    }

    /// Run a typed or posted command against a persistent scene, skipping
    /// speech. Stops at the first stage that fails.
    pub fn run_command(
        &mut self,
        scene: &mut Scene,
        input: CommandInput,
        clock: &mut dyn Clock,
        sink: &mut dyn EventSink,
    ) -> CommandReport {
        self.commands_run += 1;
        let n = self.commands_run;
        let trial = format!("cmd-{n}");
        let seed = scene.state().rng_seed.wrapping_add(n);
        self.adapters.extractor.begin_trial(seed, false);
        self.adapters.vision.begin_trial(seed, false);
        let mut report = CommandReport {
            input: input.clone(),
            calls: vec![],
            detections: None,
            outcomes: vec![],
            seconds: BTreeMap::new(),
            passed: BTreeMap::new(),
            ok: false,
            message: String::new(),
        };

        // typed input stands in for the transcript
        sink.emit(PipelineEvent::StageStarted {
            trial: trial.clone(),
            stage: Stage::Stt,
        });
        sink.emit(finished(
            &trial,
            Stage::Stt,
            0.0,
            true,
            Some("typed".into()),
        ));
        report.seconds.insert(Stage::Stt, 0.0);
        report.passed.insert(Stage::Stt, true);
        sink.emit(PipelineEvent::StageStarted {
            trial: trial.clone(),
            stage: Stage::Ae,
        });
        let s = clock.now();
        let parsed = match &input {
            CommandInput::Text(t) => match self.extract(t, clock) {
                Ok(r) => r,
                Err(e) => Err(e.to_string()),
            },
            CommandInput::Actions(a) => match parse_actions(a) {
                Ok(calls) => validate(&calls, &self.registry)
                    .map(|q| (calls, q))
                    .map_err(|e| e.to_string()),
                Err(e) => Err(format!("unparseable actions: {e}")),
            },
        };
        let dt = clock.now() - s;
        report.seconds.insert(Stage::Ae, dt);
        report.passed.insert(Stage::Ae, parsed.is_ok());
        let (calls, queue) = match parsed {
            Ok(p) => p,
            Err(why) => {
                sink.emit(finished(&trial, Stage::Ae, dt, false, Some(why.clone())));
                report.message = why;
                return report;
            }
        };
        sink.emit(finished(&trial, Stage::Ae, dt, true, None));
        sink.emit(PipelineEvent::Actions {
            trial: trial.clone(),
            calls: calls.clone(),
        });
        report.calls = calls;

        sink.emit(PipelineEvent::StageStarted {
            trial: trial.clone(),
            stage: Stage::Od,
        });
        let labels = referenced_labels(&queue);
        let s = clock.now();
        let detected = if labels.is_empty() {
            Ok(DetectionReport::default())
        } else {
            self.adapters.vision.detect(scene.state(), &labels, clock)
        };
        let dt = clock.now() - s;
        report.seconds.insert(Stage::Od, dt);
        report.passed.insert(Stage::Od, false);
        let detections = match detected {
            Ok(d) => d,
            Err(e) => {
                sink.emit(finished(&trial, Stage::Od, dt, false, Some(e.to_string())));
                report.message = e.to_string();
                return report;
            }
        };
        let od_ok = labels.iter().all(|l| detections.objects.contains(l));
        report.passed.insert(Stage::Od, od_ok);
        sink.emit(finished(&trial, Stage::Od, dt, od_ok, None));
        sink.emit(PipelineEvent::Detections {
            trial: trial.clone(),
            objects: detections.objects.clone(),
        });

        sink.emit(PipelineEvent::StageStarted {
            trial: trial.clone(),
            stage: Stage::Ra,
        });
        let s = clock.now();
        let mut ticks = vec![];
        let acted = self.act(scene, &queue, &detections, seed ^ 0x5241, clock, &mut ticks);
        let dt = clock.now() - s;
        report.seconds.insert(Stage::Ra, dt);
        report.passed.insert(Stage::Ra, false);
        report.detections = Some(detections);
        for r in &ticks {
            sink.emit(PipelineEvent::Trajectory {
                trial: trial.clone(),
                point: *r,
            });
        }
        match acted {
            Ok(outcomes) => {
                let failed = outcomes.iter().find_map(|o| o.failure.clone());
                report.ok = failed.is_none();
                report.passed.insert(Stage::Ra, report.ok);
                report.message = match &failed {
                    Some(f) => f.to_string(),
                    None => "done".into(),
                };
                sink.emit(finished(
                    &trial,
                    Stage::Ra,
                    dt,
                    report.ok,
                    failed.map(|f| f.to_string()),
                ));
                report.outcomes = outcomes;
            }
            Err(e) => {
                sink.emit(finished(&trial, Stage::Ra, dt, false, Some(e.to_string())));
                report.message = e.to_string();
            }
        }
        let path: Vec<_> = report
            .outcomes
            .iter()
            .flat_map(|o| o.trajectory.iter().copied())
            .collect();
        sink.emit(PipelineEvent::Scene {
            snapshot: scene.snapshot(&path),
        });
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox, FrameSize, Point};
    use crate::orchestrator::judge::FinalPredicate;
    use crate::scene::{NoiseModel, Relation};

    fn scene() -> Scene {
        let mut objects = BTreeMap::new();
        objects.insert(
            "apple".into(),
            BBox::new(100.0, 200.0, 140.0, 240.0).unwrap(),
        );
        objects.insert(
            "orange".into(),
            BBox::new(300.0, 200.0, 350.0, 250.0).unwrap(),
        );
        objects.insert(
            "hand".into(),
            BBox::new(500.0, 350.0, 580.0, 430.0).unwrap(),
        );
        let state = SceneState {
            frame: FrameSize::default(),
            objects,
            effector: Point::new(320.0, 50.0),
            held: None,
            rng_seed: 3,
        };
        Scene::new(state, NoiseModel::default()).unwrap()
    }

    fn entry() -> TrialEntry {
        TrialEntry {
            id: "t1".into(),
            scene_file: "unused.json".into(),
            utterance: "move the apple to the right of the orange".into(),
            expected_transcript: "move the apple to the right of the orange".into(),
            expected_actions: vec![ActionCall::new(
                "move_object_to_right_of",
                ["apple", "orange"],
            )],
            expected_final: FinalPredicate::Relation {
                object: "apple".into(),
                relation: Relation::RightOf,
                reference: "orange".into(),
            },
            seed: 11,
        }
    }

    fn run(fault: Option<Stage>) -> (TrialOutcome, Vec<PipelineEvent>) {
        let mut p = Pipeline::mock(1.0);
        let mut events = vec![];
        let mut sink = |e: PipelineEvent| events.push(e);
        let mut clock = SimClock::new();
        let out = p.run_trial(&entry(), scene(), fault, &mut clock, &mut sink);
        (out, events)
    }

    #[test]
    fn clean_trial_passes_every_stage() {
        let (out, events) = run(None);
        let r = &out.record;
        assert!(r.a_total.passed(), "{:?}", r.failure);
        assert!(r.identity_holds());
        assert!(
            r.overhead > TRAILING_SILENCE - 1.0,
            "recording lands in C: {}",
            r.overhead
        );
        for s in Stage::ALL {
            assert!(r.metrics.time(s) > 0.0, "{s}");
        }
        assert!(!out.trajectory.is_empty());
        assert!(matches!(events.first(), Some(PipelineEvent::Wake { .. })));
        assert!(matches!(
            events.last(),
            Some(PipelineEvent::TrialFinished { .. })
        ));
    }

    #[test]
    fn each_fault_fails_its_own_stage_first() {
        for s in Stage::ALL {
            let (out, _) = run(Some(s));
            assert_eq!(
                out.record.metrics.first_failure(),
                Some(s),
                "{:?}",
                out.record.failure
            );
            assert!(!out.record.errored);
            assert!(out.record.identity_holds());
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let a = run(None).0;
        let b = run(None).0;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn commands_mutate_a_persistent_scene() {
        let mut p = Pipeline::mock(1.0);
        let mut sc = scene();
        let mut clock = SimClock::new();
        let mut sink = crate::orchestrator::events::discard();
        let r = p.run_command(
            &mut sc,
            CommandInput::Text("grab the apple".into()),
            &mut clock,
            &mut sink,
        );
        assert!(r.ok, "{}", r.message);
        assert_eq!(sc.held(), Some("apple"));
        let r = p.run_command(
            &mut sc,
            CommandInput::Actions("[pick_up(orange)]".into()),
            &mut clock,
            &mut sink,
        );
        assert!(!r.ok);
        assert_eq!(r.message, "gripper occupied by apple");
        let r = p.run_command(
            &mut sc,
            CommandInput::Actions("[fly(apple)]".into()),
            &mut clock,
            &mut sink,
        );
        assert!(!r.ok && r.outcomes.is_empty());
        let r = p.run_command(
            &mut sc,
            CommandInput::Actions("[hand_over(apple)]".into()),
            &mut clock,
            &mut sink,
        );
        assert!(r.ok, "{}", r.message);
        assert!(sc.held().is_none());
        let rec = r.to_record("c4");
        assert!(rec.a_total.passed() && rec.identity_holds());
        let bad = p.run_command(
            &mut sc,
            CommandInput::Text("grab the durian".into()),
            &mut clock,
            &mut sink,
        );
        assert_eq!(bad.message, "object not detected: durian");
        assert_eq!(bad.to_record("c5").metrics.first_failure(), Some(Stage::Od));
    }

    #[test]
    fn silence_never_wakes() {
        let p = Pipeline::mock(1.0);
        let quiet = synth::noise(3.0, 16_000, NOISE_AMP, 1);
        assert_eq!(p.listen(&quiet).unwrap(), None);
    }
}
