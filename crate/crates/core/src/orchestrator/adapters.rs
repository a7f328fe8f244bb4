//! Seams for the speech, language and vision models, with deterministic
//! stand-ins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clock::Clock;
use crate::grammar::{to_canonical, ActionCall};
use crate::perception::{query_objects, DetectionReport, FrameRef, MockDetector, PerceptionError};
use crate::scene::SceneState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("{adapter} unavailable: {reason}")]
    Unavailable { adapter: String, reason: String },
    #[error("{0}")]
    Rejected(String),
}

/// Recorded utterance. `spoken` is the ground-truth text when the audio
/// was synthesized or has a sidecar transcript; real models ignore it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub spoken: Option<String>,
}

pub trait Transcriber: Send {
    /// Called once per trial. Mocks use `fault` to corrupt their output.
    fn begin_trial(&mut self, _seed: u64, _fault: bool) {}
    fn transcribe(
        &mut self,
        clip: &SpeechClip,
        clock: &mut dyn Clock,
    ) -> Result<String, AdapterError>;
}

pub trait ActionExtractor: Send {
    fn begin_trial(&mut self, _seed: u64, _fault: bool) {}
    /// Raw model output, expected to hold an action list.
    fn extract(&mut self, transcript: &str, clock: &mut dyn Clock) -> Result<String, AdapterError>;
}

pub trait Vision: Send {
    fn begin_trial(&mut self, _seed: u64, _fault: bool) {}
    /// One open-vocabulary query per label against the current frame.
    fn detect(
        &mut self,
        world: &SceneState,
        labels: &[String],
        clock: &mut dyn Clock,
    ) -> Result<DetectionReport, PerceptionError>;
}

/// `base + per_unit * units` seconds plus clipped Gaussian jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub base: f64,
    pub per_unit: f64,
    pub jitter: f64,
}

impl LatencyModel {
    pub fn sample(&self, units: usize, rng: &mut ChaCha8Rng) -> f64 {
        let j = if self.jitter > 0.0 {
            let n = Normal::new(0.0, self.jitter).expect("positive jitter");
            n.sample(rng).clamp(-3.0 * self.jitter, 3.0 * self.jitter)
        } else {
            0.0
        };
        (self.base + self.per_unit * units as f64 + j).max(0.0)
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Echoes the clip's reference text.
#[derive(Debug, Clone)]
pub struct MockTranscriber {
    pub latency: LatencyModel,
    rng: ChaCha8Rng,
    fault: bool,
}

impl Default for MockTranscriber {
    fn default() -> Self {
        MockTranscriber {
            latency: LatencyModel {
                base: 0.35,
                per_unit: 0.12,
                jitter: 0.05,
            },
            rng: ChaCha8Rng::seed_from_u64(0),
            fault: false,
        }
    }
}

/// Mangle the last word so the transcript no longer matches.
pub fn corrupt_transcript(text: &str) -> String {
    let mut words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    match words.last_mut() {
        Some(w) => {
            let rev: String = w.chars().rev().collect();
            *w = if rev == *w { format!("{w}x") } else { rev };
        }
        None => words.push("static".into()),
    }
    words.join(" ")
}

impl Transcriber for MockTranscriber {
    fn begin_trial(&mut self, seed: u64, fault: bool) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5354_5400);
        self.fault = fault;
    }

    fn transcribe(
        &mut self,
        clip: &SpeechClip,
        clock: &mut dyn Clock,
    ) -> Result<String, AdapterError> {
        let Some(text) = &clip.spoken else {
            return Err(AdapterError::Rejected(
                "mock transcriber needs a reference transcript".into(),
            ));
        };
        clock.advance(self.latency.sample(word_count(text), &mut self.rng));
        Ok(if self.fault {
            corrupt_transcript(text)
        } else {
            text.clone()
        })
    }
}

/// Lowercase, drop punctuation, squeeze whitespace. Decimal points and
/// hyphens inside words or numbers survive.
pub fn normalize_text(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let inner = |i: usize| {
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        match chars[i] {
            '.' => {
                prev.is_some_and(|c| c.is_ascii_digit()) && next.is_some_and(|c| c.is_ascii_digit())
            }
            '-' => next.is_some_and(char::is_alphanumeric),
            _ => false,
        }
    };
    let kept: String = chars
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c.is_alphanumeric() || inner(i) {
                c
            } else {
                ' '
            }
        })
        .collect();
    kept.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Phrase table standing in for the language model.
pub struct RuleExtractor {
    pub latency: LatencyModel,
    rules: Vec<(Regex, Box<dyn Fn(&regex::Captures) -> ActionCall + Send>)>,
    rng: ChaCha8Rng,
    fault: bool,
}

fn cap(c: &regex::Captures, i: usize) -> String {
    c.get(i).map_or("", |m| m.as_str()).trim().to_string()
}

impl Default for RuleExtractor {
    fn default() -> Self {
        let obj = r"(?:the |a |an |my )?([a-z][a-z ]*?)";
        let num = r"(-?\d+(?:\.\d+)?)";
        let rules: Vec<(String, Box<dyn Fn(&regex::Captures) -> ActionCall + Send>)> = vec![
            (
                format!(r"^(?:move|put|place) {obj} to the (left|right) of {obj}$"),
                Box::new(|c| {
                    let m = format!("move_object_to_{}_of", cap(c, 2));
                    ActionCall::new(m, [cap(c, 1), cap(c, 3)])
                }),
            ),
            (
                format!(r"^(?:move|put|place) {obj} (above|below|under|over) {obj}$"),
                Box::new(|c| {
                    let rel = match cap(c, 2).as_str() {
                        "above" | "over" => "above",
                        _ => "below",
                    };
                    ActionCall::new(format!("move_object_{rel}"), [cap(c, 1), cap(c, 3)])
                }),
            ),
            (
                format!(r"^(?:move|put|place) {obj} at {num},? {num}$"),
                Box::new(|c| ActionCall::new("place_at", [cap(c, 1), cap(c, 2), cap(c, 3)])),
            ),
            (
                format!(r"^(?:give|hand|pass|bring) (?:me|it to me) {obj}$"),
                Box::new(|c| ActionCall::new("hand_over", [cap(c, 1)])),
            ),
            (
                format!(r"^(?:give|hand|pass|bring) {obj} to me$"),
                Box::new(|c| ActionCall::new("hand_over", [cap(c, 1)])),
            ),
            (
                format!(r"^(?:grab|pick up|take|get|lift) {obj}$"),
                Box::new(|c| ActionCall::new("pick_up", [cap(c, 1)])),
            ),
        ];
        RuleExtractor {
            latency: LatencyModel {
                base: 0.25,
                per_unit: 0.04,
                jitter: 0.03,
            },
            rules: rules
                .into_iter()
                .map(|(re, f)| (Regex::new(&re).expect("static pattern"), f))
                .collect(),
            rng: ChaCha8Rng::seed_from_u64(0),
            fault: false,
        }
    }
}

impl RuleExtractor {
    /// Map a sentence to calls; clauses joined by "then" / "and" run in order.
    pub fn interpret(&self, text: &str) -> Vec<ActionCall> {
        let text = normalize_text(text)
            .replace(" please", "")
            .replace("please ", "");
        let splitter = Regex::new(r" (?:and then|then|and) ").expect("static pattern");
        splitter
            .split(&text)
            .filter_map(|clause| {
                let clause = clause.trim();
                self.rules
                    .iter()
                    .find_map(|(re, f)| re.captures(clause).map(|c| f(&c)))
            })
            .collect()
    }
}

impl ActionExtractor for RuleExtractor {
    fn begin_trial(&mut self, seed: u64, fault: bool) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4145_0000);
        self.fault = fault;
    }

    fn extract(&mut self, transcript: &str, clock: &mut dyn Clock) -> Result<String, AdapterError> {
        clock.advance(self.latency.sample(word_count(transcript), &mut self.rng));
        let text = to_canonical(&self.interpret(transcript));
        Ok(if self.fault {
            // a model that stops mid-list
            text.trim_end_matches(']').to_string()
        } else {
            text
        })
    }
}

/// Simulator-backed detector with per-query latency.
#[derive(Debug, Clone)]
pub struct MockVision {
    pub sigma: f64,
    pub latency: LatencyModel,
    seed: u64,
    frame_id: u64,
    rng: ChaCha8Rng,
    fault: bool,
}

impl MockVision {
    pub fn new(sigma: f64) -> Self {
        MockVision {
            sigma,
            latency: LatencyModel {
                base: 0.0,
                per_unit: 0.3,
                jitter: 0.03,
            },
            seed: 0,
            frame_id: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            fault: false,
        }
    }
}

impl Default for MockVision {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl Vision for MockVision {
    fn begin_trial(&mut self, seed: u64, fault: bool) {
        self.seed = seed;
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4f44_0000);
        self.fault = fault;
    }

    fn detect(
        &mut self,
        world: &SceneState,
        labels: &[String],
        clock: &mut dyn Clock,
    ) -> Result<DetectionReport, PerceptionError> {
        let mut det = MockDetector::from_scene(world, self.sigma, self.seed);
        if self.fault {
            // miss the first object asked for
            det.blind_to.extend(labels.first().cloned());
        }
        self.frame_id += 1;
        let frame = FrameRef {
            frame_id: self.frame_id,
            timestamp: clock.now(),
        };
        let report = query_objects(labels, &det, frame)?;
        clock.advance(self.latency.sample(report.queries, &mut self.rng));
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::clock::SimClock;

    fn calls(text: &str) -> String {
        to_canonical(&RuleExtractor::default().interpret(text))
    }

    #[test]
    fn phrase_table() {
        assert_eq!(calls("Grab the apple."), "[pick_up(apple)]");
        assert_eq!(
            calls("pick up the green apple"),
            "[pick_up(\"green apple\")]"
        );
        assert_eq!(calls("Give me the lemon"), "[hand_over(lemon)]");
        assert_eq!(calls("hand the lemon to me"), "[hand_over(lemon)]");
        assert_eq!(
            calls("Move the apple to the left of the orange"),
            "[move_object_to_left_of(apple, orange)]"
        );
        assert_eq!(
            calls("put the pear under the cup"),
            "[move_object_below(pear, cup)]"
        );
        assert_eq!(
            calls("place the lemon at 300, 200"),
            "[place_at(lemon, 300, 200)]"
        );
        assert_eq!(
            calls("grab the lemon and then give me the lemon"),
            "[pick_up(lemon), hand_over(lemon)]"
        );
        assert_eq!(calls("sing a song"), "[]");
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  Grab   the Apple! "), "grab the apple");
        assert_eq!(normalize_text("place it at 3.5, -2."), "place it at 3.5 -2");
    }

    #[test]
    fn faults_corrupt_output() {
        let mut clock = SimClock::new();
        let mut t = MockTranscriber::default();
        let clip = SpeechClip {
            samples: vec![],
            sample_rate: 16_000,
            spoken: Some("grab the apple".into()),
        };
        t.begin_trial(1, false);
        assert_eq!(t.transcribe(&clip, &mut clock).unwrap(), "grab the apple");
        assert!(clock.now() > 0.0);
        t.begin_trial(1, true);
        assert_eq!(t.transcribe(&clip, &mut clock).unwrap(), "grab the elppa");

        let mut e = RuleExtractor::default();
        e.begin_trial(1, true);
        let raw = e.extract("grab the apple", &mut clock).unwrap();
        assert!(crate::grammar::parse_actions(&raw).is_err());
    }

    #[test]
    fn latency_is_seeded() {
        let m = LatencyModel {
            base: 1.0,
            per_unit: 0.5,
            jitter: 0.2,
        };
        let a = m.sample(3, &mut ChaCha8Rng::seed_from_u64(4));
        let b = m.sample(3, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert!((a - 2.5).abs() <= 0.6);
    }
}
