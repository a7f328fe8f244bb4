//! JSON-over-HTTP clients for real model services.
//!
//! Each service gets one POST per request. Latency is whatever the wall
//! clock says, so these never call `Clock::advance`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::adapters::{ActionExtractor, AdapterError, SpeechClip, Transcriber, Vision};
use super::clock::Clock;
use crate::audio::{AudioWindow, ClassifierError, DetectionResult, WakeClassifier};
use crate::geometry::BBox;
use crate::perception::{
    query_objects, DetectionQuery, DetectionReport, Detector, DetectorError, FrameRef,
    PerceptionError,
};
use crate::scene::SceneState;

pub const ENV_STT: &str = "FUZZYHRI_STT_URL";
pub const ENV_LLM: &str = "FUZZYHRI_LLM_URL";
pub const ENV_DETECTOR: &str = "FUZZYHRI_DETECTOR_URL";
pub const ENV_WAKE: &str = "FUZZYHRI_WAKE_URL";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub stt: Option<String>,
    pub llm: Option<String>,
    pub detector: Option<String>,
    pub wake: Option<String>,
    /// Per-request timeout in seconds.
    pub timeout: Option<f64>,
}

impl Endpoints {
    /// Environment variables replace whatever is already set.
    pub fn with_env(mut self) -> Self {
        let var = |k| std::env::var(k).ok().filter(|v: &String| !v.is_empty());
        self.stt = var(ENV_STT).or(self.stt);
        self.llm = var(ENV_LLM).or(self.llm);
        self.detector = var(ENV_DETECTOR).or(self.detector);
        self.wake = var(ENV_WAKE).or(self.wake);
        self
    }

    /// Names of the required services with no URL.
    pub fn missing(&self) -> Vec<&'static str> {
        let mut out = vec![];
        for (name, v) in [
            ("stt", &self.stt),
            ("llm", &self.llm),
            ("detector", &self.detector),
        ] {
            if v.is_none() {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscribeRequest {
    pub sample_rate: u32,
    /// 16-bit PCM.
    pub samples: Vec<i16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscribeReply {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractRequest {
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractReply {
    /// Raw action list text, parsed by the caller.
    pub actions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReply {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(rename = "box", default)]
    pub bbox: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub sample_rate: u32,
    pub start_time: f64,
    pub samples: Vec<i16>,
}

pub fn to_pcm16(samples: &[f64]) -> Vec<i16> {
    samples
        .iter()
        .map(|&s| (s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16)
        .collect()
}

/// One configured service.
#[derive(Debug, Clone)]
pub struct HttpService {
    name: &'static str,
    url: String,
    agent: Agent,
}

impl HttpService {
    pub fn new(name: &'static str, url: impl Into<String>, timeout: Option<f64>) -> Self {
        let config = Agent::config_builder()
            .timeout_global(timeout.map(Duration::from_secs_f64))
            .build();
        HttpService {
            name,
            url: url.into(),
            agent: Agent::new_with_config(config),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post<Req: Serialize, Rep: for<'de> Deserialize<'de>>(
        &self,
        body: &Req,
    ) -> Result<Rep, AdapterError> {
        let down = |e: ureq::Error| AdapterError::Unavailable {
            adapter: self.name.to_string(),
            reason: e.to_string(),
        };
        let mut resp = self.agent.post(&self.url).send_json(body).map_err(down)?;
        resp.body_mut()
            .read_json()
            .map_err(|e| AdapterError::Rejected(format!("{}: bad reply: {e}", self.name)))
    }
}

pub struct HttpTranscriber(pub HttpService);

impl Transcriber for HttpTranscriber {
    fn transcribe(
        &mut self,
        clip: &SpeechClip,
        _clock: &mut dyn Clock,
    ) -> Result<String, AdapterError> {
        let req = TranscribeRequest {
            sample_rate: clip.sample_rate,
            samples: to_pcm16(&clip.samples),
        };
        self.0.post::<_, TranscribeReply>(&req).map(|r| r.text)
    }
}

pub struct HttpExtractor(pub HttpService);

impl ActionExtractor for HttpExtractor {
    fn extract(
        &mut self,
        transcript: &str,
        _clock: &mut dyn Clock,
    ) -> Result<String, AdapterError> {
        let req = ExtractRequest {
            transcript: transcript.to_string(),
        };
        self.0.post::<_, ExtractReply>(&req).map(|r| r.actions)
    }
}

pub struct HttpDetector(pub HttpService);

impl Detector for HttpDetector {
    fn detect(&self, query: &DetectionQuery) -> Result<Option<BBox>, DetectorError> {
        let reply: DetectReply = self.0.post(query).map_err(|e| DetectorError {
            label: query.label.clone(),
            reason: e.to_string(),
        })?;
        Ok(reply.bbox)
    }
}

/// Queries the detector service once per label against a frame counter.
pub struct HttpVision {
    pub detector: HttpDetector,
    frame_id: u64,
}

impl HttpVision {
    pub fn new(service: HttpService) -> Self {
        HttpVision {
            detector: HttpDetector(service),
            frame_id: 0,
        }
    }
}

impl Vision for HttpVision {
    fn detect(
        &mut self,
        _world: &SceneState,
        labels: &[String],
        clock: &mut dyn Clock,
    ) -> Result<DetectionReport, PerceptionError> {
        self.frame_id += 1;
        let frame = FrameRef {
            frame_id: self.frame_id,
            timestamp: clock.now(),
        };
        query_objects(labels, &self.detector, frame)
    }
}

impl super::runner::Adapters {
    /// HTTP adapters for every service; the wake word falls back to the
    /// marker-tone spotter when no classifier URL is given.
    pub fn external(e: &Endpoints, sample_rate: u32) -> Result<Self, AdapterError> {
        let missing = e.missing();
        if !missing.is_empty() {
            return Err(AdapterError::Unavailable {
                adapter: missing.join(", "),
                reason: "no endpoint URL configured".into(),
            });
        }
        let svc = |name, url: &Option<String>| {
            HttpService::new(name, url.clone().unwrap_or_default(), e.timeout)
        };
        let wake: Box<dyn WakeClassifier + Send + Sync> = match &e.wake {
            Some(_) => Box::new(HttpWakeClassifier {
                service: svc("wake", &e.wake),
                sample_rate,
            }),
            None => Box::new(crate::audio::MarkerToneClassifier {
                sample_rate,
                ..Default::default()
            }),
        };
        Ok(super::runner::Adapters {
            wake,
            transcriber: Box::new(HttpTranscriber(svc("stt", &e.stt))),
            extractor: Box::new(HttpExtractor(svc("llm", &e.llm))),
            vision: Box::new(HttpVision::new(svc("detector", &e.detector))),
        })
    }
}

pub struct HttpWakeClassifier {
    pub service: HttpService,
    pub sample_rate: u32,
}

impl WakeClassifier for HttpWakeClassifier {
    fn classify(&self, window: &AudioWindow) -> Result<DetectionResult, ClassifierError> {
        let req = ClassifyRequest {
            sample_rate: self.sample_rate,
            start_time: window.start_time,
            samples: to_pcm16(&window.samples),
        };
        self.service
            .post(&req)
            .map_err(|e| ClassifierError(e.to_string()))
    }
}
