use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::chunk::AudioWindow;
use super::features::{stft, Taper};
use super::{synth, AudioError};

pub const WAKE_LABEL: &str = "wake";
pub const BACKGROUND_LABEL: &str = "background";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WakeConfig {
    pub wake_label: String,
    pub threshold: f64,
}

impl Default for WakeConfig {
    fn default() -> Self {
        WakeConfig {
            wake_label: WAKE_LABEL.to_string(),
            threshold: 0.5,
        }
    }
}

impl WakeConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        if self.threshold > 0.0 && self.threshold < 1.0 {
            Ok(())
        } else {
            Err(AudioError::Config(format!(
                "wake threshold {} outside (0, 1)",
                self.threshold
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("classifier failed: {0}")]
pub struct ClassifierError(pub String);

pub trait WakeClassifier {
    fn classify(&self, window: &AudioWindow) -> Result<DetectionResult, ClassifierError>;
}

/// Label must match and the score must be strictly above the threshold.
pub fn is_wake(result: &DetectionResult, cfg: &WakeConfig) -> bool {
    result.label == cfg.wake_label && result.score > cfg.threshold
}

pub fn detect_wake(
    window: &AudioWindow,
    classifier: &dyn WakeClassifier,
    cfg: &WakeConfig,
) -> Result<bool, ClassifierError> {
    let r = classifier.classify(window)?;
    if !(0.0..=1.0).contains(&r.score) {
        return Err(ClassifierError(format!("score {} outside [0, 1]", r.score)));
    }
    Ok(is_wake(&r, cfg))
}

/// Scan windows in order and return the first one that wakes. Classifier
/// errors skip the window.
pub fn first_wake<'a>(
    windows: impl IntoIterator<Item = &'a AudioWindow>,
    classifier: &dyn WakeClassifier,
    cfg: &WakeConfig,
) -> Option<&'a AudioWindow> {
    windows
        .into_iter()
        .find(|w| match detect_wake(w, classifier, cfg) {
            Ok(hit) => hit,
            Err(e) => {
                log::warn!("window at {:.3}s skipped: {e}", w.start_time);
                false
            }
        })
}

/// Mock keyword spotter: listens for a fixed sequence of pure tones.
///
/// Each 25 ms frame is assigned to the tone whose bin holds its spectral
/// peak (if loud enough). The score is the worst per-tone fraction of the
/// frames a complete tone would fill, zero if the tones are out of order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerToneClassifier {
    pub tones: Vec<f64>,
    pub tone_seconds: f64,
    pub sample_rate: u32,
    /// Minimum per-frame peak magnitude for a frame to count.
    pub min_peak: f64,
}

const FRAME: usize = 400;
const HOP: usize = 160;
const N_FFT: usize = 512;

impl Default for MarkerToneClassifier {
    fn default() -> Self {
        MarkerToneClassifier {
            tones: vec![1250.0, 1875.0, 2500.0],
            tone_seconds: 0.15,
            sample_rate: 16_000,
            min_peak: 1.0,
        }
    }
}

impl MarkerToneClassifier {
    /// The burst this classifier is keyed on.
    pub fn marker(&self, amp: f64) -> Vec<f64> {
        self.tones
            .iter()
            .flat_map(|&f| synth::sine(f, self.tone_seconds, self.sample_rate, amp))
            .collect()
    }

    pub fn marker_seconds(&self) -> f64 {
        self.tone_seconds * self.tones.len() as f64
    }

    fn bin_of(&self, f: f64) -> usize {
        (f * N_FFT as f64 / self.sample_rate as f64).round() as usize
    }

    pub fn score(&self, samples: &[f64]) -> f64 {
        let spec = stft(samples, FRAME, HOP, N_FFT, Taper::Hann).expect("fixed geometry");
        let bins: Vec<usize> = self.tones.iter().map(|&f| self.bin_of(f)).collect();
        let mut hits = vec![0usize; bins.len()];
        let mut mean_pos = vec![0.0; bins.len()];
        for (t, frame) in spec.magnitude().iter().enumerate() {
            let (arg, peak) = frame
                .iter()
                .enumerate()
                .skip(1)
                .fold(
                    (0, 0.0),
                    |acc, (k, &m)| if m > acc.1 { (k, m) } else { acc },
                );
            if peak < self.min_peak {
                continue;
            }
            if let Some(i) = bins.iter().position(|&b| b.abs_diff(arg) <= 1) {
                hits[i] += 1;
                mean_pos[i] += t as f64;
            }
        }
        if hits.contains(&0) {
            return 0.0;
        }
        let order: Vec<f64> = mean_pos
            .iter()
            .zip(&hits)
            .map(|(s, &h)| s / h as f64)
            .collect();
        if order.windows(2).any(|p| p[0] >= p[1]) {
            return 0.0;
        }
        let tone_len = (self.tone_seconds * self.sample_rate as f64).round() as usize;
        let full = super::features::frame_count(tone_len, FRAME, HOP).max(1) as f64;
        hits.iter()
            .map(|&h| (h as f64 / full).min(1.0))
            .fold(1.0, f64::min)
    }
}

impl WakeClassifier for MarkerToneClassifier {
    fn classify(&self, window: &AudioWindow) -> Result<DetectionResult, ClassifierError> {
        let score = self.score(&window.samples);
        let label = if score > 0.0 {
            WAKE_LABEL
        } else {
            BACKGROUND_LABEL
        };
        Ok(DetectionResult {
            label: label.to_string(),
            score,
        })
    }
}
