//! Utterance end-pointing on sustained low RMS.

use serde::{Deserialize, Serialize};

use super::AudioError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// RMS below this counts as silence (full scale = 1.0).
    pub amp_threshold: f64,
    pub silence_seconds: f64,
    pub frame_seconds: f64,
    pub sample_rate: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            amp_threshold: 0.01,
            silence_seconds: 5.0,
            frame_seconds: 0.25,
            sample_rate: 16_000,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let ok = self.amp_threshold >= 0.0
            && self.frame_seconds > 0.0
            && self.silence_seconds >= self.frame_seconds
            && self.sample_rate > 0
            && self.frame_len() > 0;
        if ok {
            Ok(())
        } else {
            Err(AudioError::Config("bad end-pointing parameters".into()))
        }
    }

    pub fn frame_len(&self) -> usize {
        (self.frame_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn silent_frames_needed(&self) -> usize {
        (self.silence_seconds / self.frame_seconds).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub samples: Vec<f64>,
    /// Seconds from recording start to the end decision.
    pub duration: f64,
    /// Some frame rose above the threshold.
    pub speech_detected: bool,
    /// The stream ran out before the silence span completed.
    pub truncated: bool,
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Streaming end-pointer. Feed blocks with [`push`](Self::push) until it
/// returns an utterance, or call [`finish`](Self::finish) at end of stream.
#[derive(Debug, Clone)]
pub struct Endpointer {
    cfg: EndpointConfig,
    samples: Vec<f64>,
    scanned: usize,
    silent_run: usize,
    speech: bool,
    done: bool,
}

impl Endpointer {
    pub fn new(cfg: EndpointConfig) -> Result<Self, AudioError> {
        cfg.validate()?;
        Ok(Endpointer {
            cfg,
            samples: vec![],
            scanned: 0,
            silent_run: 0,
            speech: false,
            done: false,
        })
    }

    /// Returns the finished utterance once the trailing silence is complete.
    /// Samples past the decision point are not kept.
    pub fn push(&mut self, block: &[f64]) -> Option<Utterance> {
        if self.done {
            return None;
        }
        self.samples.extend_from_slice(block);
        let n = self.cfg.frame_len();
        let need = self.cfg.silent_frames_needed();
        while self.scanned + n <= self.samples.len() {
            let frame = &self.samples[self.scanned..self.scanned + n];
            self.scanned += n;
            if rms(frame) < self.cfg.amp_threshold {
                self.silent_run += 1;
            } else {
                self.silent_run = 0;
                self.speech = true;
            }
            if self.silent_run >= need {
                self.done = true;
                self.samples.truncate(self.scanned);
                return Some(self.utterance(false));
            }
        }
        None
    }

    pub fn finish(mut self) -> Utterance {
        if self.done {
            return self.utterance(false);
        }
        let tail = &self.samples[self.scanned..];
        if !tail.is_empty() && rms(tail) >= self.cfg.amp_threshold {
            self.speech = true;
        }
        self.utterance(true)
    }

    fn utterance(&self, truncated: bool) -> Utterance {
        Utterance {
            samples: self.samples.clone(),
            duration: self.samples.len() as f64 / self.cfg.sample_rate as f64,
            speech_detected: self.speech,
            truncated,
        }
    }
}

/// Run the end-pointer over a recorded stream (post-wake audio).
pub fn endpoint_silence(stream: &[f64], cfg: &EndpointConfig) -> Result<Utterance, AudioError> {
    let mut e = Endpointer::new(*cfg)?;
    match e.push(stream) {
        Some(u) => Ok(u),
        None => Ok(e.finish()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::synth;

    const SR: u32 = 16_000;

    fn speech_then_silence(speech: f64, quiet: f64) -> Vec<f64> {
        let mut x = synth::babble(speech, SR, 0.2, 1);
        x.extend(synth::silence(quiet, SR));
        x
    }

    #[test]
    fn one_second_speech_ends_at_six() {
        let u =
            endpoint_silence(&speech_then_silence(1.0, 8.0), &EndpointConfig::default()).unwrap();
        assert_eq!(u.duration, 6.0);
        assert_eq!(u.samples.len(), 96_000);
        assert!(u.speech_detected && !u.truncated);
    }

    #[test]
    fn sound_at_4_9_restarts_the_timer() {
        let mut x = speech_then_silence(1.0, 3.9);
        x.extend(synth::babble(0.1, SR, 0.3, 2));
        x.extend(synth::silence(8.0, SR));
        let u = endpoint_silence(&x, &EndpointConfig::default()).unwrap();
        // the burst at 4.9..5.0 s sits in the 4.75..5.0 frame
        assert_eq!(u.duration, 10.0);
    }

    #[test]
    fn pure_silence_is_five_seconds_without_speech() {
        let u = endpoint_silence(&synth::silence(7.0, SR), &EndpointConfig::default()).unwrap();
        assert_eq!(u.duration, 5.0);
        assert!(!u.speech_detected);
    }

    #[test]
    fn unaligned_end_is_within_one_frame() {
        let u =
            endpoint_silence(&speech_then_silence(1.1, 8.0), &EndpointConfig::default()).unwrap();
        let ideal = 1.1 + 5.0;
        assert!(u.duration >= ideal && u.duration - ideal <= 0.25);
    }

    #[test]
    fn short_stream_is_truncated() {
        let u =
            endpoint_silence(&speech_then_silence(1.0, 2.0), &EndpointConfig::default()).unwrap();
        assert!(u.truncated && u.speech_detected);
        assert_eq!(u.duration, 3.0);
    }

    #[test]
    fn streaming_matches_batch() {
        let x = speech_then_silence(2.3, 6.0);
        let batch = endpoint_silence(&x, &EndpointConfig::default()).unwrap();
        let mut e = Endpointer::new(EndpointConfig::default()).unwrap();
        let streamed = x.chunks(1234).find_map(|c| e.push(c)).unwrap();
        assert_eq!(batch, streamed);
        let again = endpoint_silence(&x, &EndpointConfig::default()).unwrap();
        assert_eq!(batch, again);
    }
}
