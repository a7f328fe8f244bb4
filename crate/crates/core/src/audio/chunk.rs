use serde::{Deserialize, Serialize};

use super::AudioError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub chunk_seconds: f64,
    pub step_seconds: f64,
    pub sample_rate: u32,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            chunk_seconds: 2.0,
            step_seconds: 0.25,
            sample_rate: 16_000,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let ok = self.sample_rate > 0
            && self.step_seconds > 0.0
            && self.step_seconds <= self.chunk_seconds
            && self.chunk_seconds.is_finite()
            && self.window_len() > 0
            && self.step_len() > 0;
        if ok {
            Ok(())
        } else {
            Err(AudioError::Config(format!(
                "need 0 < step ({}) <= chunk ({}) and a positive rate",
                self.step_seconds, self.chunk_seconds
            )))
        }
    }

    pub fn overlap_seconds(&self) -> f64 {
        self.chunk_seconds - self.step_seconds
    }

    pub fn window_len(&self) -> usize {
        (self.chunk_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn step_len(&self) -> usize {
        (self.step_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn overlap_len(&self) -> usize {
        self.window_len() - self.step_len()
    }

    /// Windows needed to cover `len` samples: `ceil((len - W) / S) + 1`,
    /// and one padded window for anything shorter than `W`.
    pub fn window_count(&self, len: usize) -> usize {
        let (w, s) = (self.window_len(), self.step_len());
        if len <= w {
            1
        } else {
            (len - w).div_ceil(s) + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioWindow {
    pub samples: Vec<f64>,
    pub start_time: f64,
    /// Index of the first sample in the source stream.
    pub start_sample: usize,
}

impl AudioWindow {
    pub fn end_time(&self, sample_rate: u32) -> f64 {
        self.start_time + self.samples.len() as f64 / sample_rate as f64
    }
}

/// Slice a whole buffer into overlapping windows. The last window is
/// zero-padded when the stream does not end on a window boundary.
pub fn chunk_stream(samples: &[f64], cfg: &ChunkConfig) -> Result<Vec<AudioWindow>, AudioError> {
    let mut c = Chunker::new(*cfg)?;
    let mut out = c.push(samples);
    out.extend(c.finish());
    Ok(out)
}

/// Incremental form of [`chunk_stream`]: feed blocks of any size, get
/// windows as soon as they are complete.
#[derive(Debug, Clone)]
pub struct Chunker {
    cfg: ChunkConfig,
    buf: Vec<f64>,
    /// Stream index of `buf[0]`.
    buf_start: usize,
    next_start: usize,
    total: usize,
    emitted: usize,
}

impl Chunker {
    pub fn new(cfg: ChunkConfig) -> Result<Self, AudioError> {
        cfg.validate()?;
        Ok(Chunker {
            cfg,
            buf: vec![],
            buf_start: 0,
            next_start: 0,
            total: 0,
            emitted: 0,
        })
    }

    pub fn config(&self) -> &ChunkConfig {
        &self.cfg
    }

    pub fn push(&mut self, block: &[f64]) -> Vec<AudioWindow> {
        self.buf.extend_from_slice(block);
        self.total += block.len();
        let (w, s) = (self.cfg.window_len(), self.cfg.step_len());
        let mut out = vec![];
        while self.next_start + w <= self.total {
            let at = self.next_start - self.buf_start;
            out.push(self.window(self.buf[at..at + w].to_vec()));
            self.next_start += s;
        }
        let keep_from = self.next_start.min(self.total) - self.buf_start;
        self.buf.drain(..keep_from);
        self.buf_start += keep_from;
        out
    }

    /// Flush the zero-padded tail window, if the stream has samples no
    /// emitted window covered (or nothing was emitted at all).
    pub fn finish(&mut self) -> Option<AudioWindow> {
        let w = self.cfg.window_len();
        let covered = self.emitted > 0 && self.next_start - self.cfg.step_len() + w >= self.total;
        if covered {
            return None;
        }
        let at = self.next_start - self.buf_start;
        let mut samples = self.buf[at.min(self.buf.len())..].to_vec();
        samples.resize(w, 0.0);
        let win = self.window(samples);
        self.next_start += self.cfg.step_len();
        Some(win)
    }

    fn window(&mut self, samples: Vec<f64>) -> AudioWindow {
        self.emitted += 1;
        AudioWindow {
            samples,
            start_time: self.next_start as f64 / self.cfg.sample_rate as f64,
            start_sample: self.next_start,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn four_seconds_gives_nine_windows() {
        let cfg = ChunkConfig::default();
        let w = chunk_stream(&ramp(64_000), &cfg).unwrap();
        assert_eq!(w.len(), 9);
        assert_eq!(w[0].start_time, 0.0);
        assert_eq!(w[8].start_time, 2.0);
        assert!(w.iter().all(|x| x.samples.len() == 32_000));
    }

    #[test]
    fn short_stream_is_one_padded_window() {
        let w = chunk_stream(&[1.0; 100], &ChunkConfig::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].samples.len(), 32_000);
        assert_eq!(w[0].samples[99], 1.0);
        assert_eq!(w[0].samples[100], 0.0);
    }

    #[test]
    fn ragged_tail_gets_a_padded_window() {
        let cfg = ChunkConfig::default();
        let w = chunk_stream(&ramp(64_000 + 1_600), &cfg).unwrap();
        assert_eq!(w.len(), 10);
        assert_eq!(w[9].start_sample, 36_000);
        assert_eq!(w[9].samples[29_599], 65_599.0);
        assert_eq!(w[9].samples[29_600], 0.0);
    }

    #[test]
    fn consecutive_windows_share_the_overlap() {
        let cfg = ChunkConfig::default();
        let w = chunk_stream(&ramp(80_000), &cfg).unwrap();
        let o = cfg.overlap_len();
        assert_eq!(o, 28_000);
        for pair in w.windows(2) {
            assert_eq!(pair[0].samples[cfg.step_len()..], pair[1].samples[..o]);
        }
    }

    #[test]
    fn equal_step_and_chunk_is_disjoint() {
        let cfg = ChunkConfig {
            step_seconds: 2.0,
            ..Default::default()
        };
        let w = chunk_stream(&ramp(96_000), &cfg).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[1].samples[0], 32_000.0);
    }

    #[test]
    fn aligned_half_second_event_is_whole_in_seven_windows() {
        let cfg = ChunkConfig::default();
        let (start, len) = (40_000, 8_000);
        let w = chunk_stream(&ramp(160_000), &cfg).unwrap();
        let holding = w
            .iter()
            .filter(|x| x.start_sample <= start && start + len <= x.start_sample + 32_000)
            .count();
        assert_eq!(holding, 7);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = ChunkConfig {
            step_seconds: 3.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(ChunkConfig {
            step_seconds: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn streaming_matches_batch(len in 0usize..90_000, cuts in prop::collection::vec(1usize..9_000, 1..30)) {
            let cfg = ChunkConfig::default();
            let data = ramp(len);
            let batch = chunk_stream(&data, &cfg).unwrap();
            let mut c = Chunker::new(cfg).unwrap();
            let mut got = vec![];
            let mut at = 0;
            for cut in cuts.iter().cycle() {
                if at >= len { break; }
                let end = (at + cut).min(len);
                got.extend(c.push(&data[at..end]));
                at = end;
            }
            got.extend(c.finish());
            prop_assert_eq!(got.len(), cfg.window_count(len));
            prop_assert_eq!(got, batch);
        }

        #[test]
        fn events_up_to_the_overlap_are_never_split(
            len in 32_000usize..200_000,
            frac in 0.0f64..1.0,
            dur in 1usize..=28_000,
        ) {
            let cfg = ChunkConfig::default();
            prop_assume!(dur <= len);
            let start = ((len - dur) as f64 * frac) as usize;
            let w = chunk_stream(&ramp(len), &cfg).unwrap();
            prop_assert!(w.iter().any(|x| x.start_sample <= start && start + dur <= x.start_sample + 32_000));
        }
    }
}
