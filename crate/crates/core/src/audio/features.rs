//! Short-time spectra and log-mel / cepstral features.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioError;

pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_rate: 16_000,
            frame_len: 400,
            hop: 160,
            n_fft: 512,
            n_mels: 128,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        if self.frame_len == 0 || self.hop == 0 || self.n_mels == 0 || self.sample_rate == 0 {
            return Err(AudioError::Config("feature sizes must be positive".into()));
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < self.frame_len {
            return Err(AudioError::Config(format!(
                "n_fft {} must be a power of two >= frame length {}",
                self.n_fft, self.frame_len
            )));
        }
        Ok(())
    }

    pub fn frame_count(&self, samples: usize) -> usize {
        frame_count(samples, self.frame_len, self.hop)
    }
}

pub fn frame_count(samples: usize, frame_len: usize, hop: usize) -> usize {
    if samples < frame_len {
        0
    } else {
        (samples - frame_len) / hop + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    Rectangular,
    /// Periodic Hann.
    Hann,
}

impl Taper {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Full complex spectra, one row of `n_fft` bins per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_fft: usize,
    pub hop: usize,
    pub frames: Vec<Vec<Complex64>>,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// One-sided magnitude, `n_fft/2 + 1` bins per frame.
    pub fn magnitude(&self) -> Vec<Vec<f64>> {
        let b = self.bins();
        self.frames
            .iter()
            .map(|f| f[..b].iter().map(|c| c.norm()).collect())
            .collect()
    }

    pub fn power(&self) -> Vec<Vec<f64>> {
        let b = self.bins();
        self.frames
            .iter()
            .map(|f| f[..b].iter().map(|c| c.norm_sqr()).collect())
            .collect()
    }
}

/// Frames of `frame_len` samples every `hop`, tapered, zero-padded to
/// `n_fft` and transformed.
pub fn stft(
    samples: &[f64],
    frame_len: usize,
    hop: usize,
    n_fft: usize,
    taper: Taper,
) -> Result<Spectrogram, AudioError> {
    if frame_len == 0 || hop == 0 || !n_fft.is_power_of_two() || n_fft < frame_len {
        return Err(AudioError::Config(format!(
            "bad STFT geometry frame={frame_len} hop={hop} n_fft={n_fft}"
        )));
    }
    let w = taper.coefficients(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let n = frame_count(samples.len(), frame_len, hop);
    let mut frames = Vec::with_capacity(n);
    for t in 0..n {
        let seg = &samples[t * hop..t * hop + frame_len];
        let mut buf: Vec<Complex64> = seg
            .iter()
            .zip(&w)
            .map(|(x, w)| Complex64::new(x * w, 0.0))
            .collect();
        buf.resize(n_fft, Complex64::new(0.0, 0.0));
        fft.process(&mut buf);
        frames.push(buf);
    }
    Ok(Spectrogram { n_fft, hop, frames })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale over `[0, sr/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels + 2` edge frequencies in Hz; band `m` spans
    /// `edges[m]..edges[m + 2]` and peaks at `edges[m + 1]`.
    pub edges: Vec<f64>,
    /// `n_mels` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    /// Each weight is the triangle's mean over the frequency span of its
    /// bin, so bands narrower than a bin still get non-zero support.
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let df = sample_rate as f64 / n_fft as f64;
        let bins = n_fft / 2 + 1;
        let weights = (0..n_mels)
            .map(|m| {
                let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..bins)
                    .map(|k| {
                        let lo = (k as f64 - 0.5) * df;
                        triangle_integral(l, c, r, lo, lo + df) / df
                    })
                    .collect()
            })
            .collect();
        MelFilterbank { edges, weights }
    }

    pub fn band_center(&self, m: usize) -> f64 {
        self.edges[m + 1]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Exact integral over `[a, b]` of the unit-peak triangle on `l, c, r`.
fn triangle_integral(l: f64, c: f64, r: f64, a: f64, b: f64) -> f64 {
    let rise = |x: f64| (x - l) / (c - l);
    let fall = |x: f64| (r - x) / (r - c);
    let seg = |s: f64, e: f64, f: &dyn Fn(f64) -> f64| {
        let (s, e) = (s.max(a), e.min(b));
        if e > s {
            (e - s) * (f(s) + f(e)) / 2.0
        } else {
            0.0
        }
    };
    seg(l, c, &rise) + seg(c, r, &fall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub log_mel: Vec<f64>,
    pub frame_time: f64,
}

/// Reusable feature extractor; holds the filterbank.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    bank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self, AudioError> {
        cfg.validate()?;
        Ok(FeatureExtractor {
            bank: MelFilterbank::new(cfg.n_mels, cfg.n_fft, cfg.sample_rate),
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    pub fn spectrogram(&self, samples: &[f64]) -> Result<Spectrogram, AudioError> {
        stft(
            samples,
            self.cfg.frame_len,
            self.cfg.hop,
            self.cfg.n_fft,
            Taper::Hann,
        )
    }

    /// `start_time` is the stream time of `samples[0]`.
    pub fn log_mel(
        &self,
        samples: &[f64],
        start_time: f64,
    ) -> Result<Vec<FeatureFrame>, AudioError> {
        let spec = self.spectrogram(samples)?;
        Ok(log_mel(&spec, &self.bank, self.cfg.sample_rate, start_time))
    }

    pub fn mfcc(&self, samples: &[f64], n_coeffs: usize) -> Result<Vec<Vec<f64>>, AudioError> {
        Ok(self
            .log_mel(samples, 0.0)?
            .iter()
            .map(|f| mfcc(&f.log_mel, n_coeffs))
            .collect())
    }
}

pub fn log_mel(
    spec: &Spectrogram,
    bank: &MelFilterbank,
    sample_rate: u32,
    start_time: f64,
) -> Vec<FeatureFrame> {
    spec.power()
        .iter()
        .enumerate()
        .map(|(t, p)| FeatureFrame {
            log_mel: bank
                .apply(p)
                .into_iter()
                .map(|e| e.max(LOG_FLOOR).ln())
                .collect(),
            frame_time: start_time + (t * spec.hop) as f64 / sample_rate as f64,
        })
        .collect()
}

/// Orthonormal DCT-II of one log-mel frame, first `n_coeffs` terms.
pub fn mfcc(log_mel: &[f64], n_coeffs: usize) -> Vec<f64> {
    let n = log_mel.len() as f64;
    (0..n_coeffs)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale
                * log_mel
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                    .sum::<f64>()
        })
        .collect()
}
