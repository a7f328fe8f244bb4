//! Deterministic test signals.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn len(seconds: f64, sample_rate: u32) -> usize {
    (seconds * sample_rate as f64).round() as usize
}

pub fn sine(freq: f64, seconds: f64, sample_rate: u32, amp: f64) -> Vec<f64> {
    (0..len(seconds, sample_rate))
        .map(|i| amp * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
        .collect()
}

pub fn silence(seconds: f64, sample_rate: u32) -> Vec<f64> {
    vec![0.0; len(seconds, sample_rate)]
}

/// Gaussian noise with standard deviation `amp`.
pub fn noise(seconds: f64, sample_rate: u32, amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, amp).expect("finite amplitude");
    (0..len(seconds, sample_rate))
        .map(|_| n.sample(&mut rng))
        .collect()
}

/// Stand-in for speech: noise shaped by a slow syllable envelope, never
/// quieter than a third of `amp` so RMS-based silence checks see it.
pub fn babble(seconds: f64, sample_rate: u32, amp: f64, seed: u64) -> Vec<f64> {
    noise(seconds, sample_rate, 1.0, seed)
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64 / sample_rate as f64;
            let env = 0.67 + 0.33 * (2.0 * PI * 4.0 * t).sin();
            amp * env * v
        })
        .collect()
}

/// Add `insert` into `base` starting at sample `at`, growing `base` if needed.
pub fn overlay(base: &mut Vec<f64>, insert: &[f64], at: usize) {
    if base.len() < at + insert.len() {
        base.resize(at + insert.len(), 0.0);
    }
    for (b, x) in base[at..].iter_mut().zip(insert) {
        *b += x;
    }
}
