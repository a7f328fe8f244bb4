use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioError;

pub const EXPECTED_RATE: u32 = 16_000;

/// Read a mono 16-bit PCM file at 16 kHz, scaled to [-1, 1).
pub fn read_wav(path: impl AsRef<Path>) -> Result<Vec<f64>, AudioError> {
    let mut r = WavReader::open(path)?;
    let spec = r.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != SampleFormat::Int
        || spec.sample_rate != EXPECTED_RATE
    {
        return Err(AudioError::Format(format!(
            "need mono 16-bit PCM at {EXPECTED_RATE} Hz, got {} ch {}-bit {:?} at {} Hz",
            spec.channels, spec.bits_per_sample, spec.sample_format, spec.sample_rate
        )));
    }
    r.samples::<i16>()
        .map(|s| Ok(s? as f64 / 32_768.0))
        .collect()
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f64]) -> Result<(), AudioError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: EXPECTED_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec)?;
    for s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32_767.0).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}
