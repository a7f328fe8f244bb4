//! Audio front end: windowing, spectral features, wake decision and
//! end-pointing.

pub mod chunk;
pub mod endpoint;
pub mod features;
pub mod pipeline;
pub mod synth;
pub mod wake;
pub mod wav;

use thiserror::Error;

pub use chunk::{chunk_stream, AudioWindow, ChunkConfig, Chunker};
pub use endpoint::{endpoint_silence, rms, EndpointConfig, Endpointer, Utterance};
pub use features::{
    log_mel, mfcc, stft, FeatureConfig, FeatureExtractor, FeatureFrame, MelFilterbank, Spectrogram,
    Taper,
};
pub use pipeline::{run_wake_pipeline, DropOldestQueue, PipelineReport, WakeEvent};
pub use wake::{
    detect_wake, first_wake, is_wake, ClassifierError, DetectionResult, MarkerToneClassifier,
    WakeClassifier, WakeConfig,
};
pub use wav::{read_wav, write_wav};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("invalid audio config: {0}")]
    Config(String),
    #[error("unsupported audio format: {0}")]
    Format(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}
