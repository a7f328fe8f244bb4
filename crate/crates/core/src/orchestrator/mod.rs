//! Trial orchestration: adapters, stage timing, judging and reporting.

pub mod adapters;
pub mod clock;
pub mod events;
pub mod export;
#[cfg(feature = "external")]
pub mod external;
pub mod judge;
pub mod metrics;
pub mod runner;
pub mod script;

pub use adapters::{
    ActionExtractor, AdapterError, LatencyModel, MockTranscriber, MockVision, RuleExtractor,
    SpeechClip, Transcriber, Vision,
};
pub use clock::{Clock, MonotonicClock, SimClock};
pub use events::{discard, EventSink, PipelineEvent};
pub use export::{write_batch, ExportError, OUTPUT_FILES};
pub use judge::FinalPredicate;
pub use metrics::{
    aggregate, error_attribution, Accuracy, AggregateReport, ErrorAttribution, MetricsError, Stage,
    StageMetrics, Summary, TrialRecord,
};
pub use runner::{
    synth_trial_audio, Adapters, AudioSettings, BatchResult, CommandInput, CommandReport, Pipeline,
    PipelineError, TrialOutcome,
};
pub use script::{load_script, parse_script, FaultPlan, ScriptError, TrialEntry};
