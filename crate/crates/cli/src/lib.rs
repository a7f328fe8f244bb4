//! Batch, interactive and serve modes behind the `fuzzyhri` binary.

pub mod plot;

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use fuzzyhri_core::audio::{read_wav, AudioError};
use fuzzyhri_core::orchestrator::external::Endpoints;
use fuzzyhri_core::orchestrator::{
    load_script, write_batch, Adapters, AggregateReport, BatchResult, Clock, CommandInput,
    CommandReport, EventSink, FaultPlan, MonotonicClock, Pipeline, PipelineError, ScriptError,
    SimClock, Stage,
};
use fuzzyhri_core::scene::{Scene, SceneSetup, SceneState};
use fuzzyhri_gateway::{AppState, Session};

/// Detector noise used by the mock vision adapter, in pixels.
pub const MOCK_PERCEPTION_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Batch,
    Interactive,
    Serve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdapterKind {
    Mock,
    External,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "fuzzyhri",
    version,
    about = "Voice-driven pick-and-place workbench"
)]
pub struct Args {
    #[arg(long, value_enum, default_value = "batch")]
    pub mode: Mode,
    /// Trial script (JSON lines); scene files resolve against its folder.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Scene setup for interactive and serve modes.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Added to every trial seed; also seeds the fault plan.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "mock")]
    pub adapters: AdapterKind,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Spoken command as 16 kHz mono WAV. A sibling `.txt` file supplies
    /// the reference transcript for the mock recognizer.
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// Injected stage failures, e.g. `stt=2,ae=5,od=2,ra=6`.
    #[arg(long)]
    pub faults: Option<String>,
    #[arg(long)]
    pub stt_url: Option<String>,
    #[arg(long)]
    pub llm_url: Option<String>,
    #[arg(long)]
    pub detector_url: Option<String>,
    #[arg(long)]
    pub wake_url: Option<String>,
    /// Per-request timeout for external services, seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn write_out(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(text).map_err(io)
}

macro_rules! say {
    ($out:expr, $($t:tt)*) => {
        write_out($out, format_args!("{}\n", format_args!($($t)*)))
    };
}

impl Args {
    pub fn endpoints(&self) -> Endpoints {
        Endpoints {
            stt: self.stt_url.clone(),
            llm: self.llm_url.clone(),
            detector: self.detector_url.clone(),
            wake: self.wake_url.clone(),
            timeout: self.timeout,
        }
        .with_env()
    }

    pub fn pipeline(&self) -> Result<Pipeline, CliError> {
        Ok(match self.adapters {
            AdapterKind::Mock => Pipeline::mock(MOCK_PERCEPTION_SIGMA),
            AdapterKind::External => {
                let adapters = Adapters::external(&self.endpoints(), 16_000)
                    .map_err(|e| CliError::Usage(format!("external adapters: {e}")))?;
                let mut p = Pipeline::new(adapters);
                p.wall_clock = true;
                p
            }
        })
    }

    fn clock(&self) -> Box<dyn Clock + Send> {
        match self.adapters {
            AdapterKind::Mock => Box::new(SimClock::new()),
            AdapterKind::External => Box::new(MonotonicClock::new()),
        }
    }

    fn load_scene(&self) -> Result<Scene, CliError> {
        let path = self
            .scene
            .as_ref()
            .ok_or_else(|| CliError::Usage("--scene is required in this mode".into()))?;
        let setup = SceneSetup::load(path).map_err(io)?;
        let seed = (self.seed != 0).then(|| setup.seed.wrapping_add(self.seed));
        setup
            .build(seed)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Run the selected mode. Returns the process exit code.
pub fn run(args: &Args, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<u8, CliError> {
    match args.mode {
        Mode::Batch => batch(args, out),
        Mode::Interactive => interactive(args, input, out),
        Mode::Serve => serve(args, out),
    }
}

pub fn run_batch(args: &Args) -> Result<BatchResult, CliError> {
    let script = args
        .script
        .as_ref()
        .ok_or_else(|| CliError::Usage("batch mode needs --script".into()))?;
    let mut entries = load_script(script).map_err(|e| match e {
        ScriptError::Io { .. } => io(e),
        other => CliError::Usage(format!("{}: {other}", script.display())),
    })?;
    for e in &mut entries {
        e.seed = e.seed.wrapping_add(args.seed);
    }
    let mut plan = FaultPlan::none();
    if let Some(spec) = &args.faults {
        plan = spec
            .parse()
            .map_err(|e: fuzzyhri_core::orchestrator::script::FaultPlanError| {
                CliError::Usage(e.to_string())
            })?;
        if !spec.contains("seed") {
            plan.seed = args.seed;
        }
    }
    let base = script.parent().unwrap_or(Path::new("."));
    let mut pipeline = args.pipeline()?;
    let mut sink = |e: fuzzyhri_core::orchestrator::PipelineEvent| log::debug!("{e:?}");
    let sink: &mut dyn EventSink = &mut sink;
    pipeline
        .run_batch(&entries, base, &plan, sink)
        .map_err(|e| match e {
            PipelineError::Faults(f) => CliError::Usage(f.to_string()),
            other => CliError::Internal(other.to_string()),
        })
}

pub fn summary_table(report: &AggregateReport) -> String {
    let mut s = format!(
        "{:<8} {:>9} {:>9} {:>9} {:>9}\n",
        "metric", "mean", "sd", "min", "max"
    );
    for r in &report.rows {
        let m = r.summary;
        s += &format!(
            "{:<8} {:>9.2} {:>9.2} {:>9.2} {:>9.2}\n",
            r.metric, m.mean, m.sd, m.min, m.max
        );
    }
    let times: Vec<String> = Stage::ALL
        .iter()
        .map(|st| format!("{} {:.2}%", st.name(), report.time_contribution[st]))
        .chain([format!("C {:.2}%", report.overhead_share)])
        .collect();
    s += &format!("time share: {}\n", times.join(", "));
    if report.errors.no_failures {
        s += "error share: no failures\n";
    } else {
        let errs: Vec<String> = Stage::ALL
            .iter()
            .map(|st| format!("{} {:.2}%", st.name(), report.errors.percent[st]))
            .collect();
        s += &format!(
            "error share ({} failed): {}\n",
            report.errors.failed,
            errs.join(", ")
        );
    }
    s
}

fn batch(args: &Args, out: &mut dyn Write) -> Result<u8, CliError> {
    let result = run_batch(args)?;
    write_batch(&result, &args.out).map_err(io)?;
    let frame = result
        .trials
        .iter()
        .find_map(|t| t.final_state.as_ref().map(|s| s.frame))
        .unwrap_or_default();
    let plots = [
        (
            "trajectories.svg",
            plot::trajectory_svg(&result.trials, frame),
        ),
        ("contributions.svg", plot::contribution_svg(&result.report)),
    ];
    for (name, svg) in plots {
        std::fs::write(args.out.join(name), svg).map_err(io)?;
    }
    say!(out, "{} trials", result.report.trials)?;
    write_out(out, format_args!("{}", summary_table(&result.report)))?;
    let errored: Vec<&str> = result
        .trials
        .iter()
        .filter(|t| t.record.errored)
        .map(|t| t.record.id.as_str())
        .collect();
    say!(out, "reports written to {}", args.out.display())?;
    if errored.is_empty() {
        Ok(0)
    } else {
        say!(out, "errored trials: {}", errored.join(", "))?;
        Ok(CliError::Internal(String::new()).exit_code())
    }
}

/// What changed between two scene states, one line per change.
pub fn scene_delta(before: &SceneState, after: &SceneState) -> Vec<String> {
    let mut lines = vec![];
    for (label, b) in &after.objects {
        if before.objects.get(label) != Some(b) {
            let c = b.center();
            lines.push(format!("{label} now at ({:.1}, {:.1})", c.x, c.y));
        }
    }
    if before.held != after.held {
        lines.push(match &after.held {
            Some(h) => format!("held={h}"),
            None => "held=nothing".into(),
        });
    }
    lines
}

fn print_report(
    out: &mut dyn Write,
    r: &CommandReport,
    before: &SceneState,
    after: &SceneState,
) -> Result<(), CliError> {
    if !r.calls.is_empty() {
        say!(
            out,
            "actions: {}",
            fuzzyhri_core::grammar::to_canonical(&r.calls)
        )?;
    }
    if r.ok {
        say!(out, "ok")?;
    } else {
        say!(out, "error: {}", r.message)?;
    }
    for line in scene_delta(before, after) {
        say!(out, "{line}")?;
    }
    let times: Vec<String> = r
        .seconds
        .iter()
        .map(|(s, t)| format!("{s} {t:.2}s"))
        .collect();
    say!(out, "timings: {}", times.join(", "))
}

/// Wake, end-point and transcribe a recording, then run the transcript.
pub fn run_wav(
    pipeline: &mut Pipeline,
    scene: &mut Scene,
    path: &Path,
    clock: &mut dyn Clock,
    sink: &mut dyn EventSink,
) -> Result<Option<(String, CommandReport)>, CliError> {
    let samples = read_wav(path).map_err(|e| match e {
        AudioError::Format(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => io(format!("{}: {other}", path.display())),
    })?;
    let sr = pipeline.audio.chunk.sample_rate;
    let Some(t) = pipeline
        .listen(&samples)
        .map_err(|e| CliError::Internal(e.to_string()))?
    else {
        return Ok(None);
    };
    let start = ((t * sr as f64) as usize).min(samples.len());
    let spoken = std::fs::read_to_string(path.with_extension("txt"))
        .ok()
        .map(|s| s.trim().to_string());
    let rec = pipeline
        .record(&samples[start..], spoken)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let text = pipeline
        .adapters
        .transcriber
        .transcribe(&rec.clip, clock)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let report = pipeline.run_command(scene, CommandInput::Text(text.clone()), clock, sink);
    Ok(Some((text, report)))
}

/// One command per line until `quit`, `exit` or end of input. Failures
/// are reported and the session carries on.
pub fn interactive(
    args: &Args,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let mut scene = args.load_scene()?;
    let mut pipeline = args.pipeline()?;
    let mut clock = args.clock();
    let mut sink = fuzzyhri_core::orchestrator::discard();

    if let Some(wav) = &args.wav {
        let before = scene.state().clone();
        match run_wav(&mut pipeline, &mut scene, wav, clock.as_mut(), &mut sink)? {
            Some((text, r)) => {
                say!(out, "heard: {text}")?;
                print_report(out, &r, &before, scene.state())?;
            }
            None => say!(out, "no wake word in {}", wav.display())?,
        }
    }

    let mut line = String::new();
    loop {
        write_out(out, format_args!("> "))?;
        out.flush().map_err(io)?;
        line.clear();
        if input.read_line(&mut line).map_err(io)? == 0 {
            break;
        }
        let cmd = line.trim();
        match cmd {
            "" => continue,
            "quit" | "exit" => break,
            _ => {}
        }
        let cmd_input = if cmd.starts_with('[') {
            CommandInput::Actions(cmd.to_string())
        } else {
            CommandInput::Text(cmd.to_string())
        };
        let before = scene.state().clone();
        let r = pipeline.run_command(&mut scene, cmd_input, clock.as_mut(), &mut sink);
        print_report(out, &r, &before, scene.state())?;
    }
    say!(out, "bye")?;
    Ok(0)
}

fn serve(args: &Args, out: &mut dyn Write) -> Result<u8, CliError> {
    let scene = args.load_scene()?;
    let state = AppState::new(Session {
        pipeline: args.pipeline()?,
        scene,
        clock: args.clock(),
    });
    let addr = SocketAddr::from(([127, 0, 0, 1], args.port));
    say!(out, "serving on http://{addr}")?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(fuzzyhri_gateway::serve(state, addr))
        .map_err(io)?;
    Ok(0)
}
