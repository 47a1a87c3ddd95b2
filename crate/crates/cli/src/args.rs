use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use handshake_core::analysis::Emotion;

#[derive(Debug, Parser)]
#[command(name = "handshake", version, about = "Two-party haptic handshake engine")]
pub struct Cli {
    /// Engine config file (key = value). Falls back to $HANDSHAKE_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output format for result lines.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    JsonLines,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a live session against a UDP peer or a scripted loopback counterpart.
    Session(SessionArgs),
    /// Recompute a recording's stimulus trace and drive the actuator path.
    Replay(ReplayArgs),
    /// Generate the labeled synthetic dataset.
    Synth(SynthArgs),
    /// Build an emotion map from a directory of recordings.
    Analyze(AnalyzeArgs),
    /// Classify one recording against an emotion map.
    Classify(ClassifyArgs),
    /// Serve the web console endpoint.
    Serve(ServeArgs),
    /// Run a loopback session through a lossy, jittery simulated link.
    #[command(name = "simulate-net")]
    SimulateNet(SimulateNetArgs),
}

/// The scripted hand that stands in for a glove.
#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    /// Peak grip of the scripted hand, 0..1.
    #[arg(long, default_value_t = 1.0)]
    pub peak_grip: f64,
    /// Seconds the scripted hand holds its peak grip.
    #[arg(long, default_value_t = 2.0)]
    pub hold_s: f64,
    /// Grip ramp speed in 1/s, both closing and opening.
    #[arg(long, default_value_t = 2.0)]
    pub grip_speed: f64,
    /// Wrist swing amplitude in millimeters.
    #[arg(long, default_value_t = 50.0)]
    pub swing_mm: f64,
    #[arg(long, default_value_t = 2.0)]
    pub swing_hz: f64,
    /// Seconds between handshakes (default: one handshake plus 0.7 s).
    #[arg(long)]
    pub period_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    /// Local UDP port or address to bind.
    #[arg(long, value_name = "PORT|ADDR", default_value = "0")]
    pub listen: String,
    /// Remote peer, HOST:PORT.
    #[arg(long, required_unless_present = "loopback", conflicts_with = "loopback")]
    pub peer: Option<String>,
    /// Run against a scripted counterpart instead of a network peer.
    #[arg(long)]
    pub loopback: bool,
    /// Write this side's view to a recording file.
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<Emotion>,
    #[arg(long, default_value = "p00")]
    pub participant: String,
    /// Recording id (default: the record file's stem).
    #[arg(long)]
    pub id: Option<String>,
    /// Session length in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// Randomize the loopback counterpart from this seed.
    #[arg(long, requires = "loopback")]
    pub seed: Option<u64>,
    /// Run the loopback session as fast as possible instead of in real time.
    #[arg(long, requires = "loopback")]
    pub fast: bool,
    #[arg(long, default_value_t = 100)]
    pub tick_hz: u32,
    /// Remote hold window before fading, overriding the config.
    #[arg(long)]
    pub hold_ms: Option<u64>,
    /// Staleness at which remote grip reaches zero, overriding the config.
    #[arg(long)]
    pub fade_ms: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub peer_id: u32,
    #[command(flatten)]
    pub profile: ProfileArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BusKind {
    /// Simulated seven-motor device.
    Sim,
    /// Raw frame capture file.
    Capture,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, value_enum, default_value_t = BusKind::Sim)]
    pub bus: BusKind,
    /// Capture file written with `--bus capture`.
    #[arg(long, value_name = "FILE", required_if_eq("bus", "capture"))]
    pub capture_out: Option<PathBuf>,
    /// Skip real-time pacing.
    #[arg(long)]
    pub instant: bool,
    /// Write the recomputed trace, one tick per line.
    #[arg(long, value_name = "FILE")]
    pub trace_out: Option<PathBuf>,
    /// Recompute with the current config instead of the recorded settings;
    /// differences from stored stimuli are reported, not fatal.
    #[arg(long)]
    pub audition: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub dir: PathBuf,
    #[arg(long, value_name = "MAP")]
    pub out: PathBuf,
    /// Cluster count (default from the config, 8).
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub map: PathBuf,
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:8080")]
    pub http: String,
    /// Emotion map used to classify completed handshakes.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Directory of recordings offered for replay joins.
    #[arg(long, value_name = "DIR")]
    pub recordings: Option<PathBuf>,
    /// Static console assets served at `/`.
    #[arg(long, value_name = "DIR")]
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateNetArgs {
    /// Datagram loss probability.
    #[arg(long, default_value_t = 0.1)]
    pub loss: f64,
    /// One-way delay as MEAN±JITTER with a unit, e.g. `50±20ms` or `50+-20ms`.
    #[arg(long, default_value = "50±20ms")]
    pub jitter: String,
    /// Probability one byte of a datagram is flipped.
    #[arg(long, default_value_t = 0.0)]
    pub corrupt: f64,
    /// Seconds the counterpart transmits before going silent.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Seconds the session keeps running after the counterpart falls silent.
    #[arg(long, default_value_t = 1.0)]
    pub tail: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub tick_hz: u32,
    /// Counterpart clock minus ours, in microseconds.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub skew_us: i64,
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
    /// Exit with status 2 unless stale ticks stay under 5% and the
    /// distribution is all-zero within 500 ms of silence.
    #[arg(long)]
    pub check: bool,
    #[command(flatten)]
    pub profile: ProfileArgs,
}
