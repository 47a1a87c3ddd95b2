mod analysis;
mod args;
mod output;
mod replay;
mod serve;
mod session;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use handshake_core::config::{EngineConfig, CONFIG_ENV};
use handshake_core::protocol::SessionSettings;

use args::{Cli, Command};
use output::Output;

/// Exit status 1: the invocation itself is wrong.
/// Exit status 2: the inputs could not be processed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub struct Context {
    pub config: EngineConfig,
    pub out: Output,
}

impl Context {
    pub fn settings(&self) -> SessionSettings {
        SessionSettings {
            mapping: self.config.mapping,
            calibration: self.config.calibration,
            loss: self.config.loss,
        }
    }
}

fn load_config(explicit: Option<PathBuf>) -> Result<EngineConfig, Failure> {
    let path = explicit.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        None => Ok(EngineConfig::default()),
        Some(p) => EngineConfig::load(&p)
            .map_err(|e| Failure::Data(anyhow::anyhow!("config {}: {e}", p.display()))),
    }
}

fn run(cli: Cli) -> CmdResult {
    let ctx = Context {
        config: load_config(cli.config)?,
        out: Output::new(cli.format),
    };
    match cli.command {
        Command::Session(a) => session::session(&ctx, a),
        Command::Replay(a) => replay::replay(&ctx, a),
        Command::Synth(a) => analysis::synth(&ctx, a),
        Command::Analyze(a) => analysis::analyze(&ctx, a),
        Command::Classify(a) => analysis::classify(&ctx, a),
        Command::Serve(a) => serve::serve(&ctx, a),
        Command::SimulateNet(a) => session::simulate_net(&ctx, a),
    }
}

/// The error chain joined with `: `, skipping causes whose text the
/// previous message already includes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
