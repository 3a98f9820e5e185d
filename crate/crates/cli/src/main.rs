//! `qcnn` — train, evaluate, and inspect quaternion convolutional networks.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (or a failed gradient
//! check), 2 on a usage or configuration error.

mod config;
mod commands;
mod opts;
mod specs;

use clap::Parser;
use std::process::ExitCode;

/// A failure with an exit-code classification: usage problems (bad flags,
/// bad config values, unknown presets) exit 2, everything else exits 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<qcnn_core::Error> for Failure {
    fn from(e: qcnn_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = opts::Cli::parse();
    let result = match cli.command {
        opts::Command::Train(args) => commands::train::run(args),
        opts::Command::Eval(args) => commands::eval::run(args),
        opts::Command::Denoise(args) => commands::denoise::run(args),
        opts::Command::Gradcheck(args) => commands::gradcheck::run(args),
        opts::Command::Audit(args) => commands::audit::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
