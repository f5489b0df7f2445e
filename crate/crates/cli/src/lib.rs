//! Command-line driver: frame-sequence enhancement, temporal smoothing and
//! the combined pipeline.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use config::{FileConfig, FrameRange, PipelineConfig, RunArgs};

#[derive(Debug, Parser)]
#[command(name = "lowlight", version, about = "Low-light UHR video enhancement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance every frame with the generator and write the results.
    Enhance(RunArgs),
    /// Motion-compensated temporal smoothing of a frame sequence.
    Smooth(RunArgs),
    /// Enhance, then smooth, streaming frames through memory.
    Pipeline(RunArgs),
    /// Check a weight file and print its architecture and tensors.
    ValidateWeights {
        /// Path to an LLGW file.
        path: PathBuf,
    },
}

/// Executes a parsed command. Progress goes to `out`, one JSON line per frame.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    match &cli.command {
        Command::Enhance(args) => commands::enhance(&PipelineConfig::resolve(args)?, out),
        Command::Smooth(args) => commands::smooth(&PipelineConfig::resolve(args)?, out),
        Command::Pipeline(args) => commands::pipeline(&PipelineConfig::resolve(args)?, out),
        Command::ValidateWeights { path } => commands::validate_weights(path, out),
    }
}
