//! Command-line driver: mask generation, auto-encoder training, cycle
//! simulation, and cross-configuration comparison.
//!
//! Exit codes: 2 for argument errors, 3 for I/O and file-format errors,
//! 4 for domain/configuration errors.

mod cmd_ae;
mod cmd_compare;
mod cmd_mask;
mod cmd_simulate;
mod out;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "vitcod",
    version,
    about = "Sparse-attention accelerator toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune and reorder attention maps into fixed sparse masks.
    Mask(cmd_mask::MaskArgs),
    /// Train the Q/K auto-encoder and dump weights + loss trajectory.
    AeTrain(cmd_ae::AeTrainArgs),
    /// Simulate the workload on the registered accelerator models.
    Simulate(cmd_simulate::SimulateArgs),
    /// Build a speedup table from report files.
    Compare(cmd_compare::CompareArgs),
}

fn exit_code(err: &vitcod::Error) -> u8 {
    use vitcod::Error::*;
    match err {
        Argument(_) => 2,
        Io(_) | Format(_) | Corrupt(_) | Unsupported(_) | Json(_) => 3,
        Domain(_) | Shape(_) | Config(_) | Divergence(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mask(args) => cmd_mask::run(args),
        Command::AeTrain(args) => cmd_ae::run(args),
        Command::Simulate(args) => cmd_simulate::run(args),
        Command::Compare(args) => cmd_compare::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
