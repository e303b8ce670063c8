//! `fpaxos`: quorum analysis, simulation, sweeps and exhaustive checking.
//!
//! Exit status is 0 on success, 1 when a safety violation was found and 2
//! for bad usage or any other error.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpaxos_cli::{analyze, args, check, replay, show, simulate, sweep};

#[derive(Parser, Debug)]
#[command(
    name = "fpaxos",
    version,
    about = "Flexible Paxos quorum analysis, simulation and checking"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Quorum system tools.
    #[command(subcommand)]
    Quorum(QuorumCmd),
    /// Exhaustively check single-decree safety for one quorum system.
    Check(check::CheckArgs),
    /// Run one simulation or a scripted scenario.
    Simulate(Box<simulate::SimulateArgs>),
    /// Run a grid of simulations and tabulate the metrics.
    Sweep(sweep::SweepArgs),
    /// Re-execute a counterexample through the protocol code.
    Replay(replay::ReplayArgs),
    /// Pretty-print a trace or counterexample file.
    Show(show::ShowArgs),
}

#[derive(Subcommand, Debug)]
enum QuorumCmd {
    /// Print quorum sizes, intersection and failure tolerance.
    Analyze {
        #[command(flatten)]
        quorum: args::QuorumArgs,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Quorum(QuorumCmd::Analyze { quorum, json }) => analyze::run(quorum, *json),
        Cmd::Check(a) => check::run(a),
        Cmd::Simulate(a) => simulate::run(a),
        Cmd::Sweep(a) => sweep::run(a),
        Cmd::Replay(a) => replay::run(a),
        Cmd::Show(a) => show::run(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
