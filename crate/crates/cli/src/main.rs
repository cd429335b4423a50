//! `asvlab`: system identification, training, evaluation and benchmarks
//! from one configuration file.

mod bench;
mod common;
mod eval;
mod sysid;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::Failure;

#[derive(Parser)]
#[command(name = "asvlab", version, about = "Batch surface-vessel simulator, PPO trainer and evaluator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit drag coefficients and thruster curves, or synthesize test logs.
    #[command(subcommand)]
    Sysid(sysid::SysidCommand),
    /// Train one agent variant.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint on the goal grid.
    Eval(eval::EvalArgs),
    /// Measure batch stepping throughput.
    Bench(bench::BenchArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sysid(cmd) => sysid::run(cmd),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Bench(args) => bench::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(u8::from(usage));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
