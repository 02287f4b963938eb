//! `dmapper`: build, evaluate and tune Mapper graphs from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{DiagramArgs, EvalArgs, GenArgs, KmerArgs};
use crate::config::ConfigArgs;
use crate::error::Failure;

#[derive(Parser, Debug)]
#[command(name = "dmapper", version, about = "Classic and distribution-guided Mapper graphs")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a Mapper graph and write it as JSON.
    Run(ConfigArgs),
    /// Silhouette, diagram, bootstrap band, TSR and adjusted score.
    Eval(EvalArgs),
    /// Grid search over p or alpha, scored by the adjusted score.
    Tune(ConfigArgs),
    /// Extended persistence diagram of a graph.
    Diagram(DiagramArgs),
    /// Synthetic datasets.
    Gen(GenArgs),
    /// k-mer frequency distance matrix of a FASTA file.
    Kmer(KmerArgs),
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot start thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::Eval(a) => commands::eval(a),
        Command::Tune(a) => commands::tune(a),
        Command::Diagram(a) => commands::diagram(a),
        Command::Gen(a) => commands::gen(a),
        Command::Kmer(a) => commands::kmer(a),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
