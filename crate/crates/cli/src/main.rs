use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "unidec", version, about = "Turbo and LDPC decoding on a shared trellis kernel")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `channel.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print code statistics or the trellis summary.
    Inspect {
        /// Code file (alist or base matrix), `wlan-648-r12`, or `lte`.
        /// Falls back to the code named by `--config`.
        code: Option<String>,
        /// Force the code file format.
        #[arg(long, value_parser = ["alist", "base"])]
        format: Option<String>,
    },
    /// Encode payload bits (one per line) into the transmitted stream.
    Encode {
        #[arg(long)]
        input: PathBuf,
        /// Write ideal channel LLRs of this magnitude instead of bits.
        #[arg(long)]
        llr: Option<f64>,
    },
    /// Decode channel LLRs (one per line) into hard bits.
    Decode {
        #[arg(long)]
        input: PathBuf,
        /// Also write the operation-count report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a BER/FER sweep and write CSV.
    Sweep,
    /// Operation counts of one noiseless decode plus the throughput model.
    Report,
    /// Evaluate `block_bits * clock_hz / (latency_cycles * iterations)`.
    Throughput {
        #[arg(long)]
        block_bits: f64,
        #[arg(long)]
        clock_hz: f64,
        #[arg(long)]
        latency_cycles: f64,
        #[arg(long, default_value_t = 1.0)]
        iterations: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = commands::Global {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        threads: cli.threads,
    };
    match cli.command {
        Command::Inspect { code, format } => commands::inspect(&global, code.as_deref(), format.as_deref()),
        Command::Encode { input, llr } => commands::encode(&global, &input, llr),
        Command::Decode { input, report } => commands::decode(&global, &input, report.as_deref()),
        Command::Sweep => commands::sweep(&global),
        Command::Report => commands::report(&global),
        Command::Throughput {
            block_bits,
            clock_hz,
            latency_cycles,
            iterations,
        } => commands::throughput(&global, block_bits, clock_hz, latency_cycles, iterations),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("unidec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
