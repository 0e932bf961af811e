use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phyanon_cli::selftest::Suite;
use phyanon_cli::{cmd_run, cmd_selftest, RunOverrides};

#[derive(Parser)]
#[command(name = "phyanon", version, about = "Sender anonymity sweeps for multi-antenna links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override output.path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the built-in property suites.
    Selftest {
        /// Corrupt one suite to check that failures are reported.
        #[arg(long, value_name = "SUITE")]
        inject_fault: Option<Suite>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            workers,
        } => cmd_run(&config, &RunOverrides { seed, out, workers }),
        Command::Selftest { inject_fault } => cmd_selftest(inject_fault),
    };
    ExitCode::from(code as u8)
}
