use std::path::PathBuf;
use std::process::ExitCode;

use anderson_core::io::to_json_string;
use anderson_core::run::{run, ErrorRecord};
use anderson_core::{report, Error};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "anderson",
    version,
    about = "Lattice Anderson Hamiltonian experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Parent directory for the run directory (default: `output.dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print tables for a finished run and write plot-ready TSV files next to it.
    Report { run_dir: PathBuf },
}

fn fail(err: &Error) -> ExitCode {
    let record = to_json_string(&ErrorRecord::new(err)).unwrap_or_else(|_| err.to_string());
    eprint!("{record}");
    ExitCode::from(if matches!(err, Error::Config(_) | Error::Toml(_)) {
        2
    } else {
        1
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            workers,
        } => match run(&config, out.as_deref(), workers) {
            Ok(dir) => {
                println!("{}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Report { run_dir } => match report::report(&run_dir) {
            Ok(out) => {
                print!("{}", out.text);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
