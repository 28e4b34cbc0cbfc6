use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ioncomm_core::pipeline::{self, Command, Overrides, PipelineError, Settings};

/// Simulate, sample and fit detuned sideband dynamics of a trapped ion.
#[derive(Parser, Debug)]
#[command(name = "ioncomm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON config; built-in defaults apply to everything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides sampling.master_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Replicates per data point (overrides sampling.replicates).
    #[arg(long, global = true)]
    replicates: Option<u32>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Hamiltonian from a coupling scan, zeroth sideband, Fock input.
    Fig1,
    /// Hamiltonian versus Fock state.
    Fig2,
    /// Commutator from a coupling scan, second sideband, coherent input.
    Fig3,
    /// Commutator versus time for several sidebands.
    Fig4,
    /// Generic simulate / sample / fit / analyze pipeline.
    Run,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Fig1 => Command::Fig1,
            Cmd::Fig2 => Command::Fig2,
            Cmd::Fig3 => Command::Fig3,
            Cmd::Fig4 => Command::Fig4,
            Cmd::Run => Command::Run,
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, PipelineError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Config(format!("--threads: {e}")))?;
    }
    let command = Command::from(cli.command);
    let overrides = Overrides {
        seed: cli.seed,
        replicates: cli.replicates,
    };
    let settings = match &cli.config {
        Some(path) => Settings::load(command, path, overrides)?,
        None => Settings::from_json_str(command, "{}", overrides)?,
    };
    pipeline::execute(&settings, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
