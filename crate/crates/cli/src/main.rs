use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use miub_cli::error::exit;
use miub_cli::pipeline::{execute, resolve_output_dir};
use miub_cli::{with_threads, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "miub", version, about = "Constant-modulus waveform design experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Design a waveform and write it with the optimizer trace.
    Optimize(Args),
    /// ROC and MSE for the waveform in the output directory.
    Evaluate(Args),
    /// Autocorrelation and ambiguity of the waveform in the output directory.
    Analyze(Args),
    /// Model diagnostics and Monte-Carlo cross-checks.
    Validate(Args),
    /// Optimize, evaluate and analyze.
    Run(Args),
    /// Print a starting config.
    Template {
        /// Full-size problem instead of the small one.
        #[arg(long)]
        full: bool,
    },
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cmd: Command, args: Args) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = resolve_output_dir(&config, args.out.as_deref());
    let manifest = with_threads(args.threads, || execute(&config, &out, cmd))??;
    println!("{} complete: {} files in {}", manifest.run_id, manifest.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Evaluate(a) => (Command::Evaluate, a),
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Template { full } => {
            let c = if full { ExperimentConfig::full_scale() } else { ExperimentConfig::toy() };
            return match c.to_toml_string() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit::FAILURE as u8)
                }
            };
        }
    };
    match run(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
