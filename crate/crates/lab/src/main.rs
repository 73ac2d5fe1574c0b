use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use critlab::{RunOptions, ScanSpec};

#[derive(Parser)]
#[command(name = "criticality-lab", version, about = "Simulate and analyse near-critical dynamics from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "CRITLAB_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat an experiment over values of one parameter.
    Scan {
        config: PathBuf,
        /// Dotted path of a scalar inside `params`, e.g. `kernel.exponential.beta`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Reuse the config seed for every value.
        #[arg(long)]
        common_seed: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, common } => critlab::run(
            &config,
            &RunOptions {
                output_dir: common.output_dir,
                threads: common.threads,
            },
        ),
        Command::Scan {
            config,
            param,
            values,
            common_seed,
            common,
        } => critlab::scan(
            &config,
            &ScanSpec {
                param,
                values: values.split(',').map(str::to_string).collect(),
                common_seed,
            },
            &RunOptions {
                output_dir: common.output_dir,
                threads: common.threads,
            },
        ),
    };
    match result {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("criticality-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
