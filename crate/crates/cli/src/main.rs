use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand, ValueEnum};

use mannsim::controller::ControlMode;
use mannsim_cli::commands;

#[derive(Parser)]
#[command(
    name = "mannsim",
    version,
    about = "Simulate memory-augmented adaptive backstepping controllers on strict-feedback plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Simulate one controller mode; writes trajectory.csv and metrics.csv
    Run {
        /// JSON experiment configuration
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Mann)]
        mode: ModeArg,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's weight-initialization seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run all three modes with identical parameters and compare settling times
    Compare {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Schema-check a config and sample-check the gain-bound assumption
    Validate { config: PathBuf },
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Nn,
    Mann,
    MannFrozen,
}

impl From<ModeArg> for ControlMode {
    fn from(arg: ModeArg) -> Self {
        match arg {
            ModeArg::Nn => ControlMode::Nn,
            ModeArg::Mann => ControlMode::Mann,
            ModeArg::MannFrozen => ControlMode::MannFrozen,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::Run {
            config,
            mode,
            out,
            seed,
        } => commands::cmd_run(&config, mode.into(), &out, seed),
        Commands::Compare { config, out, seed } => commands::cmd_compare(&config, &out, seed),
        Commands::Validate { config } => commands::cmd_validate(&config),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        process::exit(err.exit_code());
    }
}
