use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use topdp::harness::{parse_config, run_experiment, sweep, HarnessError, SweepAxis};
use topdp::privacy::{calibrate_sigma0, PrivacyBudget};

#[derive(Parser)]
#[command(name = "topdp", version, about = "Topology-aware private decentralized SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `--key value` overrides applied after the config file.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Run one experiment per value of a config axis.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Print the initial noise multiplier for a budget.
    Calibrate {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        iterations: u64,
        #[arg(long)]
        dataset_size: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = parse_config(config.as_deref(), &overrides)?;
            let out = run_experiment(&cfg)?;
            println!("{}", out.summary_line());
        }
        Command::Sweep {
            axis,
            values,
            config,
            overrides,
        } => {
            let cfg = parse_config(config.as_deref(), &overrides)?;
            for (v, out) in values.iter().zip(sweep(&cfg, axis, &values)?) {
                println!("{axis}={v} {}", out.summary_line());
            }
        }
        Command::Calibrate {
            epsilon,
            delta,
            iterations,
            dataset_size,
        } => {
            let budget = PrivacyBudget::new(epsilon, delta)?;
            println!("{}", calibrate_sigma0(budget, iterations, dataset_size));
        }
    }
    Ok(())
}
