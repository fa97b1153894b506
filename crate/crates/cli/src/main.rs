use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use spectrust_cli::config::{CalibrateSection, ExperimentKind, RunConfig};
use spectrust_cli::output_dir;
use spectrust_cli::run::execute;
use spectrust_core::par::Execution;

#[derive(Parser)]
#[command(name = "spectrust", version, about = "Trust-based spectrum sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Disable the worker pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Time real nonce search for 1..=max-z leading zero bits.
    Calibrate {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=28))]
        max_z: u32,
        #[arg(long, default_value_t = 20)]
        runs: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        sequential: bool,
    },
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (cfg, out, sequential) = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            format: Format::Csv,
            sequential,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = output_dir(out.as_deref(), cfg.output_dir.as_deref(), "out");
            (cfg, dir, sequential)
        }
        Command::Calibrate {
            max_z,
            runs,
            seed,
            out,
            format: Format::Csv,
            sequential,
        } => {
            let mut cfg = RunConfig::parse(&format!("seed = {seed}\nexperiment = \"calibrate\"\n"))?;
            cfg.calibrate = CalibrateSection { max_z, runs };
            cfg.validate()?;
            let dir = output_dir(out.as_deref(), None, "out/calibrate");
            (cfg, dir, sequential)
        }
    };
    let output = execute(&cfg, exec(sequential))?;
    output.write_to(&out)?;
    print!("{}", output.summary);
    if cfg.experiment == ExperimentKind::Calibrate {
        println!("wrote {}", out.join("calibration.csv").display());
    } else {
        println!("artifacts in {}", out.display());
    }
    Ok(output.all_pass())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
