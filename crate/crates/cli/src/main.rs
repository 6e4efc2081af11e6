use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use darksteady::config::{parse_config_for, Experiment};
use darksteady::engine::Integrator;
use darksteady::experiments::run_to_dir;
use darksteady::Error;

/// Dissipative NV-center entanglement simulator.
#[derive(Debug, Parser)]
#[command(name = "darksteady", version)]
struct Cli {
    /// fig2, fig2-inset, fig3, t2-inset, two-nuclei, steady, evolve or sweep
    experiment: String,
    /// Configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory for data.csv, summary.txt and plot.gp
    #[arg(long)]
    out: PathBuf,
    /// Seed for random initial states and noise realizations
    #[arg(long)]
    seed: Option<u64>,
    /// rk4 or propagator
    #[arg(long)]
    integrator: Option<String>,
}

fn run(cli: &Cli) -> Result<(), Error> {
    let experiment: Experiment = cli.experiment.parse()?;
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config { line: None, key: None, message: format!("{}: {e}", cli.config.display()) })?;
    let mut cfg = parse_config_for(&text, Some(experiment))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(name) = &cli.integrator {
        cfg.integrator = name.parse::<Integrator>()?;
    }
    let out = run_to_dir(&cfg, &cli.out)?;
    print!("{}", out.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("darksteady: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
