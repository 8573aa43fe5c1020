use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chaoskit::experiments::{run_experiment, run_suite, Criterion, Experiment, ExperimentConfig, ExperimentError};
use chaoskit::par::{configure_threads_from_env, Execution};

#[derive(Parser)]
#[command(name = "chaoskit", version, about = "Reaction-diffusion particle systems and their mean-field limit")]
struct Cli {
    /// Run every loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in acceptance suite.
    Check {
        /// mass_action, chaos, pde, ldp, operators, determinism or all
        suite: String,
        #[arg(long, default_value = "chaoskit-check")]
        out: PathBuf,
    },
    /// Solve the mean-field PDE for a config.
    Pde {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the concentration checks for a config.
    Ldp {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, forced: Option<Experiment>, out: Option<PathBuf>) -> Result<ExperimentConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let has_experiment = text.lines().any(|l| l.split('=').next().is_some_and(|k| k.trim() == "experiment"));
    let mut config = match forced {
        Some(e) if !has_experiment => ExperimentConfig::from_text(&format!("experiment = {}\n{text}", e.name()), base)?,
        _ => ExperimentConfig::from_text(&text, base)?,
    };
    if let Some(e) = forced {
        config.experiment = e;
    }
    if let Some(out) = out {
        config.output_dir = out;
    }
    Ok(config)
}

fn report(criteria: &[Criterion]) -> ExitCode {
    for c in criteria {
        println!("{c}");
    }
    let failed = criteria.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        println!("all {} checks passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} checks failed", criteria.len());
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::available() };
    let config = match cli.command {
        Command::Check { suite, out } => return Ok(report(&run_suite(&suite, &out, exec)?)),
        Command::Run { config, out } => load(&config, None, out)?,
        Command::Pde { config, out } => load(&config, Some(Experiment::Pde), out)?,
        Command::Ldp { config, out } => load(&config, Some(Experiment::LdpSuite), out)?,
    };
    let outcome = run_experiment(&config, exec)?;
    let code = report(&outcome.criteria);
    println!("outputs in {}", outcome.output_dir.display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads_from_env();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
