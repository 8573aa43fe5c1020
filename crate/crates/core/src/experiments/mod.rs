//! Config-driven experiment suites and the checks behind the command line.

mod builtin;
mod config;
mod output;
mod suites;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

pub use builtin::{builtin_configs, BUILTIN_SUITES};
pub use config::{
    CheckSettings, Experiment, ExperimentConfig, InitialProfile, LdpSettings, OperatorSettings, PairFunction, KEYS,
};
pub use output::{write_summary_csv, OutputDir};

use crate::par::Execution;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error{}: {msg}", if *.line > 0 { format!(" (line {})", .line) } else { String::new() })]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Crn(#[from] crate::crn::CrnError),
    #[error(transparent)]
    Particle(#[from] crate::particle::ParticleError),
    #[error(transparent)]
    Pde(#[from] crate::meanfield::PdeError),
    #[error(transparent)]
    MassAction(#[from] crate::meanfield::MassActionError),
    #[error(transparent)]
    Entropy(#[from] crate::entropy::EntropyError),
    #[error(transparent)]
    Ldp(#[from] crate::ldp::LdpError),
    #[error(transparent)]
    Operator(#[from] crate::operators::OperatorError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub(crate) fn config(line: usize, msg: impl Into<String>) -> Self {
        ExperimentError::Config { line, msg: msg.into() }
    }

    /// 2 for problems with the input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config { .. } | ExperimentError::Crn(_) => 2,
            _ => 1,
        }
    }
}

/// One pass/fail line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    /// Acceptance criterion number, if the row belongs to one.
    pub id: Option<u8>,
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(id: Option<u8>, name: &str, value: f64, bound: impl Into<String>, pass: bool) -> Self {
        Criterion { id, name: name.to_string(), value, bound: bound.into(), pass, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub output_dir: PathBuf,
    pub criteria: Vec<Criterion>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Runs the configured suite, writing its CSVs, `config.resolved`,
/// `summary.csv` and `run.log` into the output directory.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Outcome, ExperimentError> {
    let started = Instant::now();
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write("config.resolved", |w| {
        use std::io::Write;
        write!(w, "{}", config.echo())
    })?;
    for warning in config.warnings() {
        eprintln!("warning: {warning}");
    }
    let criteria = match config.experiment {
        Experiment::Simulate => suites::simulate(config, exec, &mut out)?,
        Experiment::MassActionMatch => suites::mass_action_match(config, exec, &mut out)?,
        Experiment::ChaosScaling => suites::chaos_scaling(config, exec, &mut out)?,
        Experiment::Pde => suites::pde(config, &mut out)?,
        Experiment::LdpSuite => suites::ldp_suite(config, exec, &mut out)?,
        Experiment::OperatorSuite => suites::operator_suite(config, exec, &mut out)?,
    };
    out.write_summary(&criteria)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let elapsed = started.elapsed().as_secs_f64();
    let log = config.output_dir.join("run.log");
    let mut text = format!(
        "experiment={} finished_unix={stamp} elapsed_s={elapsed:.3} passed={}\n",
        config.experiment.name(),
        criteria.iter().all(|c| c.pass)
    );
    for warning in config.warnings() {
        text.push_str(&format!("warning: {warning}\n"));
    }
    std::fs::write(&log, text)?;
    Ok(Outcome { output_dir: config.output_dir.clone(), criteria, files: out.files().to_vec() })
}

/// Runs every config twice into `scratch/a` and `scratch/b` and compares
/// all CSV outputs byte for byte.
pub fn check_determinism(
    configs: &[(String, String)],
    scratch: &Path,
    exec: Execution,
) -> Result<Criterion, ExperimentError> {
    let mut compared = 0usize;
    let mut mismatched = Vec::new();
    for (label, text) in configs {
        let mut dirs = Vec::new();
        for rep in ["a", "b"] {
            let base = scratch.join(rep);
            std::fs::create_dir_all(&base)?;
            let config = ExperimentConfig::from_text(text, &base)?;
            let outcome = run_experiment(&config, exec)?;
            dirs.push(outcome);
        }
        for file in &dirs[0].files {
            if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                continue;
            }
            let rel = file.strip_prefix(&dirs[0].output_dir).expect("file under output dir");
            let other = dirs[1].output_dir.join(rel);
            compared += 1;
            if std::fs::read(file)? != std::fs::read(&other)? {
                mismatched.push(format!("{label}/{}", rel.display()));
            }
        }
    }
    let pass = mismatched.is_empty() && compared > 0;
    Ok(Criterion::new(Some(10), "determinism", mismatched.len() as f64, "0 differing files", pass)
        .with_detail(format!("{compared} csv files compared; differing: {}", mismatched.join(" "))))
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let id = self.id.map_or_else(|| "  -".to_string(), |i| format!("{i:>3}"));
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {id} {:<28} value={:<12.4e} bound: {}", self.name, self.value, self.bound)?;
        if !self.detail.is_empty() {
            write!(f, "  ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Runs a built-in suite with outputs under `base`, returning every row.
/// `determinism` and `all` also run the byte-for-byte repeat check in
/// `base/determinism`.
pub fn run_suite(suite: &str, base: &Path, exec: Execution) -> Result<Vec<Criterion>, ExperimentError> {
    let configs = builtin_configs(suite).ok_or_else(|| {
        ExperimentError::config(0, format!("unknown suite {suite:?} (expected one of {})", BUILTIN_SUITES.join(", ")))
    })?;
    let mut criteria = Vec::new();
    if suite != "determinism" {
        for (_, text) in &configs {
            let config = ExperimentConfig::from_text(text, base)?;
            criteria.extend(run_experiment(&config, exec)?.criteria);
        }
    }
    if suite == "determinism" || suite == "all" {
        let repeat = builtin_configs("determinism").expect("determinism suite");
        criteria.push(check_determinism(&repeat, &base.join("determinism"), exec)?);
    }
    std::fs::create_dir_all(base)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(base.join("summary.csv"))?);
    write_summary_csv(&mut file, &criteria)?;
    std::io::Write::flush(&mut file)?;
    Ok(criteria)
}
