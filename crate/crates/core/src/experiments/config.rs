//! Flat `key = value` experiment configuration with dotted section prefixes.
//!
//! ```text
//! experiment = mass_action_match
//! network.inline = kernel k = constant(rate=1); S1 + S2 -> S2 + S2 @ k
//! sigma = 0.05
//! sim.N = 256, 1024, 4096
//! ```
//!
//! Relative paths are resolved against the directory holding the config
//! file. `#` starts a comment. Every key not listed in [`KEYS`] is an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ExperimentError;
use crate::crn::{parse_network, ReactionNetwork};
use crate::field::DensityField;
use crate::meanfield::ConvolutionMethod;
use crate::particle::{check_timestep, DiffusionSpec, PairSearch, StepOptions, DEFAULT_DT_BOUND};

/// Every accepted key with its default; `None` means no default.
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("experiment", None),
    ("network.file", None),
    ("network.inline", None),
    ("dim", Some("1")),
    ("sigma", None),
    ("init.profile", Some("uniform")),
    ("init.masses", None),
    ("init.amplitude", Some("0.5")),
    ("init.file", None),
    ("sim.N", Some("1024")),
    ("sim.runs", Some("16")),
    ("sim.dt", Some("1e-3")),
    ("sim.t_final", Some("1")),
    ("sim.record_times", None),
    ("sim.seed", Some("0")),
    ("sim.bins", Some("32")),
    ("sim.pair_search", Some("thinning")),
    ("sim.dt_bound", Some("0.1")),
    ("sim.snapshots", Some("false")),
    ("pde.M", Some("64")),
    ("pde.dt", None),
    ("pde.t_final", None),
    ("pde.record_times", None),
    ("pde.convolution", Some("fft")),
    ("output.dir", Some("out")),
    ("ldp.grid", Some("64")),
    ("ldp.f", Some("cos_product")),
    ("ldp.n", Some("2, 8, 64, 256")),
    ("ldp.trials", Some("100000")),
    ("ldp.k_max", Some("6")),
    ("ldp.moment_n", Some("64")),
    ("ldp.moment_trials", Some("100000")),
    ("ldp.bootstrap", Some("200")),
    ("ldp.mz_n", Some("10")),
    ("ldp.mz_p", Some("2, 3, 4, 6")),
    ("ops.m", Some("8")),
    ("ops.N", Some("2, 3")),
    ("ops.pairs", Some("100")),
    ("ops.expm_states", Some("600")),
    ("ops.dynkin_N", Some("64")),
    ("ops.dynkin_runs", Some("2000")),
    ("ops.dynkin_t", Some("0.1")),
    ("ops.dynkin_dt", Some("0.01")),
    ("check.mass_tolerance", Some("0.02")),
    ("check.slope_min", Some("-0.75")),
    ("check.slope_max", Some("-0.25")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    MassActionMatch,
    ChaosScaling,
    Pde,
    LdpSuite,
    OperatorSuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::MassActionMatch => "mass_action_match",
            Experiment::ChaosScaling => "chaos_scaling",
            Experiment::Pde => "pde",
            Experiment::LdpSuite => "ldp_suite",
            Experiment::OperatorSuite => "operator_suite",
        }
    }

    fn needs_network(self) -> bool {
        self != Experiment::LdpSuite
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "simulate" => Experiment::Simulate,
            "mass_action_match" => Experiment::MassActionMatch,
            "chaos_scaling" => Experiment::ChaosScaling,
            "pde" => Experiment::Pde,
            "ldp_suite" => Experiment::LdpSuite,
            "operator_suite" => Experiment::OperatorSuite,
            other => {
                return Err(format!(
                    "unknown experiment {other:?} (simulate, mass_action_match, chaos_scaling, pde, ldp_suite, operator_suite)"
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// Spatially constant with the given species masses.
    Uniform { masses: Vec<f64> },
    /// `mass_ξ (1 + a cos(2π(x_1 - ξ/n)))`.
    Cosine { masses: Vec<f64>, amplitude: f64 },
    /// A field dump; the first time block is used.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFunction {
    CosProduct,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpSettings {
    pub grid: usize,
    pub f: PairFunction,
    pub n: Vec<usize>,
    pub trials: usize,
    pub k_max: u32,
    pub moment_n: usize,
    pub moment_trials: usize,
    pub bootstrap: usize,
    pub mz_n: usize,
    pub mz_p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSettings {
    pub m: usize,
    pub n_particles: Vec<usize>,
    pub pairs: usize,
    pub expm_states: usize,
    pub dynkin_n: usize,
    pub dynkin_runs: usize,
    pub dynkin_t: f64,
    pub dynkin_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSettings {
    pub mass_tolerance: f64,
    pub slope_min: f64,
    pub slope_max: f64,
}

/// A validated experiment with all defaults resolved.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub network: Option<ReactionNetwork>,
    pub dim: usize,
    pub sigma: Vec<f64>,
    pub init: InitialProfile,
    pub n_list: Vec<usize>,
    pub runs: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_times: Vec<f64>,
    pub seed: u64,
    pub bins: usize,
    pub step: StepOptions,
    pub snapshots: bool,
    pub grid: usize,
    pub pde_dt: f64,
    pub pde_t_final: f64,
    pub pde_record_times: Vec<f64>,
    pub convolution: ConvolutionMethod,
    pub output_dir: PathBuf,
    pub ldp: LdpSettings,
    pub ops: OperatorSettings,
    pub check: CheckSettings,
    /// Resolved `key = value` lines in [`KEYS`] order.
    echo: String,
    warnings: Vec<String>,
}

struct Raw {
    values: BTreeMap<String, (String, usize)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ExperimentError::config(lineno, format!("expected `key = value`, got {line:?}")));
            };
            let key = key.trim();
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(ExperimentError::config(lineno, format!("unknown key {key:?}")));
            }
            if values.insert(key.to_string(), (value.trim().to_string(), lineno)).is_some() {
                return Err(ExperimentError::config(lineno, format!("duplicate key {key:?}")));
            }
        }
        Ok(Raw { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values
            .get(key)
            .map(|(v, _)| v.as_str())
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d))
    }

    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(_, l)| *l)
    }

    fn require(&self, key: &str) -> Result<&str, ExperimentError> {
        self.get(key).ok_or_else(|| ExperimentError::config(0, format!("missing required key {key:?}")))
    }

    fn parse_as<T: FromStr>(&self, key: &str) -> Result<T, ExperimentError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.require(key)?;
        v.parse::<T>().map_err(|e| ExperimentError::config(self.line(key), format!("{key}: cannot parse {v:?}: {e}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ExperimentError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else { return Ok(Vec::new()) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| ExperimentError::config(self.line(key), format!("{key}: cannot parse {s:?}: {e}")))
            })
            .collect()
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::config(0, format!("{key}: {msg}"))
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::config(0, format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base)
    }

    /// Parses config text, resolving relative paths against `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let raw = Raw::parse(text)?;
        let experiment: Experiment = raw.parse_as("experiment")?;
        let mut warnings = Vec::new();

        let network = match (raw.values.get("network.file"), raw.values.get("network.inline")) {
            (Some(_), Some(_)) => return Err(bad("network", "give either network.file or network.inline, not both")),
            (Some((f, _)), None) => {
                let path = resolve(base, f);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| bad("network.file", format!("cannot read {}: {e}", path.display())))?;
                Some(parse_network(&text)?)
            }
            (None, Some((s, _))) => Some(parse_network(&s.replace(';', "\n"))?),
            (None, None) if experiment.needs_network() => {
                return Err(bad("network", "missing required key network.file or network.inline"))
            }
            (None, None) => None,
        };
        let n_species = network.as_ref().map_or(0, |n| n.n_species());

        let dim: usize = raw.parse_as("dim")?;
        if !(1..=3).contains(&dim) {
            return Err(bad("dim", format!("must be 1, 2 or 3, got {dim}")));
        }

        let sigma: Vec<f64> = raw.list("sigma")?;
        let sigma = match (sigma.len(), network.is_some()) {
            (_, false) => sigma,
            (0, true) => return Err(bad("sigma", "missing required key")),
            (1, true) => vec![sigma[0]; n_species],
            (k, true) if k == n_species => sigma,
            (k, true) => return Err(bad("sigma", format!("expected 1 or {n_species} values, got {k}"))),
        };
        if network.is_some() {
            DiffusionSpec::new(sigma.clone()).map_err(|e| bad("sigma", e))?;
        }

        let masses: Vec<f64> = raw.list("init.masses")?;
        let masses = if masses.is_empty() { vec![1.0 / n_species.max(1) as f64; n_species] } else { masses };
        if network.is_some() && masses.len() != n_species {
            return Err(bad("init.masses", format!("expected {n_species} values, got {}", masses.len())));
        }
        let init = match raw.require("init.profile")? {
            "uniform" => InitialProfile::Uniform { masses },
            "cosine" => {
                let amplitude: f64 = raw.parse_as("init.amplitude")?;
                if !(0.0..=1.0).contains(&amplitude) {
                    return Err(bad("init.amplitude", format!("must lie in [0, 1], got {amplitude}")));
                }
                InitialProfile::Cosine { masses, amplitude }
            }
            "file" => {
                let f = raw.require("init.file")?;
                let path = resolve(base, f);
                if !path.exists() {
                    return Err(bad("init.file", format!("{} does not exist", path.display())));
                }
                InitialProfile::File(path)
            }
            other => return Err(bad("init.profile", format!("unknown profile {other:?} (uniform, cosine, file)"))),
        };

        let n_list: Vec<usize> = raw.list("sim.N")?;
        if n_list.is_empty() || n_list.iter().any(|&n| n < 2) {
            return Err(bad("sim.N", "every particle count must be at least 2"));
        }
        let runs: usize = raw.parse_as("sim.runs")?;
        if runs == 0 {
            return Err(bad("sim.runs", "must be positive"));
        }
        let dt: f64 = raw.parse_as("sim.dt")?;
        let t_final: f64 = raw.parse_as("sim.t_final")?;
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(bad("sim.t_final", format!("must be finite and nonnegative, got {t_final}")));
        }
        let dt_bound: f64 = raw.parse_as("sim.dt_bound")?;
        if dt_bound > DEFAULT_DT_BOUND {
            warnings.push(format!(
                "sim.dt_bound = {dt_bound} relaxes the default {DEFAULT_DT_BOUND}; expect more stale-type rejections"
            ));
        }
        let pair_search: PairSearch = raw.parse_as("sim.pair_search")?;
        let step = StepOptions { pair_search, dt_bound };
        if let Some(net) = &network {
            check_timestep(net, dt, dt_bound).map_err(|e| bad("sim.dt", e))?;
        }

        let grid: usize = raw.parse_as("pde.M")?;
        if grid < 2 {
            return Err(bad("pde.M", "must be at least 2"));
        }
        let pde_dt = match raw.get("pde.dt") {
            Some(_) => raw.parse_as("pde.dt")?,
            None => dt,
        };
        if !(pde_dt.is_finite() && pde_dt > 0.0) {
            return Err(bad("pde.dt", format!("must be positive, got {pde_dt}")));
        }
        let pde_t_final = match raw.get("pde.t_final") {
            Some(_) => raw.parse_as("pde.t_final")?,
            None => t_final,
        };
        let convolution = match raw.require("pde.convolution")? {
            "fft" => ConvolutionMethod::Fft,
            "direct" => ConvolutionMethod::Direct,
            other => return Err(bad("pde.convolution", format!("unknown method {other:?} (fft, direct)"))),
        };

        let ldp = LdpSettings {
            grid: raw.parse_as("ldp.grid")?,
            f: match raw.require("ldp.f")? {
                "cos_product" => PairFunction::CosProduct,
                "zero" => PairFunction::Zero,
                other => return Err(bad("ldp.f", format!("unknown statistic {other:?} (cos_product, zero)"))),
            },
            n: raw.list("ldp.n")?,
            trials: raw.parse_as("ldp.trials")?,
            k_max: raw.parse_as("ldp.k_max")?,
            moment_n: raw.parse_as("ldp.moment_n")?,
            moment_trials: raw.parse_as("ldp.moment_trials")?,
            bootstrap: raw.parse_as("ldp.bootstrap")?,
            mz_n: raw.parse_as("ldp.mz_n")?,
            mz_p: raw.list("ldp.mz_p")?,
        };
        if ldp.mz_n == 0 || ldp.mz_n > 20 {
            return Err(bad("ldp.mz_n", "enumeration needs 1 <= n <= 20"));
        }
        let ops = OperatorSettings {
            m: raw.parse_as("ops.m")?,
            n_particles: raw.list("ops.N")?,
            pairs: raw.parse_as("ops.pairs")?,
            expm_states: raw.parse_as("ops.expm_states")?,
            dynkin_n: raw.parse_as("ops.dynkin_N")?,
            dynkin_runs: raw.parse_as("ops.dynkin_runs")?,
            dynkin_t: raw.parse_as("ops.dynkin_t")?,
            dynkin_dt: raw.parse_as("ops.dynkin_dt")?,
        };
        let check = CheckSettings {
            mass_tolerance: raw.parse_as("check.mass_tolerance")?,
            slope_min: raw.parse_as("check.slope_min")?,
            slope_max: raw.parse_as("check.slope_max")?,
        };

        let mut echo = String::new();
        for (key, _) in KEYS {
            if let Some(v) = raw.get(key) {
                let _ = writeln!(echo, "{key} = {v}");
            }
        }

        Ok(ExperimentConfig {
            experiment,
            network,
            dim,
            sigma,
            init,
            n_list,
            runs,
            dt,
            t_final,
            record_times: raw.list("sim.record_times")?,
            seed: raw.parse_as("sim.seed")?,
            bins: raw.parse_as("sim.bins")?,
            step,
            snapshots: raw.parse_as("sim.snapshots")?,
            grid,
            pde_dt,
            pde_t_final,
            pde_record_times: raw.list("pde.record_times")?,
            convolution,
            output_dir: resolve(base, raw.require("output.dir")?),
            ldp,
            ops,
            check,
            echo,
            warnings,
        })
    }

    /// The resolved configuration as `key = value` lines.
    pub fn echo(&self) -> &str {
        &self.echo
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn network(&self) -> Result<&ReactionNetwork, ExperimentError> {
        self.network.as_ref().ok_or_else(|| bad("network", "this experiment needs a network"))
    }

    pub fn diffusion(&self) -> Result<DiffusionSpec, ExperimentError> {
        DiffusionSpec::new(self.sigma.clone()).map_err(|e| bad("sigma", e))
    }

    /// Initial density on an `M^d` grid (files must already have that grid).
    pub fn initial_field(&self, m: usize) -> Result<DensityField, ExperimentError> {
        let n = self.network()?.n_species();
        let field = match &self.init {
            InitialProfile::Uniform { masses } => DensityField::uniform(self.dim, m, masses),
            InitialProfile::Cosine { masses, amplitude } => {
                let mut f = DensityField::from_fn(self.dim, m, n, |x, s| {
                    let phase = s as f64 / n as f64;
                    masses[s] * (1.0 + amplitude * (2.0 * std::f64::consts::PI * (x[0] - phase)).cos())
                });
                // cell-centre sampling leaves rounding in the total
                f.scale(masses.iter().sum::<f64>() / f.total_mass());
                f
            }
            InitialProfile::File(path) => {
                let file = std::fs::File::open(path)?;
                let mut blocks = DensityField::read_csv(std::io::BufReader::new(file))?;
                if blocks.is_empty() {
                    return Err(bad("init.file", "file holds no field"));
                }
                let f = blocks.swap_remove(0);
                if f.grid_size() != m || f.dim() != self.dim || f.n_species() != n {
                    return Err(bad(
                        "init.file",
                        format!(
                            "field has d={}, M={}, n={}; expected d={}, M={m}, n={n}",
                            f.dim(),
                            f.grid_size(),
                            f.n_species(),
                            self.dim
                        ),
                    ));
                }
                f
            }
        };
        field.check_nonnegative()?;
        field.check_normalized(1e-8)?;
        Ok(field)
    }
}
