use std::io::Write;

use super::state::{empirical_histogram, run_rng, sample_initial_with_rng, DiffusionSpec, ParticleError, ParticleState};
use super::step::{check_timestep, step, StepOptions, StepStats};
use crate::crn::{CrnError, ReactionNetwork};
use crate::field::DensityField;
use crate::par::{map_indexed, Execution};

/// Everything one particle run needs.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub network: ReactionNetwork,
    pub diffusion: DiffusionSpec,
    pub rho0: DensityField,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Times at which observables are recorded; empty means `[0, t_final]`.
    pub record_times: Vec<f64>,
    pub seed: u64,
    /// Histogram bins per axis, if histograms are wanted.
    pub hist_bins: Option<usize>,
    pub snapshots: bool,
    pub step: StepOptions,
}

impl SimulationConfig {
    pub fn new(network: ReactionNetwork, diffusion: DiffusionSpec, rho0: DensityField, n: usize) -> Self {
        SimulationConfig {
            network,
            diffusion,
            rho0,
            n,
            dt: 1e-3,
            t_final: 0.0,
            record_times: Vec::new(),
            seed: 0,
            hist_bins: None,
            snapshots: false,
            step: StepOptions::default(),
        }
    }

    fn validate(&self) -> Result<(), ParticleError> {
        if self.rho0.n_species() != self.network.n_species() {
            return Err(CrnError::SpeciesMismatch { field: self.rho0.n_species(), network: self.network.n_species() }.into());
        }
        if self.diffusion.n_species() != self.network.n_species() {
            return Err(ParticleError::DiffusionSpecies {
                expected: self.network.n_species(),
                got: self.diffusion.n_species(),
            });
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(ParticleError::Timestep(self.t_final));
        }
        check_timestep(&self.network, self.dt, self.step.dt_bound)
    }

    fn resolved_record_times(&self) -> Vec<f64> {
        if self.record_times.is_empty() {
            if self.t_final > 0.0 {
                vec![0.0, self.t_final]
            } else {
                vec![0.0]
            }
        } else {
            let mut t: Vec<f64> = self.record_times.iter().map(|&t| t.clamp(0.0, self.t_final)).collect();
            t.sort_by(f64::total_cmp);
            t.dedup();
            t
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: f64,
    pub counts: Vec<usize>,
    pub histogram: Option<DensityField>,
    /// Flat positions and types.
    pub snapshot: Option<(Vec<f64>, Vec<usize>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run: u64,
    pub records: Vec<Record>,
    pub stats: StepStats,
}

fn observe(state: &ParticleState, time: f64, config: &SimulationConfig) -> Record {
    Record {
        time,
        counts: state.counts(),
        histogram: config.hist_bins.map(|b| {
            let mut h = empirical_histogram(state, b);
            h.time = time;
            h
        }),
        snapshot: config.snapshots.then(|| (state.positions().to_vec(), state.types().to_vec())),
    }
}

/// One run: initial sample and dynamics both draw from stream `run` of `seed`.
pub fn simulate(config: &SimulationConfig, run: u64) -> Result<Trajectory, ParticleError> {
    config.validate()?;
    let mut state = sample_initial_with_rng(&config.rho0, config.n, run_rng(config.seed, run))?;
    let times = config.resolved_record_times();
    let mut records = Vec::with_capacity(times.len());
    let mut stats = StepStats::default();
    let mut next = 0;
    let mut k: u64 = 0;
    let mut now = 0.0;
    let tol = 1e-9 * config.dt;
    loop {
        while next < times.len() && times[next] <= now + tol {
            records.push(observe(&state, times[next], config));
            next += 1;
        }
        if next == times.len() || now >= config.t_final - tol {
            break;
        }
        let target = ((k + 1) as f64 * config.dt).min(config.t_final);
        let dt = target - now;
        if dt <= tol {
            now = config.t_final;
            continue;
        }
        stats.merge(step(&mut state, &config.network, &config.diffusion, dt, &config.step)?);
        k += 1;
        now = if (k as f64 * config.dt) >= config.t_final - tol { config.t_final } else { k as f64 * config.dt };
        state.time = now;
    }
    while next < times.len() {
        records.push(observe(&state, times[next], config));
        next += 1;
    }
    Ok(Trajectory { run, records, stats })
}

/// Runs `0..runs` independently; results are ordered by run index.
pub fn ensemble(config: &SimulationConfig, runs: usize, exec: Execution) -> Result<Vec<Trajectory>, ParticleError> {
    config.validate()?;
    map_indexed(runs, exec, |r| simulate(config, r as u64)).into_iter().collect()
}

pub fn write_counts_csv<W: Write>(w: &mut W, trajectories: &[Trajectory]) -> std::io::Result<()> {
    let n_species = trajectories.first().and_then(|t| t.records.first()).map_or(0, |r| r.counts.len());
    write!(w, "time,run")?;
    for s in 1..=n_species {
        write!(w, ",species_{s}")?;
    }
    writeln!(w)?;
    for t in trajectories {
        for r in &t.records {
            write!(w, "{:?},{}", r.time, t.run)?;
            for c in &r.counts {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_histograms_csv<W: Write>(w: &mut W, trajectories: &[Trajectory]) -> std::io::Result<()> {
    writeln!(w, "time,run,species,bin_index,density")?;
    for t in trajectories {
        for r in &t.records {
            if let Some(h) = &r.histogram {
                for s in 0..h.n_species() {
                    for (c, v) in h.species(s).iter().enumerate() {
                        writeln!(w, "{:?},{},{},{},{:?}", r.time, t.run, s + 1, c, v)?;
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn write_snapshots_csv<W: Write>(w: &mut W, trajectories: &[Trajectory], dim: usize) -> std::io::Result<()> {
    write!(w, "run,time,particle")?;
    for a in 1..=dim {
        write!(w, ",x_{a}")?;
    }
    writeln!(w, ",type")?;
    for t in trajectories {
        for r in &t.records {
            if let Some((pos, types)) = &r.snapshot {
                for (i, ty) in types.iter().enumerate() {
                    write!(w, "{},{:?},{}", t.run, r.time, i)?;
                    for x in &pos[i * dim..(i + 1) * dim] {
                        write!(w, ",{x:?}")?;
                    }
                    writeln!(w, ",{}", ty + 1)?;
                }
            }
        }
    }
    Ok(())
}
