//! N-particle jump-diffusion: independent Brownian motion on the torus with
//! species-dependent diffusion, plus pairwise reactions firing at rate
//! `Phi_R(x_i - x_j) / N` on ordered pairs whose types match the input.

mod cell_list;
mod simulate;
mod state;
mod step;

pub use cell_list::CellList;
pub use simulate::{
    ensemble, simulate, write_counts_csv, write_histograms_csv, write_snapshots_csv, Record, SimulationConfig,
    Trajectory,
};
pub use state::{
    empirical_histogram, pair_rate, run_rng, sample_initial, sample_initial_with_rng, DiffusionSpec,
    ParticleError, ParticleState,
};
pub use step::{check_timestep, step, PairSearch, StepOptions, StepStats, DEFAULT_DT_BOUND};
