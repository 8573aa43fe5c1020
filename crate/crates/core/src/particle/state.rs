use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::crn::{CrnError, ReactionNetwork};
use crate::field::{DensityField, FieldError};
use crate::kernels::min_image;

#[derive(Debug, Error)]
pub enum ParticleError {
    #[error("pair rate needs two distinct particles, got i = j = {0}")]
    SameParticle(usize),
    #[error("particle index {index} out of range for N = {n}")]
    Index { index: usize, n: usize },
    #[error("dt * n_r * max ||Phi_R||_inf = {value:.4} exceeds the bound {bound} (dt={dt}, n_r={n_r}, max ||Phi_R||_inf={linf})")]
    TimestepBound { value: f64, bound: f64, dt: f64, n_r: usize, linf: f64 },
    #[error("timestep must be finite and positive, got {0}")]
    Timestep(f64),
    #[error("need at least one particle")]
    Empty,
    #[error("diffusion spec has {got} species, expected {expected}")]
    DiffusionSpecies { expected: usize, got: usize },
    #[error("diffusion coefficient for species {species} must be finite and nonnegative, got {value}")]
    Sigma { species: usize, value: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-species diffusion coefficients `sigma(xi)`; a particle of type `xi`
/// gets increments of standard deviation `sigma(xi) * sqrt(dt)` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    sigma: Vec<f64>,
}

impl DiffusionSpec {
    pub fn new(sigma: Vec<f64>) -> Result<Self, ParticleError> {
        if let Some((species, &value)) = sigma.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s >= 0.0)) {
            return Err(ParticleError::Sigma { species, value });
        }
        Ok(DiffusionSpec { sigma })
    }

    pub fn uniform(n_species: usize, sigma: f64) -> Self {
        DiffusionSpec::new(vec![sigma; n_species]).expect("valid uniform sigma")
    }

    pub fn n_species(&self) -> usize {
        self.sigma.len()
    }

    #[inline]
    pub fn sigma(&self, species: usize) -> f64 {
        self.sigma[species]
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma
    }
}

/// Positions in `[0,1)^d`, 0-based types, clock, and the run's RNG stream.
#[derive(Debug, Clone)]
pub struct ParticleState {
    dim: usize,
    n_species: usize,
    positions: Vec<f64>,
    types: Vec<usize>,
    pub time: f64,
    pub(crate) rng: ChaCha8Rng,
}

/// RNG stream for one run: the root seed picks the key, the run index the
/// stream, so runs are independent and reproducible in isolation.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl ParticleState {
    /// Builds a state from explicit data; coordinates are wrapped.
    pub fn from_parts(
        dim: usize,
        n_species: usize,
        positions: Vec<f64>,
        types: Vec<usize>,
        rng: ChaCha8Rng,
    ) -> Self {
        assert_eq!(positions.len(), types.len() * dim, "positions must hold N * d coordinates");
        assert!(types.iter().all(|&t| t < n_species), "type out of range");
        let positions = positions.into_iter().map(wrap_unit).collect();
        ParticleState { dim, n_species, positions, types, time: 0.0, rng }
    }

    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub(crate) fn types_mut(&mut self) -> &mut [usize] {
        &mut self.types
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Minimum-image displacement `x_i - x_j` into `out`.
    #[inline]
    pub fn displacement(&self, i: usize, j: usize, out: &mut [f64]) {
        let (a, b) = (self.position(i), self.position(j));
        for k in 0..self.dim {
            out[k] = min_image(a[k] - b[k]);
        }
    }

    /// Particle count per species.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_species];
        for &t in &self.types {
            c[t] += 1;
        }
        c
    }
}

/// `N` i.i.d. draws from `rho0` using `seed` (stream 0).
pub fn sample_initial(rho0: &DensityField, n: usize, seed: u64) -> Result<ParticleState, ParticleError> {
    sample_initial_with_rng(rho0, n, run_rng(seed, 0))
}

/// Draws `(cell, species)` with probability equal to its mass, then a
/// uniform point in the cell.
pub fn sample_initial_with_rng(
    rho0: &DensityField,
    n: usize,
    mut rng: ChaCha8Rng,
) -> Result<ParticleState, ParticleError> {
    if n == 0 {
        return Err(ParticleError::Empty);
    }
    rho0.check_nonnegative()?;
    rho0.check_normalized(1e-8)?;
    let dim = rho0.dim();
    let m = rho0.grid_size();
    let cells = rho0.cells();
    let mut cumulative = Vec::with_capacity(rho0.values().len());
    let mut acc = 0.0;
    for &v in rho0.values() {
        acc += v;
        cumulative.push(acc);
    }
    let total = acc;
    let h = 1.0 / m as f64;
    let mut positions = Vec::with_capacity(n * dim);
    let mut types = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        // skip zero-mass slots: first index whose cumulative exceeds target
        let idx = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
        let species = idx / cells;
        let mut cell = idx % cells;
        for _ in 0..dim {
            let c = cell % m;
            cell /= m;
            positions.push(wrap_unit((c as f64 + rng.random::<f64>()) * h));
        }
        types.push(species);
    }
    Ok(ParticleState { dim, n_species: rho0.n_species(), positions, types, time: 0.0, rng })
}

/// `(1/N) * [types (i, j) == input of R] * Phi_R(x_i - x_j)`.
pub fn pair_rate(
    state: &ParticleState,
    net: &ReactionNetwork,
    i: usize,
    j: usize,
    reaction: usize,
) -> Result<f64, ParticleError> {
    let n = state.n();
    for index in [i, j] {
        if index >= n {
            return Err(ParticleError::Index { index, n });
        }
    }
    if i == j {
        return Err(ParticleError::SameParticle(i));
    }
    let r = &net.reactions()[reaction];
    if !r.matches_input(state.types[i], state.types[j]) {
        return Ok(0.0);
    }
    let mut dx = vec![0.0; state.dim];
    state.displacement(i, j, &mut dx);
    Ok(r.kernel.eval(&dx) / n as f64)
}

/// Binned empirical measure as a density on a `bins^d` grid; integrates to 1.
pub fn empirical_histogram(state: &ParticleState, bins: usize) -> DensityField {
    assert!(bins >= 1, "bins_per_dim must be positive");
    let mut field = DensityField::zeros(state.dim, bins, state.n_species);
    let cells = field.cells();
    let norm = state.n() as f64 * field.cell_volume();
    let mut counts = vec![0u64; field.values().len()];
    for i in 0..state.n() {
        let mut cell = 0;
        let mut stride = 1;
        for &x in state.position(i) {
            let b = ((x * bins as f64) as usize).min(bins - 1);
            cell += b * stride;
            stride *= bins;
        }
        counts[state.types[i] * cells + cell] += 1;
    }
    for (v, &c) in field.values_mut().iter_mut().zip(&counts) {
        *v = c as f64 / norm;
    }
    field.time = state.time;
    field
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;
    use crate::stats::chi_square_uniform;

    #[test]
    fn uniform_single_species_passes_chi_square() {
        let rho0 = DensityField::uniform(1, 16, &[1.0]);
        let s = sample_initial(&rho0, 1000, 11).unwrap();
        assert!(s.types().iter().all(|&t| t == 0));
        let mut counts = vec![0u64; 16];
        for &x in s.positions() {
            counts[(x * 16.0) as usize] += 1;
        }
        let (_, p) = chi_square_uniform(&counts);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn point_mass_cell() {
        let mut rho0 = DensityField::zeros(1, 8, 2);
        rho0.species_mut(1)[5] = 8.0;
        let s = sample_initial(&rho0, 500, 3).unwrap();
        assert!(s.types().iter().all(|&t| t == 1));
        assert!(s.positions().iter().all(|&x| (0.625..0.75).contains(&x)));
    }

    #[test]
    fn species_proportions_concentrate() {
        let rho0 = DensityField::uniform(1, 4, &[0.3, 0.7]);
        let n = 10_000;
        let s = sample_initial(&rho0, n, 5).unwrap();
        let c1 = s.counts()[0] as f64;
        let sd = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((c1 - 3000.0).abs() <= 3.0 * sd, "count {c1}");
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        let rho0 = DensityField::uniform(1, 4, &[0.3, 0.3]);
        assert!(matches!(sample_initial(&rho0, 10, 1), Err(ParticleError::Field(FieldError::Unnormalized(_)))));
        let mut neg = DensityField::uniform(1, 4, &[0.5, 0.5]);
        neg.species_mut(0)[0] = -0.1;
        neg.species_mut(0)[1] += 0.1;
        assert!(matches!(sample_initial(&neg, 10, 1), Err(ParticleError::Field(FieldError::Negative { .. }))));
    }

    fn two_particles(types: [usize; 2], xs: [f64; 2], n_total: usize) -> ParticleState {
        let mut positions = vec![0.5; n_total];
        positions[0] = xs[0];
        positions[1] = xs[1];
        let mut t = vec![0; n_total];
        t[0] = types[0];
        t[1] = types[1];
        ParticleState::from_parts(1, 2, positions, t, run_rng(0, 0))
    }

    #[test]
    fn pair_rate_examples() {
        let net = parse_network("kernel k = tophat(radius=0.25, rate=5)\nS1 + S2 -> S2 + S2 @ k").unwrap();
        let s = two_particles([0, 1], [0.3, 0.4], 100);
        assert!((pair_rate(&s, &net, 0, 1, 0).unwrap() - 0.05).abs() < 1e-15);
        // reversed order does not match the ordered input
        assert_eq!(pair_rate(&s, &net, 1, 0, 0).unwrap(), 0.0);
        let far = two_particles([0, 1], [0.0, 0.5], 100);
        assert_eq!(pair_rate(&far, &net, 0, 1, 0).unwrap(), 0.0);
        assert!(matches!(pair_rate(&s, &net, 2, 2, 0), Err(ParticleError::SameParticle(2))));
    }

    #[test]
    fn histogram_of_single_bin() {
        let s = ParticleState::from_parts(1, 2, vec![0.1; 10], vec![0; 10], run_rng(0, 0));
        let h = empirical_histogram(&s, 4);
        assert_eq!(h.get(0, 0), 4.0);
        assert!(h.values().iter().enumerate().all(|(i, &v)| i == 0 || v == 0.0));
        assert!((h.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_of_uniform_sample() {
        let n = 100_000;
        let rho0 = DensityField::uniform(1, 1, &[1.0]);
        let s = sample_initial(&rho0, n, 9).unwrap();
        let h = empirical_histogram(&s, 8);
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        let p: f64 = 1.0 / 8.0;
        let tol = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
        for c in 0..8 {
            let mass = h.get(0, c) / 8.0;
            assert!((mass - p).abs() < tol, "bin {c}: {mass}");
        }
    }
}
