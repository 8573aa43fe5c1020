//! The jump part of the N-particle generator and its adjoint on a finite
//! grid-times-species state space, the explicit rate matrix, and Monte-Carlo
//! Dynkin residuals of the particle simulator.
//!
//! A single-particle site is `s = cell * n + ξ` with `P = m^d n` sites; the
//! joint state of `N` particles is `Σ_i s_i P^i`.

use std::io::Write;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::crn::ReactionNetwork;
use crate::par::{map_indexed, Execution};
use crate::particle::{run_rng, sample_initial_with_rng, step, ParticleError, ParticleState, SimulationConfig};
use crate::stats::Summary;

/// Largest state space that may be enumerated.
pub const MAX_STATES: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("state space has {0} states, above the cap {MAX_STATES}")]
    TooLarge(u128),
    #[error("vector has length {got}, state space has {expected} states")]
    Length { expected: usize, got: usize },
    #[error("network has {network} species, state space has {space}")]
    Species { network: usize, space: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Particle(#[from] ParticleError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteStateSpace {
    dim: usize,
    m: usize,
    n_particles: usize,
    n_species: usize,
    sites: usize,
    states: usize,
}

impl DiscreteStateSpace {
    pub fn new(dim: usize, m: usize, n_particles: usize, n_species: usize) -> Result<Self, OperatorError> {
        if dim == 0 || m == 0 || n_particles < 2 || n_species == 0 {
            return Err(OperatorError::Parameter(format!(
                "need d, m, n >= 1 and N >= 2 (d={dim}, m={m}, N={n_particles}, n={n_species})"
            )));
        }
        let sites = (m as u128).pow(dim as u32) * n_species as u128;
        let states = sites.checked_pow(n_particles as u32).unwrap_or(u128::MAX);
        if states > MAX_STATES as u128 {
            return Err(OperatorError::TooLarge(states));
        }
        Ok(DiscreteStateSpace { dim, m, n_particles, n_species, sites: sites as usize, states: states as usize })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn cells(&self) -> usize {
        self.sites / self.n_species
    }

    /// Weight of one joint state: `(m^{-d})^N`.
    pub fn state_volume(&self) -> f64 {
        (1.0 / self.cells() as f64).powi(self.n_particles as i32)
    }

    pub fn decode(&self, mut state: usize, out: &mut [usize]) {
        for s in out.iter_mut().take(self.n_particles) {
            *s = state % self.sites;
            state /= self.sites;
        }
    }

    pub fn encode(&self, sites: &[usize]) -> usize {
        sites.iter().rev().fold(0, |acc, &s| acc * self.sites + s)
    }

    pub fn label(&self) -> String {
        format!("d{}_m{}_n{}_N{}", self.dim, self.m, self.n_species, self.n_particles)
    }

    /// `v ∘ τ_{ab}`: entry `y` of the result is `v(τ y)`.
    pub fn transpose(&self, v: &[f64], a: usize, b: usize) -> Vec<f64> {
        let mut s = vec![0; self.n_particles];
        (0..self.states)
            .map(|y| {
                self.decode(y, &mut s);
                s.swap(a, b);
                v[self.encode(&s)]
            })
            .collect()
    }

    fn check(&self, v: &[f64]) -> Result<(), OperatorError> {
        if v.len() != self.states {
            return Err(OperatorError::Length { expected: self.states, got: v.len() });
        }
        Ok(())
    }

    /// `Φ_R` between two cells, for every reaction, evaluated at the
    /// grid displacement.
    fn kernel_tables(&self, net: &ReactionNetwork) -> Vec<Vec<f64>> {
        let cells = self.cells();
        let coords = |c: usize| -> Vec<f64> {
            let mut c = c;
            (0..self.dim)
                .map(|_| {
                    let v = (c % self.m) as f64 / self.m as f64;
                    c /= self.m;
                    v
                })
                .collect()
        };
        let pts: Vec<Vec<f64>> = (0..cells).map(coords).collect();
        net.reactions()
            .iter()
            .map(|r| {
                let mut t = Vec::with_capacity(cells * cells);
                for a in &pts {
                    for b in &pts {
                        let dx: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                        t.push(r.kernel.eval(&dx));
                    }
                }
                t
            })
            .collect()
    }
}

/// One active transition out of a state.
struct Transition {
    to: usize,
    rate: f64,
}

/// Visits every `(R, i, j)` with `χ_R^-` active at `state`, passing the
/// post-jump state `Θ_R^{ij} y` and the rate `Φ_R(x_i - x_j) / N`.
fn for_each_jump(
    space: &DiscreteStateSpace,
    net: &ReactionNetwork,
    tables: &[Vec<f64>],
    state: usize,
    sites: &mut [usize],
    mut f: impl FnMut(Transition),
) {
    let n = space.n_species;
    let cells = space.cells();
    let inv_n = 1.0 / space.n_particles as f64;
    space.decode(state, sites);
    for (r, rx) in net.reactions().iter().enumerate() {
        for i in 0..space.n_particles {
            for j in 0..space.n_particles {
                if i == j {
                    continue;
                }
                let (ci, xi) = (sites[i] / n, sites[i] % n);
                let (cj, xj) = (sites[j] / n, sites[j] % n);
                if !rx.matches_input(xi, xj) {
                    continue;
                }
                let phi = tables[r][ci * cells + cj];
                if phi == 0.0 {
                    continue;
                }
                let (si, sj) = (sites[i], sites[j]);
                sites[i] = ci * n + rx.output.0;
                sites[j] = cj * n + rx.output.1;
                let to = space.encode(sites);
                sites[i] = si;
                sites[j] = sj;
                f(Transition { to, rate: phi * inv_n });
            }
        }
    }
}

fn check_species(space: &DiscreteStateSpace, net: &ReactionNetwork) -> Result<(), OperatorError> {
    if net.n_species() != space.n_species {
        return Err(OperatorError::Species { network: net.n_species(), space: space.n_species });
    }
    Ok(())
}

/// `(S_N φ)(y) = N^{-1} Σ_R Σ_{i≠j} χ_R^-(ξ_i, ξ_j) Φ_R(x_i - x_j) [φ(Θ_R^{ij} y) - φ(y)]`.
pub fn apply_jump_generator(
    space: &DiscreteStateSpace,
    net: &ReactionNetwork,
    phi: &[f64],
) -> Result<Vec<f64>, OperatorError> {
    space.check(phi)?;
    check_species(space, net)?;
    let tables = space.kernel_tables(net);
    let mut sites = vec![0; space.n_particles];
    let mut terms = Vec::new();
    Ok((0..space.states)
        .map(|y| {
            terms.clear();
            for_each_jump(space, net, &tables, y, &mut sites, |t| terms.push(t.rate * (phi[t.to] - phi[y])));
            canonical_sum(&mut terms)
        })
        .collect())
}

/// `(S_N^* ψ)(y) = N^{-1} Σ_R Σ_{i≠j} Φ_R(x_i - x_j) [χ_R^+(ξ_i, ξ_j) ψ(Θ̃_R^{ij} y) - χ_R^-(ξ_i, ξ_j) ψ(y)]`.
pub fn apply_jump_adjoint(
    space: &DiscreteStateSpace,
    net: &ReactionNetwork,
    psi: &[f64],
) -> Result<Vec<f64>, OperatorError> {
    space.check(psi)?;
    check_species(space, net)?;
    let tables = space.kernel_tables(net);
    let n = space.n_species;
    let cells = space.cells();
    let inv_n = 1.0 / space.n_particles as f64;
    let mut sites = vec![0; space.n_particles];
    let mut terms = Vec::new();
    Ok((0..space.states)
        .map(|y| {
            space.decode(y, &mut sites);
            terms.clear();
            for (r, rx) in net.reactions().iter().enumerate() {
                for i in 0..space.n_particles {
                    for j in 0..space.n_particles {
                        if i == j {
                            continue;
                        }
                        let (ci, xi) = (sites[i] / n, sites[i] % n);
                        let (cj, xj) = (sites[j] / n, sites[j] % n);
                        let phi = tables[r][ci * cells + cj] * inv_n;
                        if phi == 0.0 {
                            continue;
                        }
                        if rx.matches_output(xi, xj) {
                            let (si, sj) = (sites[i], sites[j]);
                            sites[i] = ci * n + rx.input.0;
                            sites[j] = cj * n + rx.input.1;
                            terms.push(phi * psi[space.encode(&sites)]);
                            sites[i] = si;
                            sites[j] = sj;
                        }
                        if rx.matches_input(xi, xj) {
                            terms.push(-phi * psi[y]);
                        }
                    }
                }
            }
            canonical_sum(&mut terms)
        })
        .collect())
}

/// Sums in sorted order, so the result depends only on the multiset of terms.
/// Relabelling particles permutes the terms, so this keeps `τ S = S τ` exact.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// `Σ_y u(y) v(y) vol`.
pub fn inner(space: &DiscreteStateSpace, u: &[f64], v: &[f64]) -> f64 {
    space.state_volume() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// Forward rate matrix `Q` in compressed-row form: `dψ/dt = Q ψ`, with
/// `Q[y, z]` the rate of `z -> y` off the diagonal and minus the total exit
/// rate of `y` on it.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl RateMatrix {
    pub fn build(space: &DiscreteStateSpace, net: &ReactionNetwork) -> Result<Self, OperatorError> {
        check_species(space, net)?;
        let tables = space.kernel_tables(net);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut sites = vec![0; space.n_particles];
        for z in 0..space.states {
            let mut exit = 0.0;
            for_each_jump(space, net, &tables, z, &mut sites, |t| {
                exit += t.rate;
                triplets.push((t.to, z, t.rate));
            });
            triplets.push((z, z, -exit));
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_start = vec![0; space.states + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_start[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..space.states {
            row_start[r + 1] += row_start[r];
        }
        Ok(RateMatrix { n: space.states, row_start, cols, vals })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| (self.row_start[r]..self.row_start[r + 1]).map(|e| self.vals[e] * v[self.cols[e]]).sum())
            .collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &vr) in v.iter().enumerate() {
            for e in self.row_start[r]..self.row_start[r + 1] {
                out[self.cols[e]] += self.vals[e] * vr;
            }
        }
        out
    }

    /// Largest `|Σ_y Q[y, z]|` over columns.
    pub fn max_column_sum(&self) -> f64 {
        self.apply_transpose(&vec![1.0; self.n]).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest off-diagonal entry (0 when none).
    pub fn min_off_diagonal(&self) -> f64 {
        let mut min: f64 = 0.0;
        for r in 0..self.n {
            for e in self.row_start[r]..self.row_start[r + 1] {
                if self.cols[e] != r {
                    min = min.min(self.vals[e]);
                }
            }
        }
        min
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for e in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.cols[e])] = self.vals[e];
            }
        }
        m
    }
}

/// Largest `|ψ(t)∘τ - ψ(t)|` over all transpositions for `ψ(t) = exp(tQ) ψ0`.
/// Dense, so only for small spaces.
pub fn exchangeability_defect(
    space: &DiscreteStateSpace,
    q: &RateMatrix,
    psi0: &[f64],
    t: f64,
) -> Result<f64, OperatorError> {
    space.check(psi0)?;
    if space.states > 4096 {
        return Err(OperatorError::Parameter(format!("dense exponential limited to 4096 states, got {}", space.states)));
    }
    let e = (q.to_dense() * t).exp();
    let psi = e * nalgebra::DVector::from_column_slice(psi0);
    let psi = psi.as_slice();
    let mut worst: f64 = 0.0;
    for a in 0..space.n_particles {
        for b in a + 1..space.n_particles {
            let swapped = space.transpose(psi, a, b);
            for (x, y) in swapped.iter().zip(psi) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    Ok(worst)
}

/// A test function `φ(x, ξ)` on one particle together with its Laplacian in `x`.
pub struct Observable<'a> {
    pub value: &'a (dyn Fn(&[f64], usize) -> f64 + Sync),
    pub laplacian: &'a (dyn Fn(&[f64], usize) -> f64 + Sync),
}

fn empirical_mean(state: &ParticleState, obs: &Observable) -> f64 {
    (0..state.n()).map(|i| (obs.value)(state.position(i), state.types()[i])).sum::<f64>() / state.n() as f64
}

/// `L φ̄` for `φ̄ = N^{-1} Σ_i φ(y_i)`: the diffusion part plus the jump part
/// `N^{-2} Σ_R Σ_{i≠j} χ_R^- Φ_R [φ(x_i,k') + φ(x_j,l') - φ(x_i,k) - φ(x_j,l)]`.
fn generator_of_mean(state: &ParticleState, net: &ReactionNetwork, sigma: &[f64], obs: &Observable) -> f64 {
    let n = state.n();
    let mut diff = 0.0;
    for i in 0..n {
        let xi = state.types()[i];
        diff += 0.5 * sigma[xi] * sigma[xi] * (obs.laplacian)(state.position(i), xi);
    }
    let mut jump = 0.0;
    let mut dx = vec![0.0; state.dim()];
    for rx in net.reactions().iter().filter(|r| !r.kernel.is_zero()) {
        let (k, l) = rx.input;
        let (k2, l2) = rx.output;
        for i in 0..n {
            if state.types()[i] != k {
                continue;
            }
            for j in 0..n {
                if i == j || state.types()[j] != l {
                    continue;
                }
                state.displacement(i, j, &mut dx);
                let phi = rx.kernel.eval(&dx);
                if phi == 0.0 {
                    continue;
                }
                let (xi, xj) = (state.position(i), state.position(j));
                jump += phi
                    * ((obs.value)(xi, k2) + (obs.value)(xj, l2) - (obs.value)(xi, k) - (obs.value)(xj, l));
            }
        }
    }
    diff / n as f64 + jump / (n * n) as f64
}

/// Per-run Dynkin residual `φ̄(t) - φ̄(0) - ∫_0^t L φ̄(s) ds` (trapezoid rule on
/// the simulation grid), summarized over `runs` independent runs.
pub fn dynkin_residual(
    config: &SimulationConfig,
    obs: &Observable,
    runs: usize,
    exec: Execution,
) -> Result<Summary, OperatorError> {
    let t = config.t_final;
    if !(t > 0.0 && t <= 0.1) {
        return Err(OperatorError::Parameter(format!("horizon must lie in (0, 0.1], got {t}")));
    }
    if runs < 2 {
        return Err(OperatorError::Parameter("need at least two runs".into()));
    }
    let steps = (t / config.dt).round() as usize;
    if steps == 0 || ((steps as f64 * config.dt) - t).abs() > 1e-9 * t {
        return Err(OperatorError::Parameter(format!("horizon {t} is not a multiple of dt {}", config.dt)));
    }
    let sigma = config.diffusion.values().to_vec();
    let per_run = map_indexed(runs, exec, |r| -> Result<f64, ParticleError> {
        let mut state = sample_initial_with_rng(&config.rho0, config.n, run_rng(config.seed, r as u64))?;
        let start = empirical_mean(&state, obs);
        let mut g_prev = generator_of_mean(&state, &config.network, &sigma, obs);
        let mut integral = 0.0;
        for _ in 0..steps {
            step(&mut state, &config.network, &config.diffusion, config.dt, &config.step)?;
            let g = generator_of_mean(&state, &config.network, &sigma, obs);
            integral += 0.5 * config.dt * (g_prev + g);
            g_prev = g;
        }
        Ok(empirical_mean(&state, obs) - start - integral)
    });
    let values = per_run.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Summary::of(&values))
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRow {
    pub check: String,
    pub space: String,
    pub n: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn write_results_csv<W: Write>(w: &mut W, rows: &[OperatorRow]) -> std::io::Result<()> {
    writeln!(w, "check,space,N,residual,tolerance,pass")?;
    for r in rows {
        writeln!(w, "{},{},{},{:?},{:?},{}", r.check, r.space, r.n, r.residual, r.tolerance, r.pass)?;
    }
    Ok(())
}
