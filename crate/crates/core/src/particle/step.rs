use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::cell_list::CellList;
use super::state::{wrap_unit, DiffusionSpec, ParticleError, ParticleState};
use crate::crn::ReactionNetwork;

/// Default cap on `dt * n_r * max_R ||Phi_R||_inf`.
pub const DEFAULT_DT_BOUND: f64 = 0.1;

/// How candidate reacting pairs are found in the reaction substep.
///
/// All three give every ordered pair with rate `lambda` an independent firing
/// probability `1 - exp(-lambda dt)`. `Exhaustive` and `CellList` visit
/// positive-rate pairs in the same `(reaction, i, j)` order and consume the
/// same random numbers, so their trajectories are bit-identical. `Thinning`
/// samples candidates against the bound `||Phi_R||_inf / N` with geometric
/// skips and costs `O(N ||Phi|| dt)` per step instead of `O(N^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSearch {
    #[default]
    Thinning,
    Exhaustive,
    CellList,
}

impl std::str::FromStr for PairSearch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "thinning" => Ok(PairSearch::Thinning),
            "exhaustive" => Ok(PairSearch::Exhaustive),
            "celllist" | "cell_list" => Ok(PairSearch::CellList),
            other => Err(format!("unknown pair search {other:?} (thinning, exhaustive, celllist)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub pair_search: PairSearch,
    pub dt_bound: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { pair_search: PairSearch::default(), dt_bound: DEFAULT_DT_BOUND }
    }
}

/// Firing bookkeeping for one or more steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    /// Sampled firings before conflict resolution.
    pub proposed: u64,
    pub accepted: u64,
    /// Firings dropped because a participant already changed type this step.
    pub rejected_stale: u64,
}

impl StepStats {
    pub fn merge(&mut self, other: StepStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
        self.rejected_stale += other.rejected_stale;
    }

    pub fn rejection_fraction(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.rejected_stale as f64 / self.proposed as f64
        }
    }
}

pub fn check_timestep(net: &ReactionNetwork, dt: f64, bound: f64) -> Result<(), ParticleError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ParticleError::Timestep(dt));
    }
    let linf = net.max_linf();
    let value = dt * net.n_reactions() as f64 * linf;
    if value > bound {
        return Err(ParticleError::TimestepBound { value, bound, dt, n_r: net.n_reactions(), linf });
    }
    Ok(())
}

/// Advances the state by `dt`: Brownian substep, then one reaction substep
/// with rates frozen at the post-diffusion configuration.
pub fn step(
    state: &mut ParticleState,
    net: &ReactionNetwork,
    diffusion: &DiffusionSpec,
    dt: f64,
    opts: &StepOptions,
) -> Result<StepStats, ParticleError> {
    check_timestep(net, dt, opts.dt_bound)?;
    if diffusion.n_species() != state.n_species() {
        return Err(ParticleError::DiffusionSpecies { expected: state.n_species(), got: diffusion.n_species() });
    }
    diffuse(state, diffusion, dt);
    let firings = match opts.pair_search {
        PairSearch::Thinning => propose_thinning(state, net, dt),
        PairSearch::Exhaustive => propose_enumerated(state, net, dt, false),
        PairSearch::CellList => propose_enumerated(state, net, dt, true),
    };
    let stats = apply_firings(state, net, firings);
    state.time += dt;
    Ok(stats)
}

fn diffuse(state: &mut ParticleState, diffusion: &DiffusionSpec, dt: f64) {
    let dim = state.dim();
    let sqrt_dt = dt.sqrt();
    let n = state.n();
    for i in 0..n {
        let sd = diffusion.sigma(state.types()[i]) * sqrt_dt;
        if sd == 0.0 {
            continue;
        }
        for a in 0..dim {
            let z: f64 = state.rng.sample(StandardNormal);
            let p = &mut state.positions_mut()[i * dim + a];
            *p = wrap_unit(*p + sd * z);
        }
    }
}

/// One `(reaction, i, j)` firing candidate.
type Firing = (usize, usize, usize);

fn indices_by_type(state: &ParticleState) -> Vec<Vec<usize>> {
    let mut by_type = vec![Vec::new(); state.n_species()];
    for (i, &t) in state.types().iter().enumerate() {
        by_type[t].push(i);
    }
    by_type
}

fn propose_enumerated(state: &mut ParticleState, net: &ReactionNetwork, dt: f64, use_cells: bool) -> Vec<Firing> {
    let n = state.n();
    let inv_n = 1.0 / n as f64;
    let by_type = indices_by_type(state);
    let mut dx = vec![0.0; state.dim()];
    let mut firings = Vec::new();
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for (ri, r) in net.reactions().iter().enumerate() {
        if r.kernel.is_zero() {
            continue;
        }
        let (k, l) = r.input;
        let cells = match (use_cells, r.kernel.support_radius()) {
            (true, Some(radius)) => Some(CellList::build(state.positions(), state.dim(), radius, &by_type[l])),
            _ => None,
        };
        for &i in &by_type[k] {
            candidates.clear();
            match &cells {
                Some(cl) => {
                    cl.for_each_neighbor(state.position(i), |j| {
                        if j != i {
                            state.displacement(i, j, &mut dx);
                            let rate = r.kernel.eval(&dx) * inv_n;
                            if rate > 0.0 {
                                candidates.push((j, rate));
                            }
                        }
                    });
                    candidates.sort_by_key(|&(j, _)| j);
                }
                None => {
                    for &j in &by_type[l] {
                        if j == i {
                            continue;
                        }
                        state.displacement(i, j, &mut dx);
                        let rate = r.kernel.eval(&dx) * inv_n;
                        if rate > 0.0 {
                            candidates.push((j, rate));
                        }
                    }
                }
            }
            for &(j, rate) in &candidates {
                let u: f64 = state.rng.random();
                if u < -(-rate * dt).exp_m1() {
                    firings.push((ri, i, j));
                }
            }
        }
    }
    firings
}

fn propose_thinning(state: &mut ParticleState, net: &ReactionNetwork, dt: f64) -> Vec<Firing> {
    let n = state.n();
    let inv_n = 1.0 / n as f64;
    let by_type = indices_by_type(state);
    let mut dx = vec![0.0; state.dim()];
    let mut firings = Vec::new();
    for (ri, r) in net.reactions().iter().enumerate() {
        if r.kernel.is_zero() {
            continue;
        }
        let (k, l) = r.input;
        let (ks, ls) = (&by_type[k], &by_type[l]);
        let total = ks.len() as u64 * ls.len() as u64;
        if total == 0 {
            continue;
        }
        let bound_rate = r.kernel.rate * inv_n;
        let bound_dt = bound_rate * dt;
        let bound_prob = -(-bound_dt).exp_m1();
        let mut pos: u64 = 0;
        loop {
            // gaps between selected candidates are geometric with success prob 1 - exp(-bound_dt)
            let e: f64 = state.rng.sample(Exp1);
            let gap = e / bound_dt;
            if gap >= (total - pos) as f64 {
                break;
            }
            pos += gap as u64;
            let (i, j) = (ks[(pos / ls.len() as u64) as usize], ls[(pos % ls.len() as u64) as usize]);
            pos += 1;
            if i != j {
                state.displacement(i, j, &mut dx);
                let rate = r.kernel.eval(&dx) * inv_n;
                if rate > 0.0 {
                    let accept = -(-rate * dt).exp_m1() / bound_prob;
                    let u: f64 = state.rng.random();
                    if u < accept {
                        firings.push((ri, i, j));
                    }
                }
            }
            if pos >= total {
                break;
            }
        }
    }
    firings
}

fn apply_firings(state: &mut ParticleState, net: &ReactionNetwork, mut firings: Vec<Firing>) -> StepStats {
    let mut stats = StepStats { proposed: firings.len() as u64, ..Default::default() };
    if firings.is_empty() {
        return stats;
    }
    firings.shuffle(&mut state.rng);
    let frozen: Vec<usize> = firings
        .iter()
        .flat_map(|&(_, i, j)| [i, j])
        .map(|p| state.types()[p])
        .collect();
    let types = state.types_mut();
    for (f, &(ri, i, j)) in firings.iter().enumerate() {
        if types[i] != frozen[2 * f] || types[j] != frozen[2 * f + 1] {
            stats.rejected_stale += 1;
            continue;
        }
        let (k2, l2) = net.reactions()[ri].output;
        types[i] = k2;
        types[j] = l2;
        stats.accepted += 1;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;
    use crate::field::DensityField;
    use crate::particle::{run_rng, sample_initial};

    fn special(kernel: &str) -> ReactionNetwork {
        parse_network(&format!("kernel k = {kernel}\nS1 + S2 -> S2 + S2 @ k\n")).unwrap()
    }

    #[test]
    fn dt_bound_is_enforced() {
        let net = special("constant(rate=10)");
        assert!(matches!(check_timestep(&net, 0.02, 0.1), Err(ParticleError::TimestepBound { .. })));
        assert!(check_timestep(&net, 0.01, 0.1).is_ok());
    }

    #[test]
    fn zero_rates_move_positions_only() {
        let net = special("constant(rate=0)");
        let rho0 = DensityField::uniform(1, 4, &[0.5, 0.5]);
        let mut s = sample_initial(&rho0, 200, 1).unwrap();
        let before_types = s.types().to_vec();
        let before_pos = s.positions().to_vec();
        let stats = step(&mut s, &net, &DiffusionSpec::uniform(2, 0.1), 0.01, &StepOptions::default()).unwrap();
        assert_eq!(stats.proposed, 0);
        assert_eq!(s.types(), &before_types[..]);
        assert_ne!(s.positions(), &before_pos[..]);
        assert_eq!(s.time, 0.01);
        assert!(s.positions().iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn accepted_firing_follows_assignment_rule() {
        let net = parse_network("species: A, B, C\nkernel k = constant(rate=5)\nB + A -> C + B @ k").unwrap();
        // input (A, B), output (B, C): particle with A becomes B, particle with B becomes C
        let s0 = ParticleState::from_parts(1, 3, vec![0.1, 0.2], vec![0, 1], run_rng(4, 0));
        let diff = DiffusionSpec::uniform(3, 0.0);
        let mut fired = false;
        for seed in 0..2000 {
            let mut s = s0.clone();
            *s.rng_mut() = run_rng(seed, 0);
            let stats = step(&mut s, &net, &diff, 0.02, &StepOptions::default()).unwrap();
            if stats.accepted > 0 {
                assert_eq!(s.types(), &[1, 2]);
                fired = true;
                break;
            }
        }
        assert!(fired);
    }

    #[test]
    fn cell_list_is_bit_identical_to_exhaustive() {
        let net = parse_network(
            "kernel a = tophat(radius=0.1, rate=4)\nkernel b = tophat(radius=0.2, rate=2)\n\
             S1 + S2 -> S2 + S2 @ a\nS2 + S2 -> S1 + S3 @ b\nS1 + S3 -> S1 + S1 @ a\n",
        )
        .unwrap();
        for dim in [1, 2] {
            let rho0 = DensityField::uniform(dim, 4, &[0.4, 0.4, 0.2]);
            let diff = DiffusionSpec::new(vec![0.1, 0.05, 0.2]).unwrap();
            let mut a = sample_initial(&rho0, 400, 21).unwrap();
            let mut b = a.clone();
            let ea = StepOptions { pair_search: PairSearch::Exhaustive, ..Default::default() };
            let eb = StepOptions { pair_search: PairSearch::CellList, ..Default::default() };
            let mut fired = 0;
            for _ in 0..40 {
                let sa = step(&mut a, &net, &diff, 0.008, &ea).unwrap();
                let sb = step(&mut b, &net, &diff, 0.008, &eb).unwrap();
                assert_eq!(sa, sb);
                fired += sa.accepted;
            }
            assert!(fired > 0);
            assert_eq!(a.types(), b.types());
            assert_eq!(a.positions(), b.positions());
        }
    }
}
