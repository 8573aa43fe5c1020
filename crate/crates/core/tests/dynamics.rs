//! Statistical checks of the particle dynamics against exact reference laws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use chaoskit::crn::parse_network;
use chaoskit::field::DensityField;
use chaoskit::meanfield::solve_mass_action;
use chaoskit::operators::{dynkin_residual, Observable};
use chaoskit::par::Execution;
use chaoskit::particle::{
    ensemble, run_rng, step, DiffusionSpec, ParticleState, PairSearch, SimulationConfig, StepOptions, StepStats,
};
use chaoskit::stats::{ks_two_sample, Summary};

const SPECIAL: &str = "kernel k = constant(rate=5)\nS1 + S2 -> S2 + S2 @ k\n";

fn state_with_types(types: Vec<usize>, n_species: usize, seed: u64) -> ParticleState {
    let n = types.len();
    let positions = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    ParticleState::from_parts(1, n_species, positions, types, run_rng(seed, 0))
}

#[test]
fn brownian_increments_have_variance_sigma_squared_t() {
    let net = parse_network("species: S1\n").unwrap();
    let sigma = 0.1;
    let rho0 = DensityField::uniform(1, 8, &[1.0]);
    let mut config = SimulationConfig::new(net, DiffusionSpec::uniform(1, sigma), rho0, 4000);
    config.dt = 0.01;
    config.t_final = 0.2;
    config.record_times = vec![0.0, 0.2];
    config.snapshots = true;
    let traj = &ensemble(&config, 1, Execution::Sequential).unwrap()[0];
    let (p0, _) = traj.records[0].snapshot.as_ref().unwrap();
    let (p1, _) = traj.records[1].snapshot.as_ref().unwrap();
    let disp: Vec<f64> = p0.iter().zip(p1).map(|(a, b)| chaoskit::kernels::min_image(b - a)).collect();
    let sq: Vec<f64> = disp.iter().map(|d| d * d).collect();
    let s = Summary::of(&sq);
    let expected = sigma * sigma * 0.2;
    assert!((s.mean - expected).abs() <= 4.0 * s.stderr(), "{} vs {expected}", s.mean);
    assert!(Summary::of(&disp).mean.abs() <= 4.0 * Summary::of(&disp).stderr());
}

/// Two S1 and two S2 under S1 + S2 -> S2 + S2 with a constant kernel: the
/// S1 count is a pure death chain with rate c1 * c2 * rate / N.
#[test]
fn absorption_time_matches_the_jump_chain() {
    let net = parse_network(SPECIAL).unwrap();
    let diff = DiffusionSpec::uniform(2, 0.1);
    let dt = 1e-3;
    let runs = 2000;
    let opts = StepOptions::default();
    let simulated: Vec<f64> = (0..runs)
        .map(|r| {
            let mut state = state_with_types(vec![0, 0, 1, 1], 2, 100 + r);
            let mut steps = 0u64;
            while state.counts()[0] > 0 {
                step(&mut state, &net, &diff, dt, &opts).unwrap();
                steps += 1;
            }
            steps as f64 * dt
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let first = Exp::new(2.0 * 2.0 * 5.0 / 4.0).unwrap();
    let second = Exp::new(1.0 * 3.0 * 5.0 / 4.0).unwrap();
    let chain: Vec<f64> = (0..runs).map(|_| first.sample(&mut rng) + second.sample(&mut rng)).collect();
    let (d, p) = ks_two_sample(&simulated, &chain);
    assert!(p > 0.001, "KS d={d} p={p}");
}

/// With k = l both orderings of a pair match, so a pair fires at 2 * Phi / N.
#[test]
fn same_species_inputs_fire_at_twice_the_kernel_rate() {
    let net = parse_network("kernel k = constant(rate=4)\nS1 + S1 -> S2 + S2 @ k\n").unwrap();
    let diff = DiffusionSpec::uniform(2, 0.0);
    let dt = 1e-3;
    let opts = StepOptions { pair_search: PairSearch::Exhaustive, ..StepOptions::default() };
    let times: Vec<f64> = (0..4000)
        .map(|r| {
            let mut state = state_with_types(vec![0, 0], 2, r);
            let mut steps = 0u64;
            while state.counts()[0] > 0 {
                step(&mut state, &net, &diff, dt, &opts).unwrap();
                steps += 1;
            }
            assert_eq!(state.counts(), vec![0, 2]);
            steps as f64 * dt
        })
        .collect();
    let s = Summary::of(&times);
    // geometric in steps with success probability 1 - exp(-2 * 4 / 2 * dt)
    let p = -(-4.0f64 * dt).exp_m1();
    let expected = dt / p;
    assert!((s.mean - expected).abs() <= 4.0 * s.stderr(), "{} vs {expected}", s.mean);
}

#[test]
fn zero_kernels_leave_types_alone() {
    let net = parse_network("kernel z = constant(rate=0)\nS1 + S2 -> S2 + S2 @ z\nS1 + S1 -> S2 + S2 @ z\n").unwrap();
    let rho0 = DensityField::uniform(1, 16, &[0.3, 0.7]);
    let mut config = SimulationConfig::new(net, DiffusionSpec::uniform(2, 0.2), rho0, 500);
    config.t_final = 0.5;
    config.record_times = vec![0.0, 0.25, 0.5];
    for traj in ensemble(&config, 8, Execution::Sequential).unwrap() {
        let first = &traj.records[0].counts;
        assert!(traj.records.iter().all(|r| &r.counts == first));
        assert_eq!(traj.stats.accepted, 0);
    }
}

#[test]
fn stale_rejections_are_rare_at_desk_density() {
    let net = parse_network("kernel k = tophat(radius=0.2, rate=3)\nS1 + S2 -> S2 + S2 @ k\n").unwrap();
    let rho0 = DensityField::uniform(1, 16, &[0.5, 0.5]);
    let mut config = SimulationConfig::new(net, DiffusionSpec::uniform(2, 0.05), rho0, 2048);
    config.t_final = 0.5;
    let mut stats = StepStats::default();
    for traj in ensemble(&config, 4, Execution::available()).unwrap() {
        stats.merge(traj.stats);
    }
    assert!(stats.accepted > 0);
    assert!(stats.rejection_fraction() < 0.01, "{stats:?}");
}

#[test]
fn parallel_and_sequential_ensembles_agree() {
    let net = parse_network(SPECIAL).unwrap();
    let rho0 = DensityField::uniform(1, 16, &[0.5, 0.5]);
    let mut config = SimulationConfig::new(net, DiffusionSpec::uniform(2, 0.05), rho0, 256);
    config.t_final = 0.1;
    config.hist_bins = Some(8);
    let a = ensemble(&config, 6, Execution::Sequential).unwrap();
    let b = ensemble(&config, 6, Execution::Parallel).unwrap();
    for (x, y) in a.iter().zip(&b) {
        for (r, s) in x.records.iter().zip(&y.records) {
            assert_eq!(r.counts, s.counts);
            assert_eq!(r.histogram.as_ref().unwrap().values(), s.histogram.as_ref().unwrap().values());
        }
    }
}

#[test]
fn pair_search_strategies_share_the_same_law() {
    let net = parse_network("kernel k = tophat(radius=0.1, rate=8)\nS1 + S2 -> S2 + S2 @ k\n").unwrap();
    let rho0 = DensityField::uniform(1, 16, &[0.5, 0.5]);
    let mut fractions = Vec::new();
    for search in [PairSearch::Thinning, PairSearch::Exhaustive] {
        let mut config = SimulationConfig::new(net.clone(), DiffusionSpec::uniform(2, 0.05), rho0.clone(), 400);
        config.t_final = 0.3;
        config.step.pair_search = search;
        let finals: Vec<f64> = ensemble(&config, 200, Execution::available())
            .unwrap()
            .iter()
            .map(|t| t.records.last().unwrap().counts[0] as f64 / 400.0)
            .collect();
        fractions.push(Summary::of(&finals));
    }
    let (a, b) = (&fractions[0], &fractions[1]);
    let se = (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 4.0 * se, "{a:?} {b:?}");
}

#[test]
fn logistic_mass_action_has_closed_form() {
    let net = parse_network("kernel k = constant(rate=1)\nS1 + S2 -> S2 + S2 @ k\n").unwrap();
    let series = solve_mass_action(&net, &[0.5, 0.5], &net.rate_constants(1), 2.0_f64.ln(), 1e-3).unwrap();
    let (_, y) = series.last();
    assert!((y[0] - 1.0 / 3.0).abs() <= 1e-9, "{}", y[0]);
    assert!((y[0] + y[1] - 1.0).abs() <= 1e-12);
}

#[test]
fn constant_observable_has_zero_dynkin_residual() {
    let net = parse_network(SPECIAL).unwrap();
    let rho0 = DensityField::uniform(1, 16, &[0.5, 0.5]);
    let mut config = SimulationConfig::new(net, DiffusionSpec::uniform(2, 0.1), rho0, 64);
    config.dt = 0.01;
    config.t_final = 0.1;
    let one = |_: &[f64], _: usize| 1.0;
    let zero = |_: &[f64], _: usize| 0.0;
    let s = dynkin_residual(&config, &Observable { value: &one, laplacian: &zero }, 50, Execution::Sequential).unwrap();
    assert_eq!(s.mean, 0.0);
    assert_eq!(s.sd, 0.0);
}
