use std::collections::BTreeSet;

use proptest::prelude::*;

use chaoskit::crn::{parse_network, ReactionNetwork};
use chaoskit::entropy::marginal_l1_distance;
use chaoskit::field::DensityField;
use chaoskit::kernels::Kernel;
use chaoskit::ldp::{center_function, martingale_differences, PairStatistic};
use chaoskit::meanfield::{periodic_convolve, ConvolutionMethod, MeanFieldSolver};
use chaoskit::operators::{apply_jump_adjoint, DiscreteStateSpace};
use chaoskit::particle::{empirical_histogram, sample_initial, DiffusionSpec};

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.01f64..0.5, 0.1f64..5.0).prop_map(|(r, a)| Kernel::tophat(r, a).unwrap()),
        (0.02f64..0.3, 0.1f64..5.0).prop_map(|(w, a)| Kernel::gaussian(w, a).unwrap()),
        (0.1f64..5.0).prop_map(|a| Kernel::constant(a).unwrap()),
    ]
}

/// Network text over `n` species from `(k, l, k', l', kernel)` tuples.
fn network_text(n: usize, reactions: &[(usize, usize, usize, usize, usize)]) -> String {
    let mut text = format!(
        "species: {}\nkernel a = tophat(radius=0.2, rate=2)\nkernel b = constant(rate=1)\n",
        (1..=n).map(|s| format!("S{s}")).collect::<Vec<_>>().join(", ")
    );
    let mut seen = BTreeSet::new();
    for &(k, l, k2, l2, ker) in reactions {
        let (k, l) = (k.min(l), k.max(l));
        let (k2, l2) = (k2.min(l2), k2.max(l2));
        if !seen.insert((k, l, k2, l2, ker)) {
            continue;
        }
        let name = if ker == 0 { "a" } else { "b" };
        text.push_str(&format!("S{} + S{} -> S{} + S{} @ {name}\n", k + 1, l + 1, k2 + 1, l2 + 1));
    }
    text
}

fn network_strategy() -> impl Strategy<Value = (usize, ReactionNetwork)> {
    (2usize..6).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0..n, 0..n, 0usize..2), 1..8)
            .prop_map(move |rs| (n, parse_network(&network_text(n, &rs)).unwrap()))
    })
}

fn subset(n: usize) -> impl Strategy<Value = BTreeSet<usize>> {
    prop::collection::btree_set(0..n, 0..=n)
}

proptest! {
    #[test]
    fn kernels_are_symmetric_and_periodic(k in kernel_strategy(), dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
        let v = k.eval(&[dx, dy]);
        prop_assert_eq!(v, k.eval(&[-dx, -dy]));
        prop_assert!((v - k.eval(&[dx + 1.0, dy - 1.0])).abs() <= 1e-12 * v.max(1.0));
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn closure_is_extensive_idempotent_and_monotone(
        (n, net) in network_strategy(),
        a in subset(5),
        b in subset(5),
    ) {
        let a: BTreeSet<usize> = a.into_iter().filter(|&s| s < n).collect();
        let b: BTreeSet<usize> = b.into_iter().filter(|&s| s < n).collect();
        let ca = net.closure(&a);
        prop_assert!(a.is_subset(&ca));
        prop_assert_eq!(net.closure(&ca), ca.clone());
        let union: BTreeSet<usize> = a.union(&b).copied().collect();
        prop_assert!(ca.is_subset(&net.closure(&union)));
    }

    #[test]
    fn network_text_round_trips((_, net) in network_strategy()) {
        let printed = net.to_string();
        let again = parse_network(&printed).unwrap();
        prop_assert_eq!(again.to_string(), printed);
        prop_assert_eq!(again.n_reactions(), net.n_reactions());
        for (r, s) in net.reactions().iter().zip(again.reactions()) {
            prop_assert_eq!(r.input, s.input);
            prop_assert_eq!(r.output, s.output);
        }
    }

    #[test]
    fn convolution_methods_agree(k in kernel_strategy(), seed in 0u64..1000) {
        let m = 32;
        let u: Vec<f64> = (0..m).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 97.0).collect();
        let fft = periodic_convolve(&k, &u, 1, m, ConvolutionMethod::Fft);
        let direct = periodic_convolve(&k, &u, 1, m, ConvolutionMethod::Direct);
        for (x, y) in fft.iter().zip(&direct) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn histograms_are_normalized(n in 2usize..300, bins in 1usize..20, seed in 0u64..1000) {
        let rho0 = DensityField::from_fn(1, 16, 2, |x, s| if s == 0 { 1.0 + 0.5 * (6.0 * x[0]).sin() } else { 1.0 }).normalized();
        let state = sample_initial(&rho0, n, seed).unwrap();
        let h = empirical_histogram(&state, bins);
        prop_assert!((h.total_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(h.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pde_step_conserves_mass(amp in 0.0f64..0.9, phase in 0.0f64..1.0, dt in 1e-4f64..5e-3) {
        let net = parse_network(&network_text(3, &[(0, 1, 1, 1, 0), (1, 2, 0, 0, 1), (2, 2, 1, 2, 0)])).unwrap();
        let diff = DiffusionSpec::new(vec![0.05, 0.1, 0.2]).unwrap();
        let solver = MeanFieldSolver::new(&net, &diff, 1, 32).unwrap();
        let rho = DensityField::from_fn(1, 32, 3, |x, s| {
            1.0 + amp * (2.0 * std::f64::consts::PI * (x[0] - phase - s as f64 / 3.0)).cos()
        })
        .normalized();
        let next = solver.step(&rho, dt).unwrap();
        prop_assert!((next.total_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(next.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn martingale_differences_rebuild_the_double_sum(ys in prop::collection::vec(0usize..8, 1..20)) {
        let f = PairStatistic::from_fn(8, |a, b| ((a * 3 + b * 5) % 7) as f64 - 3.0);
        let d = martingale_differences(&f, &ys);
        prop_assert_eq!(d[0], 0.0);
        let mut direct = 0.0;
        for (i, &a) in ys.iter().enumerate() {
            for (j, &b) in ys.iter().enumerate() {
                if i != j {
                    direct += f.eval(a, b);
                }
            }
        }
        let total: f64 = d.iter().sum();
        prop_assert!((total - direct).abs() <= 1e-9);
    }

    #[test]
    fn centering_gives_marginal_mean_zero(weights in prop::collection::vec(0.1f64..1.0, 6)) {
        let total: f64 = weights.iter().sum();
        let rho: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let f = PairStatistic::from_fn(6, |a, b| (a as f64 - 2.0 * b as f64).sin());
        let c = center_function(&f, &rho).unwrap();
        prop_assert!(c.marginal_residual(&rho).unwrap() <= 1e-12);
    }

    #[test]
    fn l1_distance_is_a_metric(
        a in prop::collection::vec(0.01f64..1.0, 8),
        b in prop::collection::vec(0.01f64..1.0, 8),
        c in prop::collection::vec(0.01f64..1.0, 8),
    ) {
        let field = |v: &[f64]| DensityField::from_fn(1, 4, 2, |x, s| v[s * 4 + (x[0] * 4.0) as usize]).normalized();
        let (fa, fb, fc) = (field(&a), field(&b), field(&c));
        let ab = marginal_l1_distance(&fa, &fb).unwrap();
        prop_assert_eq!(marginal_l1_distance(&fa, &fa).unwrap(), 0.0);
        prop_assert!((ab - marginal_l1_distance(&fb, &fa).unwrap()).abs() <= 1e-15);
        prop_assert!(ab <= marginal_l1_distance(&fa, &fc).unwrap() + marginal_l1_distance(&fc, &fb).unwrap() + 1e-12);
        prop_assert!(ab <= 2.0 + 1e-12);
    }

    #[test]
    fn jump_adjoint_commutes_with_transpositions(values in prop::collection::vec(-1.0f64..1.0, 216), a in 0usize..3, b in 0usize..3) {
        prop_assume!(a != b);
        let net = parse_network(&network_text(2, &[(0, 1, 1, 1, 0), (0, 0, 0, 1, 1)])).unwrap();
        let space = DiscreteStateSpace::new(1, 3, 3, 2).unwrap();
        prop_assert_eq!(space.states(), 216);
        let lhs = space.transpose(&apply_jump_adjoint(&space, &net, &values).unwrap(), a, b);
        let rhs = apply_jump_adjoint(&space, &net, &space.transpose(&values, a, b)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}
