//! Configurations behind `chaoskit check <suite>`.

/// Suite names accepted by [`builtin_configs`].
pub const BUILTIN_SUITES: &[&str] = &["mass_action", "chaos", "pde", "ldp", "operators", "determinism", "all"];

const MASS_ACTION: &str = "\
experiment = mass_action_match
network.inline = kernel k = constant(rate=1); S1 + S2 -> S2 + S2 @ k
sigma = 0.05
init.profile = uniform
init.masses = 0.5, 0.5
sim.N = 4096
sim.runs = 32
sim.dt = 1e-3
sim.t_final = 0.6931471805599453
sim.seed = 1
output.dir = mass_action
";

const CHAOS: &str = "\
experiment = chaos_scaling
network.inline = kernel k = tophat(radius=0.2, rate=3); S1 + S2 -> S2 + S2 @ k
sigma = 0.05
init.profile = cosine
init.masses = 0.5, 0.5
init.amplitude = 0.5
sim.N = 256, 512, 1024, 2048, 4096
sim.runs = 64
sim.dt = 1e-3
sim.t_final = 0.5
sim.bins = 32
sim.seed = 2
pde.M = 512
output.dir = chaos
";

const PDE_CLOSURE: &str = "\
experiment = pde
network.inline = species: S1, S2, S3, S4; kernel a = tophat(radius=0.2, rate=2); kernel g = gaussian(width=0.1, rate=1); S1 + S2 -> S2 + S3 @ a; S3 + S3 -> S1 + S1 @ g; S1 + S4 -> S4 + S4 @ a
sigma = 0.05, 0.05, 0.1, 0.1
init.profile = cosine
init.masses = 0.5, 0.5, 0, 0
pde.M = 128
pde.dt = 1e-3
pde.t_final = 2
pde.record_times = 0, 0.5, 1, 1.5, 2
output.dir = pde_closure
";

const PDE_SPECIAL: &str = "\
experiment = pde
network.inline = kernel k = tophat(radius=0.2, rate=3); S1 + S2 -> S2 + S2 @ k
sigma = 0.05
init.profile = cosine
init.masses = 0.5, 0.5
pde.M = 128
pde.dt = 1e-3
pde.t_final = 2
pde.record_times = 0, 0.5, 1, 1.5, 2
output.dir = pde_special
";

const PDE_CYCLIC: &str = "\
experiment = pde
network.inline = kernel a = tophat(radius=0.15, rate=2); kernel g = gaussian(width=0.1, rate=3); kernel c = constant(rate=0.5); S1 + S2 -> S2 + S2 @ a; S2 + S3 -> S3 + S3 @ g; S1 + S3 -> S1 + S1 @ g; S2 + S2 -> S1 + S3 @ c; S1 + S1 -> S1 + S1 @ a
sigma = 0.05, 0.1, 0.2
init.profile = cosine
init.masses = 0.4, 0.3, 0.3
pde.M = 128
pde.dt = 1e-3
pde.t_final = 2
pde.record_times = 0, 0.5, 1, 1.5, 2
output.dir = pde_cyclic
";

const LDP: &str = "\
experiment = ldp_suite
ldp.grid = 64
ldp.f = cos_product
ldp.n = 2, 8, 64, 256
ldp.trials = 100000
ldp.k_max = 6
ldp.moment_n = 64
ldp.mz_n = 10
ldp.mz_p = 2, 3, 4, 6
sim.seed = 3
output.dir = ldp
";

const OPERATORS: &str = "\
experiment = operator_suite
network.inline = kernel a = tophat(radius=0.25, rate=2); kernel c = constant(rate=1); S1 + S2 -> S2 + S2 @ a; S2 + S3 -> S1 + S1 @ c; S3 + S3 -> S2 + S3 @ a; S1 + S1 -> S1 + S1 @ c
sigma = 0.1, 0.2, 0.3
init.profile = cosine
init.masses = 0.4, 0.3, 0.3
pde.M = 64
ops.m = 8
ops.N = 2, 3
ops.pairs = 100
ops.dynkin_N = 64
ops.dynkin_runs = 2000
ops.dynkin_t = 0.1
ops.dynkin_dt = 0.01
sim.seed = 4
output.dir = operators
";

fn pack(items: &[(&str, &str)]) -> Vec<(String, String)> {
    items.iter().map(|(l, t)| (l.to_string(), t.to_string())).collect()
}

/// `(label, config text)` pairs for a suite name; `None` if unknown.
/// The `determinism` suite returns the configs that are run twice.
pub fn builtin_configs(suite: &str) -> Option<Vec<(String, String)>> {
    Some(match suite {
        "mass_action" => pack(&[("mass_action", MASS_ACTION)]),
        "chaos" => pack(&[("chaos", CHAOS)]),
        "pde" => pack(&[("pde_closure", PDE_CLOSURE), ("pde_special", PDE_SPECIAL), ("pde_cyclic", PDE_CYCLIC)]),
        "ldp" => pack(&[("ldp", LDP)]),
        "operators" => pack(&[("operators", OPERATORS)]),
        "determinism" => pack(&[("mass_action", MASS_ACTION), ("chaos", CHAOS)]),
        "all" => pack(&[
            ("mass_action", MASS_ACTION),
            ("chaos", CHAOS),
            ("pde_closure", PDE_CLOSURE),
            ("pde_special", PDE_SPECIAL),
            ("pde_cyclic", PDE_CYCLIC),
            ("ldp", LDP),
            ("operators", OPERATORS),
        ]),
        _ => return None,
    })
}
