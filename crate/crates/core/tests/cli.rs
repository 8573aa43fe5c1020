use std::path::Path;
use std::process::{Command, Output};

fn chaoskit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoskit"))
        .args(args)
        .current_dir(cwd)
        .env("CHAOSKIT_THREADS", "2")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(chaoskit(&[], dir.path()).status.code(), Some(2));
    assert_eq!(chaoskit(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(chaoskit(&["check", "nonsense"], dir.path()).status.code(), Some(2));
    assert_eq!(chaoskit(&["run", "missing.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.cfg", "experiment = ldp_suite\nldp.trails = 1000\n");
    let out = chaoskit(&["run", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ldp.trails"));
}

#[test]
fn oversized_timestep_names_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "fast.cfg",
        "experiment = simulate\nnetwork.inline = kernel k = constant(rate=200); S1 + S2 -> S2 + S2 @ k\nsigma = 0.1\nsim.dt = 1e-3\n",
    );
    let out = chaoskit(&["run", "fast.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("0.1"), "{err}");
}

#[test]
fn trivial_ldp_run_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "zero.cfg",
        "ldp.f = zero\nldp.grid = 8\nldp.n = 2, 8\nldp.trials = 2000\nldp.moment_trials = 2000\nldp.mz_n = 4\noutput.dir = zero\n",
    );
    let out = chaoskit(&["ldp", "zero.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["config.resolved", "summary.csv", "ldp_results.csv", "run.log"] {
        assert!(dir.path().join("zero").join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.path().join("zero/summary.csv")).unwrap();
    assert!(summary.starts_with("criterion,name,value,bound,pass,detail"));
    assert!(!summary.contains(",false,"));
}

#[test]
fn pde_command_writes_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "net.crn",
        "kernel k = tophat(radius=0.2, rate=3)\nS1 + S2 -> S2 + S2 @ k\n",
    );
    write(
        dir.path(),
        "pde.cfg",
        "network.file = net.crn\nsigma = 0.05\ninit.profile = cosine\ninit.masses = 0.5, 0.5\npde.M = 32\npde.t_final = 0.2\npde.record_times = 0, 0.1\noutput.dir = field\n",
    );
    let out = chaoskit(&["pde", "pde.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let file = std::fs::File::open(dir.path().join("field/field.csv")).unwrap();
    let fields = chaoskit::field::DensityField::read_csv(std::io::BufReader::new(file)).unwrap();
    let times: Vec<f64> = fields.iter().map(|f| f.time).collect();
    assert_eq!(times, vec![0.0, 0.1, 0.2]);
    assert!(fields.iter().all(|f| f.grid_size() == 32 && (f.total_mass() - 1.0).abs() < 1e-12));
}

#[test]
fn failed_criterion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "chaos.cfg",
        "experiment = chaos_scaling\nnetwork.inline = kernel k = tophat(radius=0.2, rate=3); S1 + S2 -> S2 + S2 @ k\nsigma = 0.05\ninit.profile = cosine\ninit.masses = 0.5, 0.5\nsim.N = 32, 64\nsim.runs = 4\nsim.t_final = 0.05\nsim.bins = 8\npde.M = 32\ncheck.slope_min = 5\ncheck.slope_max = 6\n",
    );
    let out = chaoskit(&["run", "chaos.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert!(dir.path().join("out/chaos_report.csv").exists());
}

#[test]
fn same_seed_gives_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "experiment = simulate\nnetwork.inline = kernel k = constant(rate=2); S1 + S2 -> S2 + S2 @ k\nsigma = 0.05\nsim.N = 128\nsim.runs = 3\nsim.t_final = 0.05\nsim.record_times = 0.025\nsim.snapshots = true\nsim.seed = 11\n";
    write(dir.path(), "sim.cfg", cfg);
    assert_eq!(chaoskit(&["run", "sim.cfg", "--out", "a"], dir.path()).status.code(), Some(0));
    assert_eq!(chaoskit(&["--sequential", "run", "sim.cfg", "--out", "b"], dir.path()).status.code(), Some(0));
    for f in ["counts_N128.csv", "histograms_N128.csv", "snapshots_N128.csv", "summary.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
