//! End-to-end acceptance run over the built-in suites.
//!
//! Prints one PASS/FAIL line per criterion and exits nonzero if any is red.

use std::collections::BTreeMap;
use std::path::Path;

use chaoskit::experiments::{run_suite, Criterion};
use chaoskit::ldp::{eta_of, PairStatistic};
use chaoskit::par::Execution;

/// Type-1 fraction of the logistic solution at t = ln 2 from (1/2, 1/2).
const LOGISTIC_AT_LN2: f64 = 1.0 / 3.0;
/// 2 * sqrt(2) * e for a unit sup norm.
const ETA_UNIT: f64 = 7.688_462_056_318_234;

const NAMES: [&str; 10] = [
    "mass-action consistency",
    "chaos scaling",
    "PDE conservation and positivity",
    "mean-zero identities",
    "exponential moment bound",
    "moment bound",
    "MZ sharpness",
    "operator duality",
    "Dynkin residual",
    "determinism",
];

/// Reads the final particle mean and stderr for species 1 from `mass_action.csv`.
fn final_fraction(dir: &Path) -> (f64, f64) {
    let text = std::fs::read_to_string(dir.join("mass_action").join("mass_action.csv")).unwrap();
    let row = text
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(2) == Some("1"))
        .last()
        .expect("species 1 rows");
    let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
    (cols[4], cols[5])
}

fn oracle_rows(dir: &Path) -> Vec<Criterion> {
    let (mean, se) = final_fraction(dir);
    let bound = 0.02f64.max(4.0 * se);
    let dev = (mean - LOGISTIC_AT_LN2).abs();
    let f = PairStatistic::cos_product(64);
    let f = f.scaled(1.0 / f.linf());
    let eta = eta_of(&f).unwrap();
    vec![
        Criterion::new(Some(1), "logistic_closed_form", dev, format!("{bound:.4}"), dev <= bound)
            .with_detail(format!("mean={mean:.5} vs 1/3")),
        Criterion::new(Some(5), "eta_constant", (eta - ETA_UNIT).abs(), "1e-12", (eta - ETA_UNIT).abs() <= 1e-12),
    ]
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = run_suite("all", dir.path(), Execution::available()).expect("suite runs");
    rows.extend(oracle_rows(dir.path()));

    let mut by_id: BTreeMap<u8, Vec<&Criterion>> = BTreeMap::new();
    for c in &rows {
        if let Some(id) = c.id {
            by_id.entry(id).or_default().push(c);
        }
    }
    let mut failed = Vec::new();
    for id in 1..=10u8 {
        let group = by_id.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let pass = !group.is_empty() && group.iter().all(|c| c.pass);
        println!("AC{id:<2} {} {}", if pass { "PASS" } else { "FAIL" }, NAMES[id as usize - 1]);
        for c in group {
            println!("       {c}");
        }
        if !pass {
            failed.push(id);
        }
    }
    for c in rows.iter().filter(|c| c.id.is_none()) {
        println!("info  {c}");
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
