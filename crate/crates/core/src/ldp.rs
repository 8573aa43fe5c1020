//! Exponential-moment and moment bounds for centered U-statistics of i.i.d.
//! samples on a finite space, the martingale decomposition behind them, and
//! the sharp Marcinkiewicz–Zygmund inequality.
//!
//! The sample space is `{0, .., P-1}` with a probability vector `rho`; a pair
//! statistic is a `P x P` table.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use thiserror::Error;

use crate::par::{map_indexed, Execution};
use crate::stats::{Summary, Z99};

#[derive(Debug, Error)]
pub enum LdpError {
    #[error("sampling density must be nonnegative and sum to 1 within 1e-10, got total {0}")]
    Density(f64),
    #[error("density has {got} points, statistic has {expected}")]
    Length { expected: usize, got: usize },
    #[error("eta is undefined for a statistic with zero sup norm")]
    ZeroNorm,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("conditional mean of increment {k} is {residual:e}, above tolerance {tol:e}")]
    NotMartingale { k: usize, residual: f64, tol: f64 },
}

/// A bounded function on `Π x Π` with `Π = {0, .., P-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistic {
    p: usize,
    table: Vec<f64>,
    linf: f64,
}

impl PairStatistic {
    pub fn from_fn(p: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut table = Vec::with_capacity(p * p);
        for y in 0..p {
            for y2 in 0..p {
                table.push(f(y, y2));
            }
        }
        Self::from_table(p, table)
    }

    pub fn from_table(p: usize, table: Vec<f64>) -> Self {
        assert_eq!(table.len(), p * p, "table must be P x P");
        let linf = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        PairStatistic { p, table, linf }
    }

    pub fn zero(p: usize) -> Self {
        Self::from_table(p, vec![0.0; p * p])
    }

    /// `cos(2πx) cos(2πx')` on `P` cell centres of the unit circle.
    pub fn cos_product(p: usize) -> Self {
        let c: Vec<f64> = (0..p).map(|i| (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / p as f64).cos()).collect();
        Self::from_fn(p, |a, b| c[a] * c[b])
    }

    pub fn size(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn eval(&self, y: usize, y2: usize) -> f64 {
        self.table[y * self.p + y2]
    }

    pub fn linf(&self) -> f64 {
        self.linf
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_table(self.p, self.table.iter().map(|v| a * v).collect())
    }

    /// `max(max_y |E f(y, Y')|, max_y' |E f(Y, y')|)` under `rho`.
    pub fn marginal_residual(&self, rho: &[f64]) -> Result<f64, LdpError> {
        check_density(rho, self.p)?;
        let (row, col) = self.marginals(rho);
        Ok(row.iter().chain(&col).fold(0.0, |m, v| m.max(v.abs())))
    }

    fn marginals(&self, rho: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let mut row = vec![0.0; p];
        let mut col = vec![0.0; p];
        for y in 0..p {
            for y2 in 0..p {
                let v = self.eval(y, y2);
                row[y] += v * rho[y2];
                col[y2] += v * rho[y];
            }
        }
        (row, col)
    }
}

fn check_density(rho: &[f64], p: usize) -> Result<(), LdpError> {
    if rho.len() != p {
        return Err(LdpError::Length { expected: p, got: rho.len() });
    }
    let total: f64 = rho.iter().sum();
    if rho.iter().any(|&r| !(r >= 0.0)) || (total - 1.0).abs() > 1e-10 {
        return Err(LdpError::Density(total));
    }
    Ok(())
}

/// `f - E[f | y] - E[f | y'] + E f` under `rho ⊗ rho`.
pub fn center_function(f: &PairStatistic, rho: &[f64]) -> Result<PairStatistic, LdpError> {
    check_density(rho, f.p)?;
    let (row, col) = f.marginals(rho);
    let mean: f64 = row.iter().zip(rho).map(|(r, w)| r * w).sum();
    Ok(PairStatistic::from_fn(f.p, |y, y2| f.eval(y, y2) - row[y] - col[y2] + mean))
}

/// `2√2 e ||f||_inf`.
pub fn eta_of(f: &PairStatistic) -> Result<f64, LdpError> {
    if f.linf == 0.0 {
        return Err(LdpError::ZeroNorm);
    }
    Ok(2.0 * std::f64::consts::SQRT_2 * std::f64::consts::E * f.linf)
}

const BLOCK: usize = 1024;

fn sampler(rho: &[f64]) -> Result<WeightedAliasIndex<f64>, LdpError> {
    WeightedAliasIndex::new(rho.to_vec()).map_err(|e| LdpError::Parameter(format!("density: {e}")))
}

/// `Σ_{i≠j} f(Y_i, Y_j)` computed through occupation counts.
fn off_diagonal_sum(f: &PairStatistic, counts: &[u32], occupied: &[usize]) -> f64 {
    let mut total = 0.0;
    for &a in occupied {
        let ca = counts[a] as f64;
        let mut row = 0.0;
        for &b in occupied {
            row += counts[b] as f64 * f.eval(a, b);
        }
        total += ca * (row - f.eval(a, a));
    }
    total
}

/// Draws `trials` independent samples of `Σ_{i≠j} f(Y_i, Y_j)` with
/// `Y_1..Y_n ~ rho`. Trials are grouped in blocks of 1024, block `b` using
/// stream `b` of `seed`.
pub fn sample_double_sums(
    f: &PairStatistic,
    rho: &[f64],
    n: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>, LdpError> {
    check_density(rho, f.p)?;
    if n < 2 {
        return Err(LdpError::Parameter(format!("sample size n must be at least 2, got {n}")));
    }
    let dist = sampler(rho)?;
    let blocks = trials.div_ceil(BLOCK);
    let parts = map_indexed(blocks, exec, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let len = BLOCK.min(trials - b * BLOCK);
        let mut counts = vec![0u32; f.p];
        let mut occupied = Vec::new();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            for _ in 0..n {
                let y = dist.sample(&mut rng);
                if counts[y] == 0 {
                    occupied.push(y);
                }
                counts[y] += 1;
            }
            out.push(off_diagonal_sum(f, &counts, &occupied));
            for &y in &occupied {
                counts[y] = 0;
            }
            occupied.clear();
        }
        out
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Monte-Carlo mean with a 99% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci99: f64,
}

/// `E exp((η n)^{-1} Σ_{i≠j} f(Y_i, Y_j))`.
pub fn exp_moment_estimate(
    f: &PairStatistic,
    rho: &[f64],
    n: usize,
    eta: f64,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Estimate, LdpError> {
    if trials < 1000 {
        return Err(LdpError::Parameter(format!("need at least 1000 trials, got {trials}")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(LdpError::Parameter(format!("eta must be positive, got {eta}")));
    }
    let sums = sample_double_sums(f, rho, n, trials, seed, exec)?;
    let values: Vec<f64> = sums.iter().map(|s| (s / (eta * n as f64)).exp()).collect();
    let s = Summary::of(&values);
    Ok(Estimate { mean: s.mean, ci99: s.ci99() })
}

/// Exact `E exp((2η)^{-1} (f(Y_1,Y_2) + f(Y_2,Y_1)))` by summing over `Π²`.
pub fn exp_moment_pair_quadrature(f: &PairStatistic, rho: &[f64], eta: f64) -> Result<f64, LdpError> {
    check_density(rho, f.p)?;
    let mut total = 0.0;
    for a in 0..f.p {
        for b in 0..f.p {
            total += rho[a] * rho[b] * ((f.eval(a, b) + f.eval(b, a)) / (2.0 * eta)).exp();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow {
    pub k: u32,
    /// `k^{-1} |E A_N^k|^{1/k}`
    pub value: f64,
    /// Half-width of the 99% bootstrap percentile interval.
    pub ci: f64,
}

/// `k^{-1} |E A_N(f)^k|^{1/k}` for `k = 1..=k_max`, with
/// `A_N = n^{-1} Σ_{i≠j} f(Y_i, Y_j)`.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound_check(
    f: &PairStatistic,
    rho: &[f64],
    n: usize,
    k_max: u32,
    trials: usize,
    resamples: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<MomentRow>, LdpError> {
    if !(1..=8).contains(&k_max) {
        return Err(LdpError::Parameter(format!("k_max must be in 1..=8, got {k_max}")));
    }
    if trials < 2 || resamples < 10 {
        return Err(LdpError::Parameter("need at least 2 trials and 10 bootstrap resamples".into()));
    }
    let a: Vec<f64> = sample_double_sums(f, rho, n, trials, seed, exec)?.into_iter().map(|s| s / n as f64).collect();
    let stat = |mean_pow: f64, k: u32| mean_pow.abs().powf(1.0 / k as f64) / k as f64;
    let mut boot = map_indexed(resamples, exec, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b007);
        rng.set_stream(b as u64);
        let mut sums = vec![0.0; k_max as usize];
        for _ in 0..a.len() {
            let x = a[rng.random_range(0..a.len())];
            let mut pow = 1.0;
            for s in sums.iter_mut() {
                pow *= x;
                *s += pow;
            }
        }
        sums.into_iter().enumerate().map(|(i, s)| stat(s / a.len() as f64, i as u32 + 1)).collect::<Vec<_>>()
    });
    let mut rows = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let mean_pow = a.iter().map(|x| x.powi(k as i32)).sum::<f64>() / a.len() as f64;
        let value = stat(mean_pow, k);
        let mut col: Vec<f64> = boot.iter_mut().map(|row| row[k as usize - 1]).collect();
        col.sort_by(f64::total_cmp);
        let q = |p: f64| col[((p * (col.len() - 1) as f64).round() as usize).min(col.len() - 1)];
        let ci = (q(0.995) - value).max(value - q(0.005)).max(0.0);
        rows.push(MomentRow { k, value, ci });
    }
    Ok(rows)
}

/// How the martingale-difference precondition is checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MartingaleCheck {
    /// Paths come from exact enumeration: group by identical prefixes and
    /// require each conditional mean to vanish within `tol`.
    Enumerated { tol: f64 },
    /// Paths are Monte-Carlo samples with equal weights: require
    /// `E[X_k]` and `E[X_k sign(S_{k-1})]` to vanish within `z` standard errors.
    Sampled { z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzResult {
    /// `||S_n||_p^2`
    pub lhs: f64,
    /// `(p - 1) Σ_k ||X_k||_p^2`
    pub rhs: f64,
    /// Largest conditional-mean statistic seen by the precondition check.
    pub martingale_residual: f64,
}

/// Empirical sides of `||S_n||_p^2 <= (p-1) Σ ||X_k||_p^2` from weighted paths.
pub fn mz_verify(paths: &[Vec<f64>], weights: &[f64], p: f64, check: MartingaleCheck) -> Result<MzResult, LdpError> {
    if !(p >= 2.0) {
        return Err(LdpError::Parameter(format!("p must be at least 2, got {p}")));
    }
    if paths.is_empty() || paths.len() != weights.len() {
        return Err(LdpError::Parameter("need one weight per path and at least one path".into()));
    }
    let n = paths[0].len();
    if paths.iter().any(|x| x.len() != n) {
        return Err(LdpError::Parameter("all paths must have the same length".into()));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-10 {
        return Err(LdpError::Density(total));
    }
    let martingale_residual = match check {
        MartingaleCheck::Enumerated { tol } => check_enumerated(paths, weights, tol)?,
        MartingaleCheck::Sampled { z } => check_sampled(paths, z)?,
    };
    let mut es = 0.0;
    let mut ex = vec![0.0; n];
    for (x, &w) in paths.iter().zip(weights) {
        es += w * x.iter().sum::<f64>().abs().powf(p);
        for (e, xk) in ex.iter_mut().zip(x) {
            *e += w * xk.abs().powf(p);
        }
    }
    let lhs = es.powf(2.0 / p);
    let rhs = (p - 1.0) * ex.iter().map(|e| e.powf(2.0 / p)).sum::<f64>();
    Ok(MzResult { lhs, rhs, martingale_residual })
}

fn check_enumerated(paths: &[Vec<f64>], weights: &[f64], tol: f64) -> Result<f64, LdpError> {
    let n = paths[0].len();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut groups: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
        for (x, &w) in paths.iter().zip(weights) {
            let key = x[..k].iter().map(|v| v.to_bits()).collect();
            let g = groups.entry(key).or_insert((0.0, 0.0));
            g.0 += w * x[k];
            g.1 += w;
        }
        for (m, w) in groups.values() {
            if *w > 0.0 {
                let r = (m / w).abs();
                worst = worst.max(r);
                if r > tol {
                    return Err(LdpError::NotMartingale { k: k + 1, residual: r, tol });
                }
            }
        }
    }
    Ok(worst)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_sampled(paths: &[Vec<f64>], z: f64) -> Result<f64, LdpError> {
    let n = paths[0].len();
    let mut worst: f64 = 0.0;
    let mut partial = vec![0.0f64; paths.len()];
    for k in 0..n {
        for probe in 0..2 {
            let vals: Vec<f64> = paths
                .iter()
                .zip(&partial)
                .map(|(x, s)| if probe == 0 { x[k] } else { x[k] * sign(*s) })
                .collect();
            let s = Summary::of(&vals);
            let se = s.stderr();
            let stat = if se > 0.0 { s.mean.abs() / se } else if s.mean == 0.0 { 0.0 } else { f64::INFINITY };
            worst = worst.max(stat);
            if stat > z {
                return Err(LdpError::NotMartingale { k: k + 1, residual: stat, tol: z });
            }
        }
        for (s, x) in partial.iter_mut().zip(paths) {
            *s += x[k];
        }
    }
    Ok(worst)
}

/// All `2^n` sign paths `X_k = ε_k v_k(ε_1..ε_{k-1})` with equal weight,
/// where `scale(k, prefix_sum)` gives the predictable magnitude `v_k`.
pub fn rademacher_paths(n: usize, scale: impl Fn(usize, f64) -> f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    assert!(n <= 24, "enumeration capped at 2^24 paths");
    let count = 1usize << n;
    let mut paths = Vec::with_capacity(count);
    for bits in 0..count {
        let mut x = Vec::with_capacity(n);
        let mut sum = 0.0;
        for k in 0..n {
            let sign = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
            let v = sign * scale(k, sum);
            sum += v;
            x.push(v);
        }
        paths.push(x);
    }
    (paths, vec![1.0 / count as f64; count])
}

/// `D_k = Σ_{i<k} [f(Y_i, Y_k) + f(Y_k, Y_i)]`, so `D_1 = 0` and
/// `Σ_k D_k = Σ_{i≠j} f(Y_i, Y_j)`.
pub fn martingale_differences(f: &PairStatistic, ys: &[usize]) -> Vec<f64> {
    ys.iter()
        .enumerate()
        .map(|(k, &yk)| ys[..k].iter().map(|&yi| f.eval(yi, yk) + f.eval(yk, yi)).sum())
        .collect()
}

/// `|E[D_k | Y_1..Y_{k-1}]|` by summing over the next sample against `rho`.
pub fn conditional_mean_residual(f: &PairStatistic, rho: &[f64], prefix: &[usize]) -> Result<f64, LdpError> {
    check_density(rho, f.p)?;
    let mut total = 0.0;
    for (y, &w) in rho.iter().enumerate() {
        total += w * prefix.iter().map(|&yi| f.eval(yi, y) + f.eval(y, yi)).sum::<f64>();
    }
    Ok(total.abs())
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpRow {
    pub check: String,
    pub n: usize,
    pub p_or_k: f64,
    pub value: f64,
    pub bound: f64,
    pub ci: f64,
    pub pass: bool,
}

pub fn write_results_csv<W: Write>(w: &mut W, rows: &[LdpRow]) -> std::io::Result<()> {
    writeln!(w, "check,n,p_or_k,value,bound,ci,pass")?;
    for r in rows {
        writeln!(w, "{},{},{},{:?},{:?},{:?},{}", r.check, r.n, r.p_or_k, r.value, r.bound, r.ci, r.pass)?;
    }
    Ok(())
}

/// 99% half-width multiplier shared with the rest of the crate.
pub const CI_Z: f64 = Z99;
