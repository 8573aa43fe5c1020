//! The pair functions `A`, `Â`, `B`, `F = A(y') + Â(y) - B(y, y')` built from a
//! mean-field density, their marginal-mean-zero identities, the bound `K_t`,
//! and the 1-marginal L1 distance between particle histograms and the PDE.
//!
//! A point `y = (cell, species)` of the discrete state space carries the
//! measure `h^d` (cell volume) times counting measure on species.

use std::io::Write;

use thiserror::Error;

use crate::crn::ReactionNetwork;
use crate::field::{DensityField, FieldError};
use crate::meanfield::{periodic_convolve, ConvolutionMethod};

/// Smallest density allowed in a denominator.
pub const DIVISION_GUARD: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("density of species {species} at cell {cell} is {value:e}, below the division guard {DIVISION_GUARD:e}")]
    Division { species: usize, cell: usize, value: f64 },
    #[error("field has {field} species, network has {network}")]
    SpeciesMismatch { field: usize, network: usize },
    #[error("{which} integrates to {mass}, expected 1 within 1e-6")]
    Unnormalized { which: &'static str, mass: f64 },
    #[error("need at least two runs for a jackknife, got {0}")]
    TooFewRuns(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `(cell, species)`, both 0-based.
pub type Site = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    pub a: f64,
    pub a_hat: f64,
    pub b: f64,
    pub f: f64,
}

/// Per-reaction tabulation of `Φ_R * u_k` and `Φ_R * u_l` on the field's grid.
#[derive(Debug, Clone)]
pub struct EntropyFunctions<'a> {
    net: &'a ReactionNetwork,
    field: &'a DensityField,
    conv_k: Vec<Vec<f64>>,
    conv_l: Vec<Vec<f64>>,
}

impl<'a> EntropyFunctions<'a> {
    pub fn new(net: &'a ReactionNetwork, field: &'a DensityField) -> Result<Self, EntropyError> {
        if field.n_species() != net.n_species() {
            return Err(EntropyError::SpeciesMismatch { field: field.n_species(), network: net.n_species() });
        }
        let (dim, m) = (field.dim(), field.grid_size());
        let mut conv_k = Vec::with_capacity(net.n_reactions());
        let mut conv_l = Vec::with_capacity(net.n_reactions());
        for r in net.reactions() {
            if r.kernel.is_zero() {
                conv_k.push(vec![0.0; field.cells()]);
                conv_l.push(vec![0.0; field.cells()]);
                continue;
            }
            for s in [r.output.0, r.output.1] {
                if let Some((cell, &value)) = field.species(s).iter().enumerate().find(|(_, &v)| !(v > DIVISION_GUARD)) {
                    return Err(EntropyError::Division { species: s, cell, value });
                }
            }
            let (k, l) = r.input;
            conv_k.push(periodic_convolve(&r.kernel, field.species(k), dim, m, ConvolutionMethod::Fft));
            conv_l.push(periodic_convolve(&r.kernel, field.species(l), dim, m, ConvolutionMethod::Fft));
        }
        Ok(EntropyFunctions { net, field, conv_k, conv_l })
    }

    pub fn field(&self) -> &DensityField {
        self.field
    }

    /// Number of sites `M^d * n`.
    pub fn sites(&self) -> usize {
        self.field.cells() * self.field.n_species()
    }

    pub fn site(&self, index: usize) -> Site {
        (index % self.field.cells(), index / self.field.cells())
    }

    #[inline]
    fn rho(&self, (cell, s): Site) -> f64 {
        self.field.get(s, cell)
    }

    pub fn a(&self, r: usize, (cell, xi): Site) -> f64 {
        let rx = &self.net.reactions()[r];
        let (_, l) = rx.input;
        let (_, l2) = rx.output;
        let ck = self.conv_k[r][cell];
        let mut v = 0.0;
        if xi == l2 && ck != 0.0 {
            v += ck * self.field.get(l, cell) / self.field.get(l2, cell);
        }
        if xi == l {
            v -= ck;
        }
        v
    }

    pub fn a_hat(&self, r: usize, (cell, xi): Site) -> f64 {
        let rx = &self.net.reactions()[r];
        let (k, _) = rx.input;
        let (k2, _) = rx.output;
        let cl = self.conv_l[r][cell];
        let mut v = 0.0;
        if xi == k2 && cl != 0.0 {
            v += cl * self.field.get(k, cell) / self.field.get(k2, cell);
        }
        if xi == k {
            v -= cl;
        }
        v
    }

    pub fn b(&self, r: usize, y: Site, y2: Site) -> f64 {
        let rx = &self.net.reactions()[r];
        let plus = (y.1, y2.1) == rx.output;
        let minus = (y.1, y2.1) == rx.input;
        if !plus && !minus {
            return 0.0;
        }
        let phi = self.kernel_between(r, y.0, y2.0);
        if phi == 0.0 {
            return 0.0;
        }
        let mut bracket = 0.0;
        if plus {
            let (k, l) = rx.input;
            bracket += self.field.get(k, y.0) * self.field.get(l, y2.0) / (self.rho(y) * self.rho(y2));
        }
        if minus {
            bracket -= 1.0;
        }
        phi * bracket
    }

    fn kernel_between(&self, r: usize, c: usize, c2: usize) -> f64 {
        let dim = self.field.dim();
        let mut x = [0.0; 8];
        let mut x2 = [0.0; 8];
        self.field.cell_center_into(c, &mut x[..dim]);
        self.field.cell_center_into(c2, &mut x2[..dim]);
        for a in 0..dim {
            x[a] -= x2[a];
        }
        self.net.reactions()[r].kernel.eval(&x[..dim])
    }

    pub fn components(&self, r: usize, y: Site, y2: Site) -> Components {
        let a = self.a(r, y2);
        let a_hat = self.a_hat(r, y);
        let b = self.b(r, y, y2);
        Components { a, a_hat, b, f: a + a_hat - b }
    }

    /// `f(y, y') = Σ_R F_R(y, y')`.
    pub fn f(&self, y: Site, y2: Site) -> f64 {
        (0..self.net.n_reactions()).map(|r| self.components(r, y, y2).f).sum()
    }

    /// `Σ_R { sup_y (|A| + |Â|) + sup_{y,y'} |B| }` over the grid.
    pub fn k_t(&self) -> f64 {
        let cells = self.field.cells();
        let mut total = 0.0;
        for (r, rx) in self.net.reactions().iter().enumerate() {
            if rx.kernel.is_zero() {
                continue;
            }
            let sup_a = (0..self.sites())
                .map(|i| {
                    let y = self.site(i);
                    self.a(r, y).abs() + self.a_hat(r, y).abs()
                })
                .fold(0.0, f64::max);
            let mut sup_b: f64 = 0.0;
            for (s, s2) in [rx.input, rx.output] {
                for c in 0..cells {
                    for c2 in 0..cells {
                        sup_b = sup_b.max(self.b(r, (c, s), (c2, s2)).abs());
                    }
                }
            }
            total += sup_a + sup_b;
        }
        total
    }

    /// Marginal integrals of `f` and its pieces, each by direct quadrature
    /// over the grid.
    pub fn mean_zero_residual(&self) -> MeanZeroResidual {
        let n_sites = self.sites();
        let h = self.field.cell_volume();
        let weights: Vec<f64> = (0..n_sites).map(|i| self.rho(self.site(i)) * h).collect();
        let mut out = MeanZeroResidual::default();
        let mut first = vec![0.0; n_sites];
        let mut second = vec![0.0; n_sites];
        for r in 0..self.net.n_reactions() {
            let a: Vec<f64> = (0..n_sites).map(|i| self.a(r, self.site(i))).collect();
            let a_hat: Vec<f64> = (0..n_sites).map(|i| self.a_hat(r, self.site(i))).collect();
            let ia: f64 = a.iter().zip(&weights).map(|(x, w)| x * w).sum();
            let ia_hat: f64 = a_hat.iter().zip(&weights).map(|(x, w)| x * w).sum();
            out.a_integral = out.a_integral.max(ia.abs()).max(ia_hat.abs());
            let mut b_first = vec![0.0; n_sites];
            let mut b_second = vec![0.0; n_sites];
            for i in 0..n_sites {
                for j in 0..n_sites {
                    let b = self.b(r, self.site(i), self.site(j));
                    if b != 0.0 {
                        b_first[j] += b * weights[i];
                        b_second[i] += b * weights[j];
                    }
                }
            }
            for i in 0..n_sites {
                out.b_identity = out.b_identity.max((b_first[i] - a[i]).abs()).max((b_second[i] - a_hat[i]).abs());
            }
            // ∫F(y,y')ρ(y) = A(y')∫ρ + ∫Âρ - ∫B(.,y')ρ; the other marginal likewise
            let mass: f64 = weights.iter().sum();
            for i in 0..n_sites {
                first[i] += a[i] * mass + ia_hat - b_first[i];
                second[i] += ia + a_hat[i] * mass - b_second[i];
            }
        }
        out.first = first.iter().fold(0.0, |m, x| m.max(x.abs()));
        out.second = second.iter().fold(0.0, |m, x| m.max(x.abs()));
        out
    }
}

/// Largest absolute residuals over the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanZeroResidual {
    /// `max_{y'} |∫ f(y, y') ρ(y) dm(y)|`
    pub first: f64,
    /// `max_y |∫ f(y, y') ρ(y') dm(y')|`
    pub second: f64,
    /// `max_R max(|∫ A ρ|, |∫ Â ρ|)`
    pub a_integral: f64,
    /// `max_R max_{y'} |∫ B(., y') ρ - A(y')|` and the mirrored identity with `Â`.
    pub b_identity: f64,
}

impl MeanZeroResidual {
    pub fn max(&self) -> f64 {
        self.first.max(self.second).max(self.a_integral).max(self.b_identity)
    }
}

/// `max_R max_x { u_k/u_k', u_l/u_l' }` on the grid.
pub fn comparability(net: &ReactionNetwork, field: &DensityField) -> Result<f64, EntropyError> {
    if field.n_species() != net.n_species() {
        return Err(EntropyError::SpeciesMismatch { field: field.n_species(), network: net.n_species() });
    }
    let mut c: f64 = 0.0;
    for r in net.reactions().iter().filter(|r| !r.kernel.is_zero()) {
        for (num, den) in [(r.input.0, r.output.0), (r.input.1, r.output.1)] {
            for cell in 0..field.cells() {
                let d = field.get(den, cell);
                if !(d > DIVISION_GUARD) {
                    return Err(EntropyError::Division { species: den, cell, value: d });
                }
                c = c.max(field.get(num, cell) / d);
            }
        }
    }
    Ok(c)
}

fn check_unit_mass(field: &DensityField, which: &'static str) -> Result<(), EntropyError> {
    let mass = field.total_mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(EntropyError::Unnormalized { which, mass });
    }
    Ok(())
}

/// `h^d Σ_{ξ, cells} |hist - pde|`, in `[0, 2]` for normalized inputs.
pub fn marginal_l1_distance(hist: &DensityField, pde: &DensityField) -> Result<f64, EntropyError> {
    hist.check_shape(pde)?;
    check_unit_mass(hist, "histogram")?;
    check_unit_mass(pde, "reference field")?;
    Ok(l1_unchecked(hist.values(), pde.values(), hist.cell_volume()))
}

fn l1_unchecked(a: &[f64], b: &[f64], h: f64) -> f64 {
    h * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// L1 distance between the run-averaged histogram and `pde`, with a
/// leave-one-run-out jackknife standard error.
pub fn ensemble_l1_distance(hists: &[DensityField], pde: &DensityField) -> Result<(f64, f64), EntropyError> {
    let runs = hists.len();
    if runs < 2 {
        return Err(EntropyError::TooFewRuns(runs));
    }
    let len = pde.values().len();
    let mut sum = vec![0.0; len];
    for hist in hists {
        hist.check_shape(pde)?;
        check_unit_mass(hist, "histogram")?;
        for (s, v) in sum.iter_mut().zip(hist.values()) {
            *s += v;
        }
    }
    check_unit_mass(pde, "reference field")?;
    let h = pde.cell_volume();
    let mean: Vec<f64> = sum.iter().map(|s| s / runs as f64).collect();
    let full = l1_unchecked(&mean, pde.values(), h);
    let mut loo = Vec::with_capacity(runs);
    let mut buf = vec![0.0; len];
    for hist in hists {
        for ((b, s), v) in buf.iter_mut().zip(&sum).zip(hist.values()) {
            *b = (s - v) / (runs - 1) as f64;
        }
        loo.push(l1_unchecked(&buf, pde.values(), h));
    }
    let loo_mean = loo.iter().sum::<f64>() / runs as f64;
    let var = loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>() * (runs - 1) as f64 / runs as f64;
    Ok((full, var.sqrt()))
}

/// One row of the chaos-scaling report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub time: f64,
    pub n: usize,
    pub runs: usize,
    pub l1_distance: f64,
    pub l1_stderr: f64,
    pub k_t: f64,
    pub c_t: f64,
}

pub fn write_report_csv<W: Write>(w: &mut W, rows: &[ReportRow]) -> std::io::Result<()> {
    writeln!(w, "time,N,runs,l1_distance,l1_stderr,K_t,C_T")?;
    for r in rows {
        writeln!(w, "{:?},{},{},{:?},{:?},{:?},{:?}", r.time, r.n, r.runs, r.l1_distance, r.l1_stderr, r.k_t, r.c_t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::parse_network;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn special(kernel: &str) -> ReactionNetwork {
        parse_network(&format!("kernel k = {kernel}\nS1 + S2 -> S2 + S2 @ k\n")).unwrap()
    }

    fn smooth(m: usize, n: usize) -> DensityField {
        DensityField::from_fn(1, m, n, |x, s| 1.0 + 0.5 * (2.0 * PI * (x[0] + 0.17 * s as f64)).cos()).normalized()
    }

    #[test]
    fn zero_kernel_gives_zeros() {
        let net = special("constant(rate=0)");
        let field = DensityField::uniform(1, 8, &[1.0, 0.0]);
        let ef = EntropyFunctions::new(&net, &field).unwrap();
        let c = ef.components(0, (1, 0), (3, 1));
        assert_eq!(c, Components { a: 0.0, a_hat: 0.0, b: 0.0, f: 0.0 });
        let r = ef.mean_zero_residual();
        assert_eq!((r.first, r.second), (0.0, 0.0));
    }

    #[test]
    fn uniform_special_network_values() {
        let net = special("constant(rate=1)");
        let field = DensityField::uniform(1, 8, &[0.5, 0.5]);
        let ef = EntropyFunctions::new(&net, &field).unwrap();
        assert!(ef.a(0, (2, 1)).abs() < 1e-15);
        let r = ef.mean_zero_residual();
        assert!(r.max() <= 1e-10, "{r:?}");
    }

    #[test]
    fn residuals_small_for_smooth_fields() {
        let net = parse_network(
            "kernel a = tophat(radius=0.2, rate=3)\nkernel b = gaussian(width=0.1, rate=1)\n\
             S1 + S2 -> S2 + S2 @ a\nS2 + S3 -> S1 + S1 @ b\nS3 + S3 -> S1 + S2 @ a\n",
        )
        .unwrap();
        let field = smooth(128, 3);
        let ef = EntropyFunctions::new(&net, &field).unwrap();
        let r = ef.mean_zero_residual();
        assert!(r.max() <= 1e-6, "{r:?}");
    }

    #[test]
    fn division_guard_trips_on_vanishing_output_species() {
        let net = special("constant(rate=1)");
        let field = DensityField::uniform(1, 4, &[1.0, 0.0]);
        assert!(matches!(EntropyFunctions::new(&net, &field), Err(EntropyError::Division { species: 1, .. })));
    }

    #[test]
    fn pair_function_bounded_by_k_t() {
        let net = special("tophat(radius=0.2, rate=3)");
        let field = smooth(64, 2);
        let ef = EntropyFunctions::new(&net, &field).unwrap();
        let kt = ef.k_t();
        let ct = comparability(&net, &field).unwrap();
        let linf = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let y = ef.site(rng.random_range(0..ef.sites()));
            let y2 = ef.site(rng.random_range(0..ef.sites()));
            let c = ef.components(0, y, y2);
            assert!(c.f.abs() <= kt + 1e-12);
            assert!(c.a.abs() <= linf * (ct + 1.0) + 1e-12);
            assert!(c.b.abs() <= linf * (ct * ct + 1.0) + 1e-12);
        }
    }

    #[test]
    fn l1_distance_examples() {
        let a = DensityField::uniform(1, 4, &[1.0]);
        assert_eq!(marginal_l1_distance(&a, &a).unwrap(), 0.0);
        let mut left = DensityField::zeros(1, 4, 1);
        left.species_mut(0)[..2].copy_from_slice(&[2.0, 2.0]);
        let mut right = DensityField::zeros(1, 4, 1);
        right.species_mut(0)[2..].copy_from_slice(&[2.0, 2.0]);
        assert_eq!(marginal_l1_distance(&left, &right).unwrap(), 2.0);
        // move mass 0.1 from cell 0 to cell 3
        let mut moved = a.clone();
        moved.species_mut(0)[0] -= 0.4;
        moved.species_mut(0)[3] += 0.4;
        assert!((marginal_l1_distance(&moved, &a).unwrap() - 0.2).abs() < 1e-15);
        let half = DensityField::uniform(1, 4, &[0.5]);
        assert!(matches!(marginal_l1_distance(&half, &a), Err(EntropyError::Unnormalized { .. })));
    }

    #[test]
    fn jackknife_of_identical_runs_is_zero() {
        let a = DensityField::uniform(1, 4, &[1.0]);
        let (d, se) = ensemble_l1_distance(&[a.clone(), a.clone(), a.clone()], &a).unwrap();
        assert_eq!((d, se), (0.0, 0.0));
    }
}
