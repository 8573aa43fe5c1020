use num_complex::Complex64;
use thiserror::Error;

use super::convolve::{periodic_convolve, ConvolutionMethod, GridFft};
use crate::crn::ReactionNetwork;
use crate::field::{DensityField, FieldError};
use crate::particle::DiffusionSpec;

/// Values in `[-NEGATIVITY_TOL, 0)` are clipped to zero after a step;
/// anything more negative aborts.
pub const NEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("density {value:e} for species {species} at cell {cell} after step at t={time}; dt={dt} is too large for the reaction rates")]
    Negative { species: usize, cell: usize, value: f64, time: f64, dt: f64 },
    #[error("network has {network} species, field has {field}, diffusion spec has {diffusion}")]
    SpeciesMismatch { network: usize, field: usize, diffusion: usize },
    #[error("timestep must be finite and nonnegative, got {0}")]
    Timestep(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Reusable solver state: FFT plans and per-reaction kernel spectra for a
/// fixed grid.
#[derive(Debug, Clone)]
pub struct MeanFieldSolver {
    net: ReactionNetwork,
    diffusion: DiffusionSpec,
    dim: usize,
    m: usize,
    method: ConvolutionMethod,
    fft: GridFft,
    spectra: Vec<Vec<Complex64>>,
}

impl MeanFieldSolver {
    pub fn new(net: &ReactionNetwork, diffusion: &DiffusionSpec, dim: usize, m: usize) -> Result<Self, PdeError> {
        Self::with_method(net, diffusion, dim, m, ConvolutionMethod::Fft)
    }

    pub fn with_method(
        net: &ReactionNetwork,
        diffusion: &DiffusionSpec,
        dim: usize,
        m: usize,
        method: ConvolutionMethod,
    ) -> Result<Self, PdeError> {
        if diffusion.n_species() != net.n_species() {
            return Err(PdeError::SpeciesMismatch {
                network: net.n_species(),
                field: net.n_species(),
                diffusion: diffusion.n_species(),
            });
        }
        let fft = GridFft::new(dim, m);
        let spectra = match method {
            ConvolutionMethod::Fft => net.reactions().iter().map(|r| fft.kernel_spectrum(&r.kernel)).collect(),
            ConvolutionMethod::Direct => Vec::new(),
        };
        Ok(MeanFieldSolver { net: net.clone(), diffusion: diffusion.clone(), dim, m, method, fft, spectra })
    }

    pub fn network(&self) -> &ReactionNetwork {
        &self.net
    }

    fn check(&self, field: &DensityField) -> Result<(), PdeError> {
        if field.n_species() != self.net.n_species() {
            return Err(PdeError::SpeciesMismatch {
                network: self.net.n_species(),
                field: field.n_species(),
                diffusion: self.diffusion.n_species(),
            });
        }
        if field.dim() != self.dim || field.grid_size() != self.m {
            return Err(FieldError::Shape(format!(
                "solver grid (d={}, M={}) vs field (d={}, M={})",
                self.dim,
                self.m,
                field.dim(),
                field.grid_size()
            ))
            .into());
        }
        Ok(())
    }

    /// `Phi_R * u_s` for reaction index `r`.
    pub fn convolve(&self, r: usize, u: &[f64]) -> Vec<f64> {
        match self.method {
            ConvolutionMethod::Fft => self.fft.convolve_with_spectrum(&self.spectra[r], u),
            ConvolutionMethod::Direct => {
                periodic_convolve(&self.net.reactions()[r].kernel, u, self.dim, self.m, ConvolutionMethod::Direct)
            }
        }
    }

    /// Sum over reactions of the loss and gain terms.
    pub fn reaction_rhs(&self, field: &DensityField) -> Result<DensityField, PdeError> {
        self.check(field)?;
        let mut rhs = DensityField::zeros(self.dim, self.m, field.n_species());
        rhs.time = field.time;
        for (ri, r) in self.net.reactions().iter().enumerate() {
            let (k, l) = r.input;
            let (k2, l2) = r.output;
            let uk = field.species(k);
            let ul = field.species(l);
            let conv_l = self.convolve(ri, ul);
            let conv_k = if k == l { conv_l.clone() } else { self.convolve(ri, uk) };
            // the same float lands as a loss and as a gain, so sum(rhs) cancels exactly per cell
            let via_k: Vec<f64> = conv_l.iter().zip(uk).map(|(c, u)| c * u).collect();
            let via_l: Vec<f64> = conv_k.iter().zip(ul).map(|(c, u)| c * u).collect();
            add_scaled(rhs.species_mut(k), &via_k, -1.0);
            add_scaled(rhs.species_mut(l), &via_l, -1.0);
            add_scaled(rhs.species_mut(k2), &via_k, 1.0);
            add_scaled(rhs.species_mut(l2), &via_l, 1.0);
        }
        Ok(rhs)
    }

    /// Exact heat semigroup for `sigma^2 / 2 * Laplacian` over time `dt`.
    pub fn diffuse(&self, field: &mut DensityField, dt: f64) {
        let cells = field.cells();
        let mut kvec = vec![0.0; self.dim];
        let two_pi = 2.0 * std::f64::consts::PI;
        for s in 0..field.n_species() {
            let sigma = self.diffusion.sigma(s);
            if sigma == 0.0 || dt == 0.0 {
                continue;
            }
            let u = field.species_mut(s);
            if u.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.fft.forward(&mut buf);
            for (c, b) in buf.iter_mut().enumerate().take(cells) {
                self.fft.wavenumbers(c, &mut kvec);
                let k2: f64 = kvec.iter().map(|k| (two_pi * k).powi(2)).sum();
                *b *= (-0.5 * sigma * sigma * k2 * dt).exp();
            }
            self.fft.inverse(&mut buf);
            for (v, z) in u.iter_mut().zip(&buf) {
                *v = z.re;
            }
        }
    }

    /// One IMEX step: explicit Euler reaction, then the exact diffusion
    /// multiplier.
    pub fn step(&self, field: &DensityField, dt: f64) -> Result<DensityField, PdeError> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(PdeError::Timestep(dt));
        }
        self.check(field)?;
        if dt == 0.0 {
            return Ok(field.clone());
        }
        let rhs = self.reaction_rhs(field)?;
        let mut next = field.clone();
        add_scaled(next.values_mut(), rhs.values(), dt);
        self.diffuse(&mut next, dt);
        next.time = field.time + dt;
        clip_negative(&mut next, dt)?;
        Ok(next)
    }

    /// Integrates to `t_final`, recording at each of `record_times` (sorted,
    /// within `[0, t_final]`). An empty list records the start and end.
    pub fn solve(
        &self,
        rho0: &DensityField,
        t_final: f64,
        dt: f64,
        record_times: &[f64],
    ) -> Result<Vec<DensityField>, PdeError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PdeError::Timestep(dt));
        }
        self.check(rho0)?;
        rho0.check_nonnegative()?;
        let mut targets: Vec<f64> = if record_times.is_empty() {
            vec![0.0, t_final]
        } else {
            record_times.iter().copied().filter(|&t| t <= t_final + 1e-12).collect()
        };
        targets.sort_by(f64::total_cmp);
        targets.dedup();
        let eps = 1e-9 * dt;
        let mut out = Vec::with_capacity(targets.len());
        let mut next_target = 0;
        let mut current = rho0.clone();
        current.time = 0.0;
        while next_target < targets.len() && targets[next_target] <= eps {
            out.push(current.clone());
            next_target += 1;
        }
        let n_steps = if t_final <= eps { 0 } else { ((t_final - eps) / dt).ceil() as usize };
        for step in 0..n_steps {
            let h = if step + 1 == n_steps { t_final - dt * step as f64 } else { dt };
            let mut next = self.step(&current, h)?;
            next.time = if step + 1 == n_steps { t_final } else { dt * (step + 1) as f64 };
            current = next;
            while next_target < targets.len() && targets[next_target] <= current.time + eps {
                out.push(current.clone());
                next_target += 1;
            }
        }
        Ok(out)
    }
}

fn add_scaled(dst: &mut [f64], src: &[f64], a: f64) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += a * s);
}

fn clip_negative(field: &mut DensityField, dt: f64) -> Result<(), PdeError> {
    let cells = field.cells();
    let time = field.time;
    for (i, v) in field.values_mut().iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEGATIVITY_TOL {
                return Err(PdeError::Negative { species: i / cells, cell: i % cells, value: *v, time, dt });
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// One-off reaction term evaluation.
pub fn reaction_rhs(net: &ReactionNetwork, field: &DensityField) -> Result<DensityField, PdeError> {
    let diffusion = DiffusionSpec::uniform(net.n_species(), 0.0);
    MeanFieldSolver::new(net, &diffusion, field.dim(), field.grid_size())?.reaction_rhs(field)
}

/// One-off IMEX step.
pub fn pde_step(
    net: &ReactionNetwork,
    diffusion: &DiffusionSpec,
    field: &DensityField,
    dt: f64,
) -> Result<DensityField, PdeError> {
    MeanFieldSolver::new(net, diffusion, field.dim(), field.grid_size())?.step(field, dt)
}

pub fn solve_pde(
    net: &ReactionNetwork,
    diffusion: &DiffusionSpec,
    rho0: &DensityField,
    t_final: f64,
    dt: f64,
    record_times: &[f64],
) -> Result<Vec<DensityField>, PdeError> {
    rho0.check_normalized(1e-8)?;
    MeanFieldSolver::new(net, diffusion, rho0.dim(), rho0.grid_size())?.solve(rho0, t_final, dt, record_times)
}
