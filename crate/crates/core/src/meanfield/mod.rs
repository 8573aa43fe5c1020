//! Nonlocal reaction-diffusion mean-field system on the periodic grid and
//! its spatially homogeneous mass-action reduction.

mod convolve;
mod mass_action;
mod pde;

pub use crate::field::{DensityField, FieldError};
pub use convolve::{
    kernel_samples, periodic_convolve, periodic_convolve_direct, ConvolutionMethod, GridFft,
};
pub use mass_action::{mass_action_rhs, solve_mass_action, MassActionError, MassActionSeries};
pub use pde::{
    pde_step, reaction_rhs, solve_pde, MeanFieldSolver, PdeError, NEGATIVITY_TOL,
};
