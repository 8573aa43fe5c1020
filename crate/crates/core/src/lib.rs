//! Stochastic bimolecular reaction-diffusion particle systems on the unit
//! torus, their nonlocal mean-field limit, and numerical checks tying the
//! two together.

// `!(x > bound)` style checks are there to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crn;
pub mod entropy;
pub mod experiments;
pub mod field;
pub mod kernels;
pub mod ldp;
pub mod meanfield;
pub mod operators;
pub mod par;
pub mod particle;
pub mod stats;
