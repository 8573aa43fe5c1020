//! Symmetric reaction kernels on the unit torus.
//!
//! Every shape depends on the minimum-image Euclidean distance only, so
//! `eval(dx) == eval(-dx)` and `eval(dx + z) == eval(dx)` for integer `z`
//! hold by construction.

use std::f64::consts::PI;
use std::fmt;

use statrs::function::erf::erf;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel rate must be finite and nonnegative, got {0}")]
    Rate(f64),
    #[error("tophat radius must lie in (0, 0.5], got {0}")]
    Radius(f64),
    #[error("gaussian width must be finite and positive, got {0}")]
    Width(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape {
    /// Indicator of the closed ball of the given radius.
    TopHat { radius: f64 },
    Constant,
    /// `exp(-dist^2 / (2 width^2))` in minimum-image distance.
    Gaussian { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub shape: KernelShape,
    pub rate: f64,
}

/// `(L1, Linf)` norms of a kernel over the unit torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    pub l1: f64,
    pub linf: f64,
}

/// Shortest periodic representative of a coordinate difference, in
/// `[-0.5, 0.5]`.
#[inline]
pub fn min_image(dx: f64) -> f64 {
    dx - dx.round()
}

/// Squared minimum-image Euclidean distance.
#[inline]
pub fn min_image_dist2(dx: &[f64]) -> f64 {
    dx.iter()
        .map(|&c| {
            let m = min_image(c);
            m * m
        })
        .sum()
}

impl Kernel {
    pub fn tophat(radius: f64, rate: f64) -> Result<Self, KernelError> {
        Self::new(KernelShape::TopHat { radius }, rate)
    }

    pub fn constant(rate: f64) -> Result<Self, KernelError> {
        Self::new(KernelShape::Constant, rate)
    }

    pub fn gaussian(width: f64, rate: f64) -> Result<Self, KernelError> {
        Self::new(KernelShape::Gaussian { width }, rate)
    }

    pub fn new(shape: KernelShape, rate: f64) -> Result<Self, KernelError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(KernelError::Rate(rate));
        }
        match shape {
            KernelShape::TopHat { radius } if !(radius > 0.0 && radius <= 0.5) => {
                return Err(KernelError::Radius(radius))
            }
            KernelShape::Gaussian { width } if !(width.is_finite() && width > 0.0) => {
                return Err(KernelError::Width(width))
            }
            _ => {}
        }
        Ok(Kernel { shape, rate })
    }

    /// Kernel value at displacement `dx` (any real vector; wrapped here).
    #[inline]
    pub fn eval(&self, dx: &[f64]) -> f64 {
        match self.shape {
            KernelShape::Constant => self.rate,
            KernelShape::TopHat { radius } => {
                if min_image_dist2(dx) <= radius * radius {
                    self.rate
                } else {
                    0.0
                }
            }
            KernelShape::Gaussian { width } => {
                self.rate * (-min_image_dist2(dx) / (2.0 * width * width)).exp()
            }
        }
    }

    /// Radius outside of which the kernel vanishes, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self.shape {
            KernelShape::TopHat { radius } => Some(radius),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rate == 0.0
    }

    /// Closed-form norms on the `dim`-dimensional unit torus.
    pub fn norms(&self, dim: usize) -> KernelNorms {
        let d = dim as f64;
        let l1 = match self.shape {
            KernelShape::Constant => self.rate,
            // radius <= 1/2, so the ball never overlaps its periodic images
            KernelShape::TopHat { radius } => {
                self.rate * PI.powf(d / 2.0) * radius.powf(d) / gamma(d / 2.0 + 1.0)
            }
            KernelShape::Gaussian { width } => {
                let per_axis =
                    width * (2.0 * PI).sqrt() * erf(1.0 / (2.0 * std::f64::consts::SQRT_2 * width));
                self.rate * per_axis.powi(dim as i32)
            }
        };
        KernelNorms { l1, linf: self.rate }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            KernelShape::TopHat { radius } => {
                write!(f, "tophat(radius={radius:?}, rate={:?})", self.rate)
            }
            KernelShape::Constant => write!(f, "constant(rate={:?})", self.rate),
            KernelShape::Gaussian { width } => {
                write!(f, "gaussian(width={width:?}, rate={:?})", self.rate)
            }
        }
    }
}
