//! Circular convolution on the periodic grid.
//!
//! `out[c] = h^d * sum_{c'} Phi(x_c - x_{c'}) u[c']`, with `Phi` evaluated at
//! grid displacements. The transform path reproduces the direct sum to
//! roundoff.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::kernels::Kernel;

/// Multidimensional complex FFT over an `M^d` grid (axis 0 fastest).
#[derive(Clone)]
pub struct GridFft {
    dim: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("dim", &self.dim).field("m", &self.m).finish()
    }
}

impl GridFft {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        GridFft { dim, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    pub fn cells(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    fn along_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let cells = self.cells();
        for axis in 0..self.dim {
            let stride = m.pow(axis as u32);
            for start in 0..cells {
                // visit each line once: the axis coordinate of its first cell is 0
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[start + j * stride] = *l;
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.forward);
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.inverse);
        let scale = 1.0 / self.cells() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Signed wavenumbers of a flat cell index.
    pub fn wavenumbers(&self, cell: usize, out: &mut [f64]) {
        let mut r = cell;
        for o in out.iter_mut().take(self.dim) {
            let k = r % self.m;
            *o = if k <= self.m / 2 { k as f64 } else { k as f64 - self.m as f64 };
            r /= self.m;
        }
    }

    /// Spectrum of the kernel sampled at grid displacements, pre-scaled by
    /// the cell volume.
    pub fn kernel_spectrum(&self, kernel: &Kernel) -> Vec<Complex64> {
        let samples = kernel_samples(kernel, self.dim, self.m);
        let mut spec: Vec<Complex64> = samples.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut spec);
        spec
    }

    pub fn convolve_with_spectrum(&self, spectrum: &[Complex64], u: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf.iter_mut().zip(spectrum).for_each(|(b, s)| *b *= s);
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// `h^d * Phi(c / M)` for every grid displacement `c`.
pub fn kernel_samples(kernel: &Kernel, dim: usize, m: usize) -> Vec<f64> {
    let cells = m.pow(dim as u32);
    let h = 1.0 / m as f64;
    let vol = h.powi(dim as i32);
    let mut dx = vec![0.0; dim];
    (0..cells)
        .map(|c| {
            let mut r = c;
            for x in dx.iter_mut() {
                *x = (r % m) as f64 * h;
                r /= m;
            }
            vol * kernel.eval(&dx)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    Direct,
    #[default]
    Fft,
}

/// Direct `O(M^{2d})` summation.
pub fn periodic_convolve_direct(kernel: &Kernel, u: &[f64], dim: usize, m: usize) -> Vec<f64> {
    let cells = m.pow(dim as u32);
    assert_eq!(u.len(), cells, "field length does not match M^d");
    let samples = kernel_samples(kernel, dim, m);
    let mut out = vec![0.0; cells];
    let mut ci = vec![0usize; dim];
    let mut cj = vec![0usize; dim];
    for (c, o) in out.iter_mut().enumerate() {
        split_index(c, m, &mut ci);
        let mut acc = 0.0;
        for (c2, &v) in u.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            split_index(c2, m, &mut cj);
            let mut disp = 0;
            let mut stride = 1;
            for a in 0..dim {
                disp += ((ci[a] + m - cj[a]) % m) * stride;
                stride *= m;
            }
            acc += samples[disp] * v;
        }
        *o = acc;
    }
    out
}

fn split_index(mut c: usize, m: usize, out: &mut [usize]) {
    for o in out.iter_mut() {
        *o = c % m;
        c /= m;
    }
}

/// Convolution of one species grid with a kernel.
pub fn periodic_convolve(kernel: &Kernel, u: &[f64], dim: usize, m: usize, method: ConvolutionMethod) -> Vec<f64> {
    match method {
        ConvolutionMethod::Direct => periodic_convolve_direct(kernel, u, dim, m),
        ConvolutionMethod::Fft => {
            assert_eq!(u.len(), m.pow(dim as u32), "field length does not match M^d");
            let fft = GridFft::new(dim, m);
            fft.convolve_with_spectrum(&fft.kernel_spectrum(kernel), u)
        }
    }
}
