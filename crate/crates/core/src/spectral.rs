//! Spectral-residual saliency.
//!
//! The log-amplitude spectrum of a downsampled luminance image is compared
//! with its local average; what is left over (the residual) is recombined with
//! the original phase and transformed back. Statistically unexpected regions
//! light up.

use alloc::vec::Vec;

use crate::fft::{fft2d, Complex, Direction};
use crate::heatmap::Heatmap;
use crate::tensor::Tensor3;
use crate::{Error, Result};

/// Luminance weights for RGB input.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Added inside the logarithm so zero-amplitude bins stay finite.
pub const LOG_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    /// Side of the square working grid. Power of two, at least 8.
    pub internal_size: usize,
    /// Side of the box filter applied to the log-amplitude spectrum. Odd, at least 3.
    pub avg_kernel: usize,
    /// Gaussian blur sigma, in working-grid pixels.
    pub blur_sigma: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            internal_size: 64,
            avg_kernel: 3,
            blur_sigma: 2.5,
        }
    }
}

impl SpectralParams {
    pub fn validate(&self) -> Result<()> {
        if self.internal_size < 8 || !self.internal_size.is_power_of_two() {
            return Err(Error::InvalidParameter(alloc::format!(
                "internal size {} must be a power of two >= 8",
                self.internal_size
            )));
        }
        if self.avg_kernel < 3 || self.avg_kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(alloc::format!(
                "averaging kernel {} must be odd and >= 3",
                self.avg_kernel
            )));
        }
        if !(self.blur_sigma > 0.0) || !self.blur_sigma.is_finite() {
            return Err(Error::InvalidParameter("blur sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Collapses a 1- or 3-channel image to luminance.
pub fn luminance(image: &Tensor3) -> Result<Heatmap> {
    let values = match image.channels() {
        1 => image.values().to_vec(),
        3 => image
            .values()
            .chunks(3)
            .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
            .collect(),
        c => {
            return Err(Error::InvalidParameter(alloc::format!(
                "expected 1 or 3 channels, got {c}"
            )))
        }
    };
    Heatmap::new(image.width(), image.height(), values)
}

/// Saliency map at the input resolution, max-normalized to 255.
pub fn spectral_residual(image: &Tensor3, params: &SpectralParams) -> Result<Heatmap> {
    params.validate()?;
    let n = params.internal_size;
    let small = luminance(image)?.resize_bilinear(n, n)?;

    let mut spectrum: Vec<Complex> = small.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2d(&mut spectrum, n, n, Direction::Forward)?;

    let amplitude: Vec<f64> = spectrum.iter().map(|c| c.norm()).collect();
    let log_amp: Vec<f64> = amplitude.iter().map(|&a| libm::log(a + LOG_DELTA)).collect();
    let smoothed = box_filter_wrapped(&log_amp, n, params.avg_kernel);

    // Bins with exactly zero amplitude carry no phase and contribute nothing.
    for ((c, &a), (l, m)) in spectrum
        .iter_mut()
        .zip(&amplitude)
        .zip(log_amp.iter().zip(&smoothed))
    {
        *c = if a > 0.0 {
            c.scale(libm::exp(l - m) / a)
        } else {
            Complex::ZERO
        };
    }
    fft2d(&mut spectrum, n, n, Direction::Inverse)?;

    let energy: Vec<f64> = spectrum.iter().map(|c| c.norm_sqr()).collect();
    let blurred = gaussian_blur_wrapped(&energy, n, params.blur_sigma);
    Heatmap::new(n, n, blurred)?
        .resize_bilinear(image.width(), image.height())?
        .normalize_max()
}

/// Mean over a `k x k` window on a periodic `n x n` grid.
fn box_filter_wrapped(values: &[f64], n: usize, k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    let area = (k * k) as f64;
    let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
    let mut out = Vec::with_capacity(values.len());
    for y in 0..n as isize {
        for x in 0..n as isize {
            let mut s = 0.0;
            for dy in -r..=r {
                let row = wrap(y + dy) * n;
                for dx in -r..=r {
                    s += values[row + wrap(x + dx)];
                }
            }
            out.push(s / area);
        }
    }
    out
}

/// Separable Gaussian blur with radius `ceil(3 sigma)` and periodic boundaries,
/// matching the circular domain of the inverse transform.
fn gaussian_blur_wrapped(values: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|d| libm::exp(-((d * d) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    let wrap = |i: isize| i.rem_euclid(n as isize) as usize;

    let mut tmp = alloc::vec![0.0; values.len()];
    for y in 0..n {
        for x in 0..n as isize {
            tmp[y * n + x as usize] = kernel
                .iter()
                .enumerate()
                .map(|(i, w)| w * values[y * n + wrap(x + i as isize - radius)])
                .sum();
        }
    }
    let mut out = alloc::vec![0.0; values.len()];
    for y in 0..n as isize {
        for x in 0..n {
            out[y as usize * n + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, w)| w * tmp[wrap(y + i as isize - radius) * n + x])
                .sum();
        }
    }
    out
}
