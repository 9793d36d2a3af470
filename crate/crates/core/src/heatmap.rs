//! Real-valued 2-D scalar fields and the elementwise transforms applied to them.
//!
//! Values are kept as `f64` and only quantized when written to disk. Most maps
//! are non-negative intensities on a 0-255 scale; the output of [`Heatmap::subtract`]
//! is signed until it is clipped.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    /// Wraps a row-major buffer. Values must be finite.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the largest value (first one on ties) as `(x, y)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Result<Self> {
        self.map(|v| v * k)
    }

    fn check_non_negative(&self) -> Result<()> {
        match self.values.iter().position(|&v| v < 0.0) {
            Some(index) => Err(Error::NegativeValue {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    fn check_same_dims(&self, other: &Heatmap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Bilinear resampling with pixel centres at `(i + 0.5) / n` and edge clamping.
    ///
    /// Source coordinate for output pixel `i` is `(i + 0.5) * src / dst - 0.5`,
    /// clamped to `[0, src - 1]`. Interpolation uses `a + t * (b - a)` so constant
    /// fields are reproduced exactly.
    pub fn resize_bilinear(&self, new_width: usize, new_height: usize) -> Result<Self> {
        if new_width == 0 || new_height == 0 {
            return Err(Error::ZeroDimension);
        }
        if (new_width, new_height) == self.dims() {
            return Ok(self.clone());
        }
        let xs = sample_positions(self.width, new_width);
        let ys = sample_positions(self.height, new_height);

        let mut values = Vec::with_capacity(new_width * new_height);
        for &(y0, y1, ty) in &ys {
            let row0 = &self.values[y0 * self.width..(y0 + 1) * self.width];
            let row1 = &self.values[y1 * self.width..(y1 + 1) * self.width];
            for &(x0, x1, tx) in &xs {
                let top = lerp(row0[x0], row0[x1], tx);
                let bottom = lerp(row1[x0], row1[x1], tx);
                values.push(lerp(top, bottom, ty));
            }
        }
        Self::new(new_width, new_height, values)
    }

    /// Scales so the maximum is exactly 255. All-zero maps stay zero.
    pub fn normalize_max(&self) -> Result<Self> {
        self.check_non_negative()?;
        let max = self.max();
        if max <= 0.0 {
            return Self::zeros(self.width, self.height);
        }
        let values = self
            .values
            .iter()
            .map(|&v| if v == max { 255.0 } else { (v / max * 255.0).min(255.0) })
            .collect();
        Self::new(self.width, self.height, values)
    }

    pub fn clip(&self, lo: f64, hi: f64) -> Result<Self> {
        if lo >= hi || lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidRange { lo, hi });
        }
        self.map(|v| v.clamp(lo, hi))
    }

    /// Elementwise `self - other`; the result may be negative.
    pub fn subtract(&self, other: &Heatmap) -> Result<Self> {
        self.check_same_dims(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.width, self.height, values)
    }

    /// Replaces negative values with zero.
    pub fn clamp_negative(&self) -> Result<Self> {
        self.map(|v| v.max(0.0))
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        return a;
    }
    let v = a + t * (b - a);
    // keep rounding from stepping outside [min(a,b), max(a,b)]
    v.clamp(a.min(b), a.max(b))
}

/// `(lower index, upper index, weight of upper)` per output coordinate.
fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = libm::floor(s) as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}
