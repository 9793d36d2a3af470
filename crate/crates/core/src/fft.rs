//! Radix-2 complex FFT, 1-D and row/column 2-D.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::new(r * libm::cos(theta), r * libm::sin(theta))
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.re * k, self.im * k)
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Inverse transform including the `1/n` factor.
    Inverse,
}

/// In-place iterative Cooley-Tukey transform. Length must be a power of two.
pub fn fft(data: &mut [Complex], direction: Direction) -> Result<()> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(alloc::format!(
            "fft length {n} is not a power of two"
        )));
    }
    let bits = n.trailing_zeros();
    if bits > 0 {
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
    }
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let twiddles: Vec<Complex> = (0..half)
            .map(|k| {
                if k == 0 {
                    Complex::new(1.0, 0.0)
                } else {
                    Complex::from_polar(1.0, sign * 2.0 * core::f64::consts::PI * k as f64 / len as f64)
                }
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = data[start + k];
                let b = data[start + k + half] * twiddles[k];
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
    if direction == Direction::Inverse {
        let inv = 1.0 / n as f64;
        data.iter_mut().for_each(|c| *c = c.scale(inv));
    }
    Ok(())
}

/// 2-D transform of a row-major `height x width` grid.
pub fn fft2d(data: &mut [Complex], width: usize, height: usize, direction: Direction) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::LengthMismatch {
            expected: width * height,
            actual: data.len(),
        });
    }
    for row in data.chunks_mut(width) {
        fft(row, direction)?;
    }
    let mut column = alloc::vec![Complex::ZERO; height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        fft(&mut column, direction)?;
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
    Ok(())
}
