//! 32×32 grayscale images with values in `[0, 1]`, stored row-major.

use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const PIXELS: usize = SIDE * SIDE;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    pixels: Vec<f64>,
}

impl ImageTensor {
    pub fn zeros() -> Self {
        Self {
            pixels: vec![0.0; PIXELS],
        }
    }

    pub fn filled(value: f64) -> Self {
        Self {
            pixels: vec![value.clamp(0.0, 1.0); PIXELS],
        }
    }

    /// Builds an image from 1024 row-major values. Values are clamped to `[0, 1]`;
    /// non-finite values are rejected.
    pub fn from_vec(pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != PIXELS {
            return Err(Error::shape(format!(
                "expected {PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("image contains non-finite pixels".into()));
        }
        Ok(Self {
            pixels: pixels.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(PIXELS);
        for r in 0..SIDE {
            for c in 0..SIDE {
                pixels.push(f(r, c).clamp(0.0, 1.0));
            }
        }
        Self { pixels }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * SIDE + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * SIDE + col] = value.clamp(0.0, 1.0);
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * SIDE..(row + 1) * SIDE]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pixels
    }

    /// Quantizes to 8-bit grayscale (round half away from zero).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|p| (p * 255.0).round() as u8)
            .collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PIXELS {
            return Err(Error::shape(format!(
                "expected {PIXELS} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(Self {
            pixels: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
    }
}
