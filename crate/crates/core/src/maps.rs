use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_conv::Tensor;

/// Single-channel `H x W` map with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} map needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::ShapeMismatch("map values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &ProbabilityMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Fraction of pixels strictly above `threshold`.
    pub fn positive_fraction(&self, threshold: f64) -> f64 {
        self.data.iter().filter(|&&v| v > threshold).count() as f64 / self.data.len() as f64
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts_unchecked(vec![1, self.height, self.width], self.data.clone())
    }

    /// Takes channel `c` of a `[C, H, W]` tensor, clamping values into `[0, 1]`.
    pub fn from_tensor_channel(t: &Tensor, c: usize) -> Result<Self> {
        let (_, h, w) = t.dims3()?;
        let data = t.channel(c)?.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    /// Circular column shift by `k` (output column `x + k` holds input column `x`).
    pub fn roll_columns(&self, k: isize) -> Self {
        let w = self.width;
        let s = k.rem_euclid(w as isize) as usize;
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.height {
            for x in 0..w {
                out[y * w + (x + s) % w] = self.data[y * w + x];
            }
        }
        Self {
            width: w,
            height: self.height,
            data: out,
        }
    }
}

/// Edge and corner maps for one image at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPair {
    pub edge: ProbabilityMap,
    pub corner: ProbabilityMap,
}
