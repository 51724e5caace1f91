use crate::error::{Error, Result};

/// Dense row-major array of `f64`. Images use `[channels, height, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch(format!("extents must be positive, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Builds an image tensor from `f(c, y, x)`.
    pub fn from_fn3(c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(c * h * w);
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(ci, y, x));
                }
            }
        }
        Self {
            shape: vec![c, h, w],
            data,
        }
    }

    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[c, h, w] => Ok((c, h, w)),
            s => Err(Error::ShapeMismatch(format!("expected [C, H, W], got {s:?}"))),
        }
    }

    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    pub fn set3(&mut self, c: usize, y: usize, x: usize, value: f64) {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x] = value;
    }

    /// Circular shift of image columns: output column `(x + k) mod W` holds input column `x`.
    pub fn roll_columns(&self, k: isize) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        let shift = k.rem_euclid(w as isize) as usize;
        let mut out = vec![0.0; self.data.len()];
        for row in 0..c * h {
            let src = &self.data[row * w..(row + 1) * w];
            let dst = &mut out[row * w..(row + 1) * w];
            for (x, &v) in src.iter().enumerate() {
                dst[(x + shift) % w] = v;
            }
        }
        Ok(Tensor::from_parts_unchecked(vec![c, h, w], out))
    }

    /// Column reversal: output column `x` holds input column `W - 1 - x`.
    pub fn mirror_columns(&self) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        let mut out = self.data.clone();
        for row in 0..c * h {
            out[row * w..(row + 1) * w].reverse();
        }
        Ok(Tensor::from_parts_unchecked(vec![c, h, w], out))
    }

    /// Single channel of an image tensor.
    pub fn channel(&self, c: usize) -> Result<Vec<f64>> {
        let (cc, h, w) = self.dims3()?;
        if c >= cc {
            return Err(Error::ShapeMismatch(format!("channel {c} out of {cc}")));
        }
        Ok(self.data[c * h * w..(c + 1) * h * w].to_vec())
    }

    /// Per-channel zero mean and unit variance. Constant channels are only centered.
    pub fn standardized(&self) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        let plane = h * w;
        let n = plane as f64;
        let mut out = self.data.clone();
        for s in out.chunks_mut(plane).take(c) {
            let mean = s.iter().sum::<f64>() / n;
            let sd = (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let scale = if sd > 1e-12 { 1.0 / sd } else { 1.0 };
            s.iter_mut().for_each(|v| *v = (*v - mean) * scale);
        }
        Ok(Tensor::from_parts_unchecked(vec![c, h, w], out))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
