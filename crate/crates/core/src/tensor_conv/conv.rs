//! Standard and equirectangular convolutions with hand-written backward passes.
//!
//! Both variants share one engine: every output position gathers `r^2` taps
//! per input channel, each tap being a (possibly degenerate) bilinear lookup.
//! Rows are processed independently and reduced in row order, so results do
//! not depend on how rows are split across threads.

use rand::Rng;
use rayon::prelude::*;

use super::sampling::BilinearTap;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::kernel_offsets::OffsetField;

/// Convolution parameters: weights `[out, in, r, r]`, one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weights: Tensor,
    pub bias: Vec<f64>,
    pub stride: usize,
}

impl ConvLayer {
    pub fn new(weights: Tensor, bias: Vec<f64>, stride: usize) -> Result<Self> {
        let s = weights.shape();
        if s.len() != 4 || s[2] != s[3] || s[2] % 2 == 0 {
            return Err(Error::ShapeMismatch(format!(
                "weights must be [out, in, r, r] with odd r, got {s:?}"
            )));
        }
        if bias.len() != s[0] {
            return Err(Error::ShapeMismatch(format!(
                "{} biases for {} output channels",
                bias.len(),
                s[0]
            )));
        }
        if stride == 0 {
            return Err(Error::ShapeMismatch("stride must be at least 1".into()));
        }
        Ok(Self {
            weights,
            bias,
            stride,
        })
    }

    /// Uniform init in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn init_uniform<R: Rng>(out_ch: usize, in_ch: usize, r: usize, stride: usize, rng: &mut R) -> Self {
        let fan_in = (in_ch * r * r) as f64;
        let fan_out = (out_ch * r * r) as f64;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        let n = out_ch * in_ch * r * r;
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Self {
            weights: Tensor::from_parts_unchecked(vec![out_ch, in_ch, r, r], data),
            bias: vec![0.0; out_ch],
            stride,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn resolution(&self) -> usize {
        self.weights.shape()[2]
    }
}

/// Zero padding policy of the standard convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding.
    Valid,
    /// `(r - 1) / 2` pixels on every side.
    Same,
    Zeros(usize),
}

impl Padding {
    pub fn amount(&self, r: usize) -> usize {
        match *self {
            Padding::Valid => 0,
            Padding::Same => (r - 1) / 2,
            Padding::Zeros(p) => p,
        }
    }
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

trait TapSource: Sync {
    fn out_dims(&self) -> (usize, usize);
    fn taps(&self) -> usize;
    fn gather(&self, vo: usize, uo: usize, k: usize) -> BilinearTap;
}

struct StandardTaps {
    h: usize,
    w: usize,
    r: usize,
    stride: usize,
    pad: usize,
    out: (usize, usize),
}

impl TapSource for StandardTaps {
    fn out_dims(&self) -> (usize, usize) {
        self.out
    }

    fn taps(&self) -> usize {
        self.r * self.r
    }

    #[inline]
    fn gather(&self, vo: usize, uo: usize, k: usize) -> BilinearTap {
        let (a, b) = (k / self.r, k % self.r);
        let y = (vo * self.stride + a) as isize - self.pad as isize;
        let x = (uo * self.stride + b) as isize - self.pad as isize;
        if y < 0 || x < 0 || y >= self.h as isize || x >= self.w as isize {
            return BilinearTap {
                idx: [0; 4],
                weights: [0.0; 4],
                clamped: false,
            };
        }
        let i = y as usize * self.w + x as usize;
        BilinearTap {
            idx: [i; 4],
            weights: [1.0, 0.0, 0.0, 0.0],
            clamped: false,
        }
    }
}

/// Precomputed per-row bilinear lookups for an offset field. The column part
/// is stored as an integer base plus a fraction so that moving the kernel by
/// whole columns reuses identical weights.
#[derive(Debug, Clone, Copy)]
struct EquiTap {
    y0: usize,
    y1: usize,
    fy: f64,
    base: usize,
    fx: f64,
    clamped: bool,
}

struct EquiTaps {
    w: usize,
    stride: usize,
    taps: usize,
    out: (usize, usize),
    rows: Vec<EquiTap>,
}

impl EquiTaps {
    fn new(field: &OffsetField, stride: usize) -> Self {
        let g = field.geometry();
        let (h, w) = (g.height, g.width);
        let taps = field.spec().taps();
        let out = ((h - 1) / stride + 1, (w - 1) / stride + 1);
        let mut rows = Vec::with_capacity(out.0 * taps);
        let vmax = (h - 1) as f64;
        for vo in 0..out.0 {
            for &[u, v] in field.row(vo * stride) {
                let clamped = v > vmax || v < 0.0;
                let vv = v.clamp(0.0, vmax);
                let y0 = (vv.floor() as usize).min(h - 1);
                let base = (u.floor() as usize).min(w - 1);
                rows.push(EquiTap {
                    y0,
                    y1: (y0 + 1).min(h - 1),
                    fy: vv - y0 as f64,
                    base,
                    fx: u - base as f64,
                    clamped,
                });
            }
        }
        Self {
            w,
            stride,
            taps,
            out,
            rows,
        }
    }
}

impl TapSource for EquiTaps {
    fn out_dims(&self) -> (usize, usize) {
        self.out
    }

    fn taps(&self) -> usize {
        self.taps
    }

    #[inline]
    fn gather(&self, vo: usize, uo: usize, k: usize) -> BilinearTap {
        let t = &self.rows[vo * self.taps + k];
        let x0 = (t.base + uo * self.stride) % self.w;
        BilinearTap::from_parts(self.w, t.y0, t.y1, t.fy, x0, (x0 + 1) % self.w, t.fx, t.clamped)
    }
}

fn check_channels(x: &Tensor, layer: &ConvLayer) -> Result<(usize, usize, usize)> {
    let (c, h, w) = x.dims3()?;
    if c != layer.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "input has {c} channels, layer expects {}",
            layer.in_channels()
        )));
    }
    Ok((c, h, w))
}

fn standard_taps(x: &Tensor, layer: &ConvLayer, padding: Padding) -> Result<StandardTaps> {
    let (_, h, w) = check_channels(x, layer)?;
    let r = layer.resolution();
    let pad = padding.amount(r);
    if h + 2 * pad < r || w + 2 * pad < r {
        return Err(Error::ShapeMismatch(format!(
            "{h}x{w} input with padding {pad} is smaller than the {r}x{r} kernel"
        )));
    }
    let s = layer.stride;
    Ok(StandardTaps {
        h,
        w,
        r,
        stride: s,
        pad,
        out: ((h + 2 * pad - r) / s + 1, (w + 2 * pad - r) / s + 1),
    })
}

fn equi_taps(x: &Tensor, layer: &ConvLayer, field: &OffsetField) -> Result<EquiTaps> {
    let (_, h, w) = check_channels(x, layer)?;
    let g = field.geometry();
    if g.height != h || g.width != w {
        return Err(Error::ShapeMismatch(format!(
            "offset field is for {}x{}, input is {w}x{h}",
            g.width, g.height
        )));
    }
    if field.spec().resolution != layer.resolution() {
        return Err(Error::ShapeMismatch(format!(
            "offset field resolution {} does not match kernel resolution {}",
            field.spec().resolution,
            layer.resolution()
        )));
    }
    Ok(EquiTaps::new(field, layer.stride))
}

/// Cross-correlation with zero padding.
pub fn conv_standard(x: &Tensor, layer: &ConvLayer, padding: Padding) -> Result<Tensor> {
    let src = standard_taps(x, layer, padding)?;
    Ok(forward(x, layer, &src))
}

pub fn conv_standard_backward(x: &Tensor, layer: &ConvLayer, padding: Padding, grad_out: &Tensor) -> Result<ConvGrads> {
    let src = standard_taps(x, layer, padding)?;
    backward(x, layer, &src, grad_out)
}

/// Equirectangular convolution: every tap is a bilinear sample at the
/// field's position, with horizontal wrap and no padding.
pub fn conv_equi(x: &Tensor, layer: &ConvLayer, field: &OffsetField) -> Result<Tensor> {
    let src = equi_taps(x, layer, field)?;
    Ok(forward(x, layer, &src))
}

pub fn conv_equi_backward(x: &Tensor, layer: &ConvLayer, field: &OffsetField, grad_out: &Tensor) -> Result<ConvGrads> {
    let src = equi_taps(x, layer, field)?;
    backward(x, layer, &src, grad_out)
}

/// Input columns of output row `vo`, laid out `[(c * taps + k) * wo + uo]`.
fn im2col_row(x: &Tensor, src: &impl TapSource, vo: usize) -> Vec<f64> {
    let (c, h, w) = x.dims3().expect("checked");
    let (_, wo) = src.out_dims();
    let kk = src.taps();
    let plane = h * w;
    let mut cols = vec![0.0; c * kk * wo];
    for k in 0..kk {
        for uo in 0..wo {
            let tap = src.gather(vo, uo, k);
            for ci in 0..c {
                cols[(ci * kk + k) * wo + uo] = tap.apply(&x.data()[ci * plane..(ci + 1) * plane]);
            }
        }
    }
    cols
}

fn forward(x: &Tensor, layer: &ConvLayer, src: &impl TapSource) -> Tensor {
    let (ho, wo) = src.out_dims();
    let o = layer.out_channels();
    let ck = layer.in_channels() * src.taps();
    let wts = layer.weights.data();
    let rows: Vec<Vec<f64>> = (0..ho)
        .into_par_iter()
        .map(|vo| {
            let cols = im2col_row(x, src, vo);
            let mut out = vec![0.0; o * wo];
            for oi in 0..o {
                let acc = &mut out[oi * wo..(oi + 1) * wo];
                acc.fill(layer.bias[oi]);
                for (j, &wj) in wts[oi * ck..(oi + 1) * ck].iter().enumerate() {
                    let col = &cols[j * wo..(j + 1) * wo];
                    for (a, &cv) in acc.iter_mut().zip(col) {
                        *a += wj * cv;
                    }
                }
            }
            out
        })
        .collect();
    let mut data = vec![0.0; o * ho * wo];
    for (vo, row) in rows.iter().enumerate() {
        for oi in 0..o {
            data[(oi * ho + vo) * wo..(oi * ho + vo + 1) * wo].copy_from_slice(&row[oi * wo..(oi + 1) * wo]);
        }
    }
    Tensor::from_parts_unchecked(vec![o, ho, wo], data)
}

struct RowGrads {
    weights: Vec<f64>,
    bias: Vec<f64>,
    dcols: Vec<f64>,
}

fn backward(x: &Tensor, layer: &ConvLayer, src: &impl TapSource, grad_out: &Tensor) -> Result<ConvGrads> {
    let (c, h, w) = x.dims3()?;
    let (ho, wo) = src.out_dims();
    let o = layer.out_channels();
    if grad_out.shape() != [o, ho, wo] {
        return Err(Error::ShapeMismatch(format!(
            "output gradient {:?} does not match output shape {:?}",
            grad_out.shape(),
            [o, ho, wo]
        )));
    }
    let kk = src.taps();
    let ck = c * kk;
    let wts = layer.weights.data();
    let g = grad_out.data();

    let per_row: Vec<RowGrads> = (0..ho)
        .into_par_iter()
        .map(|vo| {
            let cols = im2col_row(x, src, vo);
            let mut gw = vec![0.0; o * ck];
            let mut gb = vec![0.0; o];
            let mut dcols = vec![0.0; ck * wo];
            for oi in 0..o {
                let grow = &g[(oi * ho + vo) * wo..(oi * ho + vo + 1) * wo];
                gb[oi] = grow.iter().sum();
                for j in 0..ck {
                    let col = &cols[j * wo..(j + 1) * wo];
                    gw[oi * ck + j] = grow.iter().zip(col).map(|(a, b)| a * b).sum();
                    let wj = wts[oi * ck + j];
                    for (d, &gv) in dcols[j * wo..(j + 1) * wo].iter_mut().zip(grow) {
                        *d += wj * gv;
                    }
                }
            }
            RowGrads {
                weights: gw,
                bias: gb,
                dcols,
            }
        })
        .collect();

    let mut gw = vec![0.0; o * ck];
    let mut gb = vec![0.0; o];
    let mut gin = vec![0.0; c * h * w];
    let plane = h * w;
    for (vo, row) in per_row.iter().enumerate() {
        for (a, b) in gw.iter_mut().zip(&row.weights) {
            *a += b;
        }
        for (a, b) in gb.iter_mut().zip(&row.bias) {
            *a += b;
        }
        for k in 0..kk {
            for uo in 0..wo {
                let tap = src.gather(vo, uo, k);
                for ci in 0..c {
                    let d = row.dcols[(ci * kk + k) * wo + uo];
                    let dst = &mut gin[ci * plane..(ci + 1) * plane];
                    for t in 0..4 {
                        dst[tap.idx[t]] += tap.weights[t] * d;
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_parts_unchecked(vec![c, h, w], gin),
        weights: Tensor::from_parts_unchecked(layer.weights.shape().to_vec(), gw),
        bias: gb,
    })
}
