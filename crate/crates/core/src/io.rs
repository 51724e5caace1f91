//! File formats: the binary tensor container, JSON documents and 8-bit PNGs.
//!
//! Tensor files start with the magic `CFLT`, then a little-endian `u16`
//! version (1), a `u8` dtype code (1 = f32, 2 = f64), a `u32` rank, one `u32`
//! per extent, and the row-major little-endian payload.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use image::{imageops::FilterType, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::ProbabilityMap;
use crate::tensor_conv::Tensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"CFLT";
pub const TENSOR_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(DType::F32),
            2 => Ok(DType::F64),
            other => Err(Error::TensorFormat(format!("unknown dtype code {other}"))),
        }
    }

    fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Encodes raw extents and values. Values are narrowed for `F32`.
pub fn encode_tensor(shape: &[usize], data: &[f64], dtype: DType) -> Result<Vec<u8>> {
    let n: usize = shape.iter().product();
    if n != data.len() {
        return Err(Error::TensorFormat(format!("shape {shape:?} holds {n} values, got {}", data.len())));
    }
    let mut out = Vec::with_capacity(11 + 4 * shape.len() + n * dtype.size());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.push(dtype.code());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &e in shape {
        let e = u32::try_from(e).map_err(|_| Error::TensorFormat(format!("extent {e} exceeds u32")))?;
        out.extend_from_slice(&e.to_le_bytes());
    }
    match dtype {
        DType::F32 => data.iter().for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        DType::F64 => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

/// Decoded tensor file: extents, values widened to f64, and stored dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub dtype: DType,
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::TensorFormat("truncated header".into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn decode_tensor(mut bytes: &[u8]) -> Result<TensorFile> {
    if take(&mut bytes, 4)? != TENSOR_MAGIC {
        return Err(Error::TensorFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes(take(&mut bytes, 2)?.try_into().unwrap());
    if version != TENSOR_VERSION {
        return Err(Error::TensorFormat(format!("unsupported version {version}")));
    }
    let dtype = DType::from_code(take(&mut bytes, 1)?[0])?;
    let ndim = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap()) as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap()) as usize);
    }
    let n = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
    let expected = n.and_then(|n| n.checked_mul(dtype.size()));
    if expected != Some(bytes.len()) {
        return Err(Error::TensorFormat(format!(
            "payload is {} bytes, header {shape:?} of {dtype:?} needs {expected:?}",
            bytes.len()
        )));
    }
    let data = match dtype {
        DType::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        DType::F64 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
    };
    Ok(TensorFile { shape, data, dtype })
}

pub fn write_tensor_file(path: &Path, shape: &[usize], data: &[f64], dtype: DType) -> Result<()> {
    let bytes = encode_tensor(shape, data, dtype)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> Result<TensorFile> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes)
}

pub fn write_tensor(path: &Path, t: &Tensor, dtype: DType) -> Result<()> {
    write_tensor_file(path, t.shape(), t.data(), dtype)
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let f = read_tensor_file(path)?;
    Tensor::new(f.shape, f.data)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn to_u8(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// 8-bit grayscale PNG with value `round(255 * y)`.
pub fn write_map_png(path: &Path, map: &ProbabilityMap) -> Result<()> {
    let img: GrayImage = ImageBuffer::from_fn(map.width as u32, map.height as u32, |x, y| {
        Luma([to_u8(map.get(x as usize, y as usize))])
    });
    img.save(path)?;
    Ok(())
}

pub fn read_map_png(path: &Path) -> Result<ProbabilityMap> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    ProbabilityMap::new(w as usize, h as usize, data)
}

/// Writes a `[3, H, W]` (or `[1, H, W]`) tensor with values in `[0, 1]` as RGB.
pub fn write_rgb_png(path: &Path, t: &Tensor) -> Result<()> {
    let (c, h, w) = t.dims3()?;
    if c != 3 && c != 1 {
        return Err(Error::ShapeMismatch(format!("cannot save {c} channels as RGB")));
    }
    let img: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch: usize| to_u8(t.at3(ch.min(c - 1), y as usize, x as usize));
        Rgb([px(0), px(1), px(2)])
    });
    img.save(path)?;
    Ok(())
}

/// Reads an RGB PNG as a `[3, H, W]` tensor in `[0, 1]`, optionally resampled
/// (triangle filter) to `size = (width, height)`.
pub fn read_rgb_png(path: &Path, size: Option<(usize, usize)>) -> Result<Tensor> {
    let mut img = image::open(path)?.into_rgb8();
    if let Some((w, h)) = size {
        if img.dimensions() != (w as u32, h as u32) {
            img = image::imageops::resize(&img, w as u32, h as u32, FilterType::Triangle);
        }
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Tensor::from_fn3(3, h, w, |c, y, x| {
        img.get_pixel(x as u32, y as u32).0[c] as f64 / 255.0
    }))
}
