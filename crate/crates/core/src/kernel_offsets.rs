//! Sample positions of spherical (equirectangular) convolution kernels.
//!
//! A kernel of resolution `r` and field of view `alpha` is a flat `r x r` grid
//! on the tangent plane at distance `d = r / (2 tan(alpha / 2))` from the
//! sphere center. Each grid point is projected onto the sphere, rotated so the
//! kernel center lands on the point where the kernel is applied, and projected
//! back into the equirectangular image. Positions only depend on the image
//! row, so a field stores one row of `r^2` positions per image row.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{alignment_rotation, ImageGeometry, UnitVector};

/// Square spherical kernel: `resolution` samples per side covering `fov` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub resolution: usize,
    pub fov: f64,
}

impl KernelSpec {
    pub fn new(resolution: usize, fov: f64) -> Result<Self> {
        if resolution == 0 || resolution % 2 == 0 {
            return Err(Error::InvalidKernel(format!(
                "resolution must be odd and positive, got {resolution}"
            )));
        }
        if !(fov > 0.0 && fov < PI) {
            return Err(Error::InvalidKernel(format!(
                "field of view must lie in (0, pi), got {fov}"
            )));
        }
        Ok(Self { resolution, fov })
    }

    /// Matches a standard `r x r` kernel on a `W`-wide panorama: `alpha = r * 2pi / W`.
    pub fn matching_standard(resolution: usize, geom: &ImageGeometry) -> Result<Self> {
        Self::new(resolution, resolution as f64 * TAU / geom.width as f64)
    }

    /// Atrous-like kernel with an angular step of `rate` pixel columns.
    pub fn dilated(resolution: usize, rate: f64, geom: &ImageGeometry) -> Result<Self> {
        Self::new(resolution, rate * resolution as f64 * TAU / geom.width as f64)
    }

    pub fn half(&self) -> isize {
        (self.resolution as isize - 1) / 2
    }

    pub fn taps(&self) -> usize {
        self.resolution * self.resolution
    }

    /// Distance from the sphere center to the kernel plane.
    pub fn plane_distance(&self) -> f64 {
        self.resolution as f64 / (2.0 * (self.fov / 2.0).tan())
    }

    /// Tangent-plane offsets `(i, j)` of tap `(row, col)`; `j` grows upward.
    pub fn tap_offset(&self, row: usize, col: usize) -> (f64, f64) {
        let h = self.half();
        ((col as isize - h) as f64, (h - row as isize) as f64)
    }
}

/// Unit vectors of the kernel grid before alignment, row-major from the top
/// kernel row. The center tap is `(0, 0, 1)`.
pub fn kernel_grid(spec: &KernelSpec) -> Vec<UnitVector> {
    let d = spec.plane_distance();
    let r = spec.resolution;
    let mut out = Vec::with_capacity(r * r);
    for row in 0..r {
        for col in 0..r {
            let (i, j) = spec.tap_offset(row, col);
            if i == 0.0 && j == 0.0 {
                out.push(UnitVector::FORWARD);
            } else {
                out.push(UnitVector::normalize(i, j, d).expect("kernel plane point is nonzero"));
            }
        }
    }
    out
}

/// Continuous `(u, v)` positions of every tap for a kernel centered on
/// pixel `(u0, v0)`. `u` is wrapped into `[0, W)`; `v` is never clamped.
pub fn sample_positions(geom: &ImageGeometry, spec: &KernelSpec, u0: f64, v0: f64) -> Vec<[f64; 2]> {
    let center = geom.pixel_to_angles(u0, v0);
    let rot = alignment_rotation(center);
    let c = spec.taps() / 2;
    kernel_grid(spec)
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            if k == c {
                return [geom.wrap_u(u0), v0];
            }
            let (u, v) = geom.unit_vector_to_pixel(rot.apply(p));
            [geom.wrap_u(u), v]
        })
        .collect()
}

/// Per-row tap positions for kernels centered on column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    geometry: ImageGeometry,
    spec: KernelSpec,
    positions: Vec<[f64; 2]>,
}

impl OffsetField {
    pub fn new(geometry: ImageGeometry, spec: KernelSpec) -> Self {
        let mut positions = Vec::with_capacity(geometry.height * spec.taps());
        for v in 0..geometry.height {
            positions.extend(sample_positions(&geometry, &spec, 0.0, v as f64));
        }
        Self {
            geometry,
            spec,
            positions,
        }
    }

    pub fn geometry(&self) -> &ImageGeometry {
        &self.geometry
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Positions for the kernel centered at `(0, v)`.
    pub fn row(&self, v: usize) -> &[[f64; 2]] {
        let t = self.spec.taps();
        &self.positions[v * t..(v + 1) * t]
    }

    /// Positions for the kernel centered at `(u0, v)`: the stored row shifted by `u0`.
    pub fn positions_at(&self, u0: f64, v: usize) -> Vec<[f64; 2]> {
        self.row(v)
            .iter()
            .map(|&[u, vv]| [self.geometry.wrap_u(u + u0), vv])
            .collect()
    }

    /// Flat `[H, r^2, 2]` data in `(u, v)` order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.geometry.height, self.spec.taps(), 2]
    }
}
