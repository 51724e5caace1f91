//! Equirectangular pixel / spherical angle / unit vector conversions.
//!
//! Axis convention: `y` points up, `z` is the forward direction at the image
//! center (`phi = 0`), and `x` points toward `phi = +pi/2`. A direction with
//! longitude `phi` and latitude `theta` is
//! `(cos(theta) sin(phi), sin(theta), cos(theta) cos(phi))`.
//!
//! Pixel coordinates are continuous; integer coordinates address stored
//! pixels, so pixel `(W/2, H/2)` looks straight ahead.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions of an equirectangular raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub width: usize,
    pub height: usize,
}

impl ImageGeometry {
    /// Full panorama geometry; requires `width == 2 * height`.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width != 2 * height {
            return Err(Error::InvalidGeometry(format!(
                "full panoramas need width = 2 * height, got {width}x{height}"
            )));
        }
        Self::with_any_aspect(width, height)
    }

    /// Geometry without the 2:1 aspect check (feature maps, crops).
    pub fn with_any_aspect(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidGeometry(format!(
                "raster must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn is_full_panorama(&self) -> bool {
        self.width == 2 * self.height
    }

    /// Pixel length of the image diagonal.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    /// Continuous pixel -> angles. Points outside the raster are canonicalized.
    pub fn pixel_to_angles(&self, u: f64, v: f64) -> SphericalAngles {
        let w = self.width as f64;
        let h = self.height as f64;
        let phi = (u - w / 2.0) * TAU / w;
        let theta = -(v - h / 2.0) * PI / h;
        SphericalAngles::new(phi, theta)
    }

    /// Angles -> continuous pixel, with `u` in `[0, W]` and `v` in `[0, H]`.
    pub fn angles_to_pixel(&self, a: SphericalAngles) -> (f64, f64) {
        let w = self.width as f64;
        let h = self.height as f64;
        let u = (a.phi / TAU + 0.5) * w;
        let v = (-a.theta / PI + 0.5) * h;
        (u, v)
    }

    pub fn pixel_to_unit_vector(&self, u: f64, v: f64) -> UnitVector {
        self.pixel_to_angles(u, v).to_unit_vector()
    }

    pub fn unit_vector_to_pixel(&self, p: UnitVector) -> (f64, f64) {
        self.angles_to_pixel(p.to_angles())
    }

    /// Wraps a horizontal pixel coordinate into `[0, W)`.
    pub fn wrap_u(&self, u: f64) -> f64 {
        let w = self.width as f64;
        let r = u.rem_euclid(w);
        if r >= w {
            0.0
        } else {
            r
        }
    }

    /// Signed horizontal difference `a - b` taken the short way around, in `[-W/2, W/2)`.
    pub fn wrapped_du(&self, a: f64, b: f64) -> f64 {
        let w = self.width as f64;
        let d = (a - b + w / 2.0).rem_euclid(w) - w / 2.0;
        if d >= w / 2.0 {
            d - w
        } else {
            d
        }
    }
}

/// Longitude `phi` in `[-pi, pi)` and latitude `theta` in `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalAngles {
    pub phi: f64,
    pub theta: f64,
}

impl SphericalAngles {
    /// Canonicalizes arbitrary angles. A latitude past a pole re-enters on the
    /// opposite meridian.
    pub fn new(phi: f64, theta: f64) -> Self {
        let mut phi = phi;
        let mut theta = theta;
        if theta.abs() > FRAC_PI_2 {
            theta = wrap_angle(theta);
        }
        if theta > FRAC_PI_2 {
            theta = PI - theta;
            phi += PI;
        } else if theta < -FRAC_PI_2 {
            theta = -PI - theta;
            phi += PI;
        }
        Self {
            phi: wrap_angle(phi),
            theta,
        }
    }

    pub fn to_unit_vector(self) -> UnitVector {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        UnitVector {
            x: ct * sp,
            y: st,
            z: ct * cp,
        }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Snaps `x` to the nearest integer when it lies within `tol` of it.
pub fn snap_near_integer(x: f64, tol: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= tol {
        r
    } else {
        x
    }
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const UNIT_NORM_TOL: f64 = 1e-12;

impl UnitVector {
    pub const FORWARD: UnitVector = UnitVector {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Accepts an already-normalized vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if (n2 - 1.0).abs() > UNIT_NORM_TOL || !n2.is_finite() {
            return Err(Error::NotUnit(n2.sqrt()));
        }
        Ok(Self { x, y, z })
    }

    /// Normalizes a nonzero vector.
    pub fn normalize(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotUnit(n));
        }
        Ok(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn normalize_array(p: [f64; 3]) -> Result<Self> {
        Self::normalize(p[0], p[1], p[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &UnitVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Longitude via the two-argument arctangent; longitude is 0 at the poles.
    pub fn to_angles(self) -> SphericalAngles {
        let y = self.y.clamp(-1.0, 1.0);
        let theta = y.asin();
        let phi = if self.x == 0.0 && self.z == 0.0 {
            0.0
        } else {
            self.x.atan2(self.z)
        };
        SphericalAngles {
            phi: wrap_angle(phi),
            theta,
        }
    }
}

/// Row-major 3x3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub m: [[f64; 3]; 3],
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Rotation about `x` that tilts the forward axis upward for positive angles:
    /// `about_x(t) * (0,0,1) = (0, sin t, cos t)`.
    pub fn about_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]],
        }
    }

    /// Rotation about `y` that increases longitude by `angle`.
    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        }
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Rotation { m }
    }

    pub fn inverse(&self) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[j][i];
            }
        }
        Rotation { m }
    }

    pub fn apply_raw(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    pub fn apply(&self, p: UnitVector) -> UnitVector {
        let [x, y, z] = self.apply_raw(p.as_array());
        UnitVector { x, y, z }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// The kernel-alignment rotation `R_y(phi) R_x(theta)`: maps the forward axis
/// onto the direction of `center`.
pub fn alignment_rotation(center: SphericalAngles) -> Rotation {
    Rotation::about_y(center.phi).compose(&Rotation::about_x(center.theta))
}

pub fn rotate_align(p: UnitVector, center: SphericalAngles) -> UnitVector {
    alignment_rotation(center).apply(p)
}
