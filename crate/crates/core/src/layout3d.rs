//! Corner extraction from probability maps and 3D layout reconstruction
//! under ceiling-floor parallelism.
//!
//! The camera sits at the origin, `camera_height` above the floor plane
//! (1 for reconstructed layouts, so every result is up to scale). Walls are
//! vertical; no angle between walls is assumed.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gt_synth::LayoutModel;
use crate::maps::ProbabilityMap;
use crate::polygon::{self, Point};
use crate::sphere::{wrap_angle, ImageGeometry, SphericalAngles};

/// Ceiling and floor corner of one wall-wall boundary, in pixels `[u, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerPair {
    pub ceil: [f64; 2],
    pub floor: [f64; 2],
}

/// Corner pairs ordered left to right by ceiling-corner column.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CornerSet {
    pub pairs: Vec<CornerPair>,
}

impl CornerSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn default_camera_height() -> f64 {
    1.0
}

/// Floor polygon plus a parallel ceiling. The floor lies at `y = -camera_height`
/// and the ceiling at `y = ceiling_height - camera_height`; `ceiling_height`
/// is the floor-to-ceiling distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout3D {
    /// `(x, z)` vertices.
    pub floor: Vec<Point>,
    pub ceiling_height: f64,
    #[serde(default = "default_camera_height")]
    pub camera_height: f64,
}

/// Surface hit by a camera ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Ceiling,
    Floor,
    /// Wall between floor vertices `k` and `k + 1`.
    Wall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub surface: Surface,
    /// Distance along the unit direction.
    pub distance: f64,
    pub point: [f64; 3],
}

impl Layout3D {
    pub fn new(floor: Vec<Point>, ceiling_height: f64, camera_height: f64) -> Result<Self> {
        let l = Self {
            floor,
            ceiling_height,
            camera_height,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.floor.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", self.floor.len())));
        }
        if self.floor.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        if !(self.camera_height > 0.0) || !(self.ceiling_height > self.camera_height) {
            return Err(Error::InvalidLayout(format!(
                "camera height {} must lie strictly between floor and ceiling height {}",
                self.camera_height, self.ceiling_height
            )));
        }
        if polygon::area(&self.floor) <= 0.0 {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        if !polygon::is_simple(&self.floor) {
            return Err(Error::DegeneratePolygon("self-intersecting floor polygon".into()));
        }
        Ok(())
    }

    pub fn floor_y(&self) -> f64 {
        -self.camera_height
    }

    pub fn ceiling_y(&self) -> f64 {
        self.ceiling_height - self.camera_height
    }

    pub fn floor_area(&self) -> f64 {
        polygon::area(&self.floor)
    }

    pub fn volume(&self) -> f64 {
        self.floor_area() * self.ceiling_height
    }

    pub fn contains_camera(&self) -> bool {
        polygon::contains(&self.floor, [0.0, 0.0])
    }

    /// Uniform scaling (vertices, ceiling and camera height).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            floor: self.floor.iter().map(|p| [p[0] * s, p[1] * s]).collect(),
            ceiling_height: self.ceiling_height * s,
            camera_height: self.camera_height * s,
        }
    }

    /// Rotation about the vertical axis that increases every vertex longitude by `angle`.
    pub fn rotated_y(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            floor: self
                .floor
                .iter()
                .map(|p| [c * p[0] + s * p[1], -s * p[0] + c * p[1]])
                .collect(),
            ..self.clone()
        }
    }

    /// First surface hit by the ray from `(0, origin_y, 0)` along unit `dir`.
    /// Returns `None` when the origin is not inside the room.
    pub fn cast_ray(&self, origin_y: f64, dir: [f64; 3]) -> Option<RayHit> {
        let [dx, dy, dz] = dir;
        let ceil = self.ceiling_y();
        let floor = self.floor_y();
        if origin_y <= floor || origin_y >= ceil {
            return None;
        }
        let n = self.floor.len();
        let mut best: Option<(f64, usize)> = None;
        for k in 0..n {
            let a = self.floor[k];
            let b = self.floor[(k + 1) % n];
            let e = [b[0] - a[0], b[1] - a[1]];
            let denom = dx * e[1] - dz * e[0];
            if denom == 0.0 {
                continue;
            }
            // t * d = a + s * e
            let t = (a[0] * e[1] - a[1] * e[0]) / denom;
            let s = (a[0] * dz - a[1] * dx) / denom;
            // small slack so rays through a vertex hit one of its walls
            if t > 0.0 && (-1e-9..=1.0 + 1e-9).contains(&s) && best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, k));
            }
        }
        let plane_hit = |surface: Surface, y: f64| {
            let t = (y - origin_y) / dy;
            RayHit {
                surface,
                distance: t,
                point: [t * dx, y, t * dz],
            }
        };
        match best {
            Some((t, k)) => {
                let y = origin_y + t * dy;
                if y > ceil {
                    Some(plane_hit(Surface::Ceiling, ceil))
                } else if y < floor {
                    Some(plane_hit(Surface::Floor, floor))
                } else {
                    Some(RayHit {
                        surface: Surface::Wall(k),
                        distance: t,
                        point: [t * dx, y, t * dz],
                    })
                }
            }
            None if dx == 0.0 && dz == 0.0 && dy != 0.0 => {
                if !self.contains_camera() {
                    return None;
                }
                Some(if dy > 0.0 {
                    plane_hit(Surface::Ceiling, ceil)
                } else {
                    plane_hit(Surface::Floor, floor)
                })
            }
            None => None,
        }
    }

    /// Longitude of floor vertex `k`.
    pub fn vertex_longitude(&self, k: usize) -> f64 {
        let p = self.floor[k];
        wrap_angle(p[0].atan2(p[1]))
    }

    /// Checks that the camera is inside and every wall is seen left to right
    /// in polygon order. Returns `true` when vertex longitudes increase along
    /// the polygon, `false` when they decrease.
    pub fn check_visibility(&self) -> Result<bool> {
        if !self.contains_camera() {
            return Err(Error::CameraOutsidePolygon);
        }
        let n = self.floor.len();
        let steps: Vec<f64> = (0..n)
            .map(|k| wrap_angle(self.vertex_longitude((k + 1) % n) - self.vertex_longitude(k)))
            .collect();
        let increasing = steps.iter().all(|&s| s > 0.0);
        let decreasing = steps.iter().all(|&s| s < 0.0);
        let total: f64 = steps.iter().sum();
        if !(increasing || decreasing) || (total.abs() - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::OccludedWall);
        }
        Ok(increasing)
    }
}

/// Peak detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub min_peak: f64,
    /// Suppression radius in pixels (Euclidean, horizontally wrapped).
    pub nms_radius: f64,
    /// Refine each peak to sub-pixel precision with a parabola through the
    /// log values of its horizontal and vertical neighbors.
    #[serde(default = "default_subpixel")]
    pub subpixel: bool,
}

fn default_subpixel() -> bool {
    true
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            min_peak: 0.5,
            nms_radius: 5.0,
            subpixel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub u: f64,
    pub v: f64,
    pub value: f64,
}

/// Extracted corners plus the peaks that could not be paired.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerExtraction {
    pub corners: CornerSet,
    pub unmatched: Vec<Peak>,
}

/// Local maxima above `min_peak` after non-maximum suppression, in
/// decreasing order of value.
pub fn find_peaks(map: &ProbabilityMap, params: &PeakParams) -> Vec<Peak> {
    let (w, h) = (map.width, map.height);
    let r = params.nms_radius.max(0.0);
    let ri = r.ceil() as isize;
    let r2 = r * r;
    let wrap_dx = |a: usize, b: usize| {
        let d = (a as isize - b as isize).rem_euclid(w as isize);
        d.min(w as isize - d) as f64
    };
    let mut cands: Vec<(usize, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let val = map.get(x, y);
            if val < params.min_peak {
                continue;
            }
            let idx = y * w + x;
            let mut is_max = true;
            'outer: for dy in -ri..=ri {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -ri..=ri {
                    if (dx * dx + dy * dy) as f64 > r2 || (dx == 0 && dy == 0) {
                        continue;
                    }
                    let xx = (x as isize + dx).rem_euclid(w as isize) as usize;
                    let q = map.get(xx, yy as usize);
                    let qi = yy as usize * w + xx;
                    if q > val || (q == val && qi < idx) {
                        is_max = false;
                        break 'outer;
                    }
                }
            }
            if is_max {
                cands.push((idx, val));
            }
        }
    }
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, val) in cands {
        let (x, y) = (idx % w, idx / w);
        let close = kept.iter().any(|&(kx, ky, _)| {
            let dx = wrap_dx(x, kx);
            let dy = y as f64 - ky as f64;
            dx * dx + dy * dy <= r2
        });
        if !close {
            kept.push((x, y, val));
        }
    }
    kept.into_iter()
        .map(|(x, y, value)| {
            let (mut u, mut v) = (x as f64, y as f64);
            if params.subpixel {
                let left = map.get((x + w - 1) % w, y);
                let right = map.get((x + 1) % w, y);
                u += log_parabola_offset(left, value, right);
                if y > 0 && y + 1 < h {
                    v += log_parabola_offset(map.get(x, y - 1), value, map.get(x, y + 1));
                }
            }
            Peak {
                u: if u < 0.0 { u + w as f64 } else { u % w as f64 },
                v,
                value,
            }
        })
        .collect()
}

/// Vertex of the parabola through `ln a`, `ln b`, `ln c` at -1, 0, 1. Exact
/// for sampled Gaussians; 0 when the fit is not a proper maximum.
fn log_parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return 0.0;
    }
    let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
    let curv = la - 2.0 * lb + lc;
    if !(curv < 0.0) {
        return 0.0;
    }
    (0.5 * (la - lc) / curv).clamp(-0.5, 0.5)
}

/// Peaks of the corner map split into ceiling (upper half) and floor (lower
/// half) corners and paired greedily by nearest column with wrap.
pub fn extract_corners(map: &ProbabilityMap, params: &PeakParams) -> Result<CornerExtraction> {
    let geom = ImageGeometry::with_any_aspect(map.width, map.height)?;
    let peaks = find_peaks(map, params);
    let half = map.height as f64 / 2.0;
    let (ceil, floor): (Vec<Peak>, Vec<Peak>) = peaks.into_iter().partition(|p| p.v < half);
    let mut cand: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(ceil.len() * floor.len());
    for (i, c) in ceil.iter().enumerate() {
        for (j, f) in floor.iter().enumerate() {
            let d = geom.wrapped_du(c.u, f.u).abs();
            cand.push((d, c.value + f.value, i, j));
        }
    }
    cand.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut used_c = vec![false; ceil.len()];
    let mut used_f = vec![false; floor.len()];
    let mut pairs = Vec::new();
    for (_, _, i, j) in cand {
        if used_c[i] || used_f[j] {
            continue;
        }
        used_c[i] = true;
        used_f[j] = true;
        pairs.push(CornerPair {
            ceil: [ceil[i].u, ceil[i].v],
            floor: [floor[j].u, floor[j].v],
        });
    }
    pairs.sort_by(|a, b| a.ceil[0].total_cmp(&b.ceil[0]).then(a.ceil[1].total_cmp(&b.ceil[1])));
    let unmatched: Vec<Peak> = ceil
        .iter()
        .zip(&used_c)
        .chain(floor.iter().zip(&used_f))
        .filter(|(_, &u)| !u)
        .map(|(p, _)| *p)
        .collect();
    if !unmatched.is_empty() {
        log::warn!(
            "{} corner peaks left unpaired ({} ceiling, {} floor candidates)",
            unmatched.len(),
            ceil.len(),
            floor.len()
        );
    }
    if pairs.len() < 3 {
        return Err(Error::InsufficientCorners { found: pairs.len() });
    }
    Ok(CornerExtraction {
        corners: CornerSet { pairs },
        unmatched,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Floor vertex of a floor-corner pixel at unit camera height.
pub fn floor_vertex(geom: &ImageGeometry, index: usize, u: f64, v: f64) -> Result<Point> {
    let r = geom.pixel_to_unit_vector(u, v);
    if !(r.y < 0.0) {
        return Err(Error::FloorCornerAboveHorizon { index, u, v });
    }
    let t = -1.0 / r.y;
    Ok([t * r.x, t * r.z])
}

/// Per-wall estimates of the ceiling height above the camera.
pub fn wall_heights(geom: &ImageGeometry, corners: &CornerSet) -> Result<Vec<f64>> {
    corners
        .pairs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let f = floor_vertex(geom, k, p.floor[0], p.floor[1])?;
            let c = geom.pixel_to_unit_vector(p.ceil[0], p.ceil[1]);
            if !(c.y > 0.0) {
                return Err(Error::InvalidLayout(format!(
                    "ceiling corner {k} at ({:.2}, {:.2}) is not above the horizon",
                    p.ceil[0], p.ceil[1]
                )));
            }
            let dist = f[0].hypot(f[1]);
            Ok(dist * c.y / c.x.hypot(c.z))
        })
        .collect()
}

/// Projects floor corners onto the plane one unit below the camera and sets
/// the ceiling from the median of the per-wall height estimates.
pub fn reconstruct_3d(geom: &ImageGeometry, corners: &CornerSet) -> Result<Layout3D> {
    if corners.len() < 3 {
        return Err(Error::InsufficientCorners { found: corners.len() });
    }
    let floor = corners
        .pairs
        .iter()
        .enumerate()
        .map(|(k, p)| floor_vertex(geom, k, p.floor[0], p.floor[1]))
        .collect::<Result<Vec<_>>>()?;
    let mut heights = wall_heights(geom, corners)?;
    let above = median(&mut heights);
    Layout3D::new(floor, 1.0 + above, 1.0)
}

/// Projects a layout back to labeled corner pixels, ordered by column.
pub fn layout_to_model(geom: &ImageGeometry, l3d: &Layout3D) -> Result<LayoutModel> {
    l3d.validate()?;
    l3d.check_visibility()?;
    let ceil_y = l3d.ceiling_y();
    let floor_y = l3d.floor_y();
    let mut walls: Vec<CornerPair> = l3d
        .floor
        .iter()
        .map(|p| {
            let phi = p[0].atan2(p[1]);
            let rho = p[0].hypot(p[1]);
            let (u, vf) = geom.angles_to_pixel(SphericalAngles::new(phi, floor_y.atan2(rho)));
            let (_, vc) = geom.angles_to_pixel(SphericalAngles::new(phi, ceil_y.atan2(rho)));
            let u = geom.wrap_u(u);
            CornerPair {
                ceil: [u, vc],
                floor: [u, vf],
            }
        })
        .collect();
    walls.sort_by(|a, b| a.ceil[0].total_cmp(&b.ceil[0]));
    LayoutModel::new(*geom, walls, true)
}

/// Sort key for matching corner sets: ceiling column.
pub(crate) fn cmp_pairs(a: &CornerPair, b: &CornerPair) -> Ordering {
    a.ceil[0].total_cmp(&b.ceil[0])
}
