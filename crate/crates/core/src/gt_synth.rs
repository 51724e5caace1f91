//! Ground-truth edge/corner maps from labeled layouts, synthetic rooms and
//! the training augmentations (random erasing, horizontal mirror/rotation).

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout3d::{CornerPair, CornerSet, Layout3D, Surface};
use crate::maps::{MapPair, ProbabilityMap};
use crate::sphere::{ImageGeometry, UnitVector};
use crate::tensor_conv::Tensor;

/// Labeled corner pairs on a panorama, left to right by ceiling column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutJson", into = "LayoutJson")]
pub struct LayoutModel {
    pub geometry: ImageGeometry,
    pub walls: Vec<CornerPair>,
    /// The last wall connects to the first across the seam.
    pub closed: bool,
}

#[derive(Serialize, Deserialize)]
struct LayoutJson {
    width: usize,
    height: usize,
    walls: Vec<CornerPair>,
    #[serde(default = "default_closed")]
    closed: bool,
}

fn default_closed() -> bool {
    true
}

impl TryFrom<LayoutJson> for LayoutModel {
    type Error = Error;

    fn try_from(j: LayoutJson) -> Result<Self> {
        let geom = ImageGeometry::with_any_aspect(j.width, j.height)?;
        LayoutModel::new(geom, j.walls, j.closed)
    }
}

impl From<LayoutModel> for LayoutJson {
    fn from(m: LayoutModel) -> Self {
        LayoutJson {
            width: m.geometry.width,
            height: m.geometry.height,
            walls: m.walls,
            closed: m.closed,
        }
    }
}

impl LayoutModel {
    pub fn new(geometry: ImageGeometry, walls: Vec<CornerPair>, closed: bool) -> Result<Self> {
        let m = Self {
            geometry,
            walls,
            closed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.geometry.width as f64;
        let half = self.geometry.height as f64 / 2.0;
        if self.walls.len() < 3 {
            return Err(Error::InvalidLayout(format!("{} walls, need at least 3", self.walls.len())));
        }
        for (k, p) in self.walls.iter().enumerate() {
            let vals = [p.ceil[0], p.ceil[1], p.floor[0], p.floor[1]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidLayout(format!("wall {k} has a non-finite coordinate")));
            }
            if !(0.0..w).contains(&p.ceil[0]) || !(0.0..w).contains(&p.floor[0]) {
                return Err(Error::InvalidLayout(format!("wall {k} column outside [0, {w})")));
            }
            if !(p.ceil[1] < half) {
                return Err(Error::InvalidLayout(format!(
                    "wall {k} ceiling corner v={} is not above the horizon",
                    p.ceil[1]
                )));
            }
            if !(p.floor[1] > half) {
                return Err(Error::FloorCornerAboveHorizon {
                    index: k,
                    u: p.floor[0],
                    v: p.floor[1],
                });
            }
            if k > 0 && !(p.ceil[0] > self.walls[k - 1].ceil[0]) {
                return Err(Error::InvalidLayout(format!("walls {} and {k} are not ordered by column", k - 1)));
            }
        }
        Ok(())
    }

    pub fn corners(&self) -> CornerSet {
        CornerSet {
            pairs: self.walls.clone(),
        }
    }

    /// Ceiling and floor corner points in 3D at unit camera height. The
    /// ceiling point keeps the horizontal distance of its floor partner.
    pub fn corner_points(&self) -> CornerPoints {
        let g = &self.geometry;
        self.walls
            .iter()
            .map(|p| {
                let f = g.pixel_to_unit_vector(p.floor[0], p.floor[1]);
                let tf = -1.0 / f.y;
                let floor = [tf * f.x, -1.0, tf * f.z];
                let dist = floor[0].hypot(floor[2]);
                let c = g.pixel_to_unit_vector(p.ceil[0], p.ceil[1]);
                let tc = dist / c.x.hypot(c.z);
                (c.as_array().map(|x| x * tc), floor)
            })
            .collect()
    }

    fn shifted(&self, start: usize, shift: f64) -> Vec<CornerPair> {
        let n = self.walls.len();
        let w = self.geometry.width as f64;
        let wrap = |u: f64| {
            let r = u - shift;
            if r < 0.0 {
                r + w
            } else {
                r
            }
        };
        (0..n)
            .map(|i| {
                let p = self.walls[(start + i) % n];
                CornerPair {
                    ceil: [wrap(p.ceil[0]), p.ceil[1]],
                    floor: [wrap(p.floor[0]), p.floor[1]],
                }
            })
            .collect()
    }
}

fn cmp_walls(a: &[CornerPair], b: &[CornerPair]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        let o = p.ceil[0]
            .total_cmp(&q.ceil[0])
            .then(p.ceil[1].total_cmp(&q.ceil[1]))
            .then(p.floor[0].total_cmp(&q.floor[0]))
            .then(p.floor[1].total_cmp(&q.floor[1]));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Line thickness (pixels) and Gaussian blur sigma (pixels) for GT maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub thickness: f64,
    pub sigma: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            thickness: 3.0,
            sigma: 2.0,
        }
    }
}

/// Largest pixel step between consecutive boundary samples.
const MAX_SAMPLE_STEP: f64 = 0.25;

fn project(geom: &ImageGeometry, p: [f64; 3]) -> [f64; 2] {
    let v = UnitVector::normalize(p[0], p[1], p[2]).expect("boundary point at the camera center");
    let (u, v) = geom.unit_vector_to_pixel(v);
    [u, v]
}

fn sample_segment(geom: &ImageGeometry, a: [f64; 3], b: [f64; 3], out: &mut Vec<[f64; 2]>) {
    fn rec(
        geom: &ImageGeometry,
        a: [f64; 3],
        b: [f64; 3],
        pa: [f64; 2],
        pb: [f64; 2],
        depth: u32,
        out: &mut Vec<[f64; 2]>,
    ) {
        let du = geom.wrapped_du(pa[0], pb[0]);
        let dv = pa[1] - pb[1];
        if depth >= 24 || du.hypot(dv) <= MAX_SAMPLE_STEP {
            out.push(pb);
            return;
        }
        let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0];
        let pm = project(geom, m);
        rec(geom, a, m, pa, pm, depth + 1, out);
        rec(geom, m, b, pm, pb, depth + 1, out);
    }
    let pa = project(geom, a);
    let pb = project(geom, b);
    out.push(pa);
    rec(geom, a, b, pa, pb, 0, out);
}

/// 3D corner points `(ceiling, floor)` in the camera frame.
pub type CornerPoints = Vec<([f64; 3], [f64; 3])>;

/// Dense pixel samples along every projected 3D layout edge.
fn boundary_samples(geom: &ImageGeometry, pts: &[([f64; 3], [f64; 3])], closed: bool) -> Vec<[f64; 2]> {
    let n = pts.len();
    let mut out = Vec::new();
    for k in 0..n {
        let (c, f) = pts[k];
        sample_segment(geom, c, f, &mut out);
        if k + 1 < n || closed {
            let (c2, f2) = pts[(k + 1) % n];
            sample_segment(geom, c, c2, &mut out);
            sample_segment(geom, f, f2, &mut out);
        }
    }
    out
}

/// Pixel positions along the projected boundary of a labeled layout, the
/// same samples the edge map is stamped from.
pub fn boundary_pixels(layout: &LayoutModel) -> Vec<[f64; 2]> {
    boundary_samples(&layout.geometry, &layout.corner_points(), layout.closed)
}

fn stamp_lines(geom: &ImageGeometry, samples: &[[f64; 2]], thickness: f64) -> Vec<f64> {
    let (w, h) = (geom.width, geom.height);
    let mut map = vec![0.0; w * h];
    let half = thickness / 2.0;
    let reach = (half + 1.0).ceil() as isize;
    for s in samples {
        let cx = s[0].round() as isize;
        let cy = s[1].round() as isize;
        for y in cy - reach..=cy + reach {
            if y < 0 || y >= h as isize {
                continue;
            }
            for x in cx - reach..=cx + reach {
                let xw = x.rem_euclid(w as isize) as usize;
                let dx = geom.wrapped_du(xw as f64, s[0]);
                let d = dx.hypot(y as f64 - s[1]);
                let cover = (half + 0.5 - d).clamp(0.0, 1.0);
                let cell = &mut map[y as usize * w + xw];
                if cover > *cell {
                    *cell = cover;
                }
            }
        }
    }
    map
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur, wrapped horizontally and renormalized where the
/// kernel leaves the raster vertically.
fn blur(map: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return map.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = (x as isize + i as isize - r).rem_euclid(w as isize) as usize;
                acc += kv * map[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y as isize + i as isize - r;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                acc += kv * tmp[yy as usize * w + x];
                norm += kv;
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}

fn stamp_corners(geom: &ImageGeometry, corners: &[[f64; 2]], sigma: f64) -> Vec<f64> {
    let (w, h) = (geom.width, geom.height);
    let mut map = vec![0.0; w * h];
    for &c in corners {
        {
            let nx = c[0].round();
            let ny = c[1].round().clamp(0.0, h as f64 - 1.0);
            let d0 = geom.wrapped_du(nx, c[0]).hypot(ny - c[1]);
            if sigma <= 0.0 {
                let xi = (nx as isize).rem_euclid(w as isize) as usize;
                map[ny as usize * w + xi] = 1.0;
                continue;
            }
            let reach = (4.0 * sigma).ceil() as isize + 1;
            for y in ny as isize - reach..=ny as isize + reach {
                if y < 0 || y >= h as isize {
                    continue;
                }
                for x in nx as isize - reach..=nx as isize + reach {
                    let xw = x.rem_euclid(w as isize) as usize;
                    let dx = geom.wrapped_du(xw as f64, c[0]);
                    let d2 = dx * dx + (y as f64 - c[1]).powi(2);
                    // peak scaled so the pixel nearest the label reads exactly 1
                    let val = (-(d2 - d0 * d0) / (2.0 * sigma * sigma)).exp().min(1.0);
                    let cell = &mut map[y as usize * w + xw];
                    if val > *cell {
                        *cell = val;
                    }
                }
            }
        }
    }
    map
}

fn render_walls(geom: &ImageGeometry, walls: &[CornerPair], closed: bool, params: &RenderParams) -> MapPair {
    let model = LayoutModel {
        geometry: *geom,
        walls: walls.to_vec(),
        closed,
    };
    let corners: Vec<[f64; 2]> = walls.iter().flat_map(|p| [p.ceil, p.floor]).collect();
    render_with_corners(geom, &model.corner_points(), &corners, closed, params)
}

/// Renders GT maps from 3D corner points in the camera frame, for layouts
/// seen by a perturbed camera where walls need not project vertically.
pub fn render_gt_maps_points(
    geom: &ImageGeometry,
    pts: &[([f64; 3], [f64; 3])],
    closed: bool,
    params: &RenderParams,
) -> Result<MapPair> {
    if pts.len() < 3 {
        return Err(Error::InvalidLayout(format!("{} corner pairs, need at least 3", pts.len())));
    }
    let corners: Vec<[f64; 2]> = pts.iter().flat_map(|(c, f)| [project(geom, *c), project(geom, *f)]).collect();
    Ok(render_with_corners(geom, pts, &corners, closed, params))
}

fn render_with_corners(
    geom: &ImageGeometry,
    pts: &[([f64; 3], [f64; 3])],
    corners: &[[f64; 2]],
    closed: bool,
    params: &RenderParams,
) -> MapPair {
    let (w, h) = (geom.width, geom.height);
    let samples = boundary_samples(geom, pts, closed);
    let lines = stamp_lines(geom, &samples, params.thickness);
    let mut edge = blur(&lines, w, h, params.sigma);
    let peak = edge.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        for v in &mut edge {
            *v = (*v / peak).clamp(0.0, 1.0);
        }
    }
    let corner = stamp_corners(geom, corners, params.sigma);
    MapPair {
        edge: ProbabilityMap {
            width: w,
            height: h,
            data: edge,
        },
        corner: ProbabilityMap {
            width: w,
            height: h,
            data: corner,
        },
    }
}

/// Renders the edge and corner maps of a labeled layout.
///
/// Closed layouts are rendered in a canonical frame (the cyclic relabeling
/// with an integer column shift that is lexicographically smallest) and
/// rolled back, so integer horizontal rotations of the labels give exactly
/// rolled maps.
pub fn render_gt_maps(layout: &LayoutModel, params: &RenderParams) -> Result<MapPair> {
    layout.validate()?;
    if !(params.thickness >= 0.0) || !(params.sigma >= 0.0) {
        return Err(Error::InvalidLayout("thickness and sigma must be non-negative".into()));
    }
    let geom = &layout.geometry;
    if !layout.closed {
        return Ok(render_walls(geom, &layout.walls, false, params));
    }
    let n = layout.walls.len();
    let (shift, rel) = (0..n)
        .map(|k| {
            let s = layout.walls[k].ceil[0].floor();
            (s, layout.shifted(k, s))
        })
        .min_by(|a, b| cmp_walls(&a.1, &b.1))
        .expect("at least three walls");
    let maps = render_walls(geom, &rel, true, params);
    let k = shift as isize;
    Ok(MapPair {
        edge: maps.edge.roll_columns(k),
        corner: maps.corner.roll_columns(k),
    })
}

/// Renders GT maps for a 3D layout seen from its camera.
pub fn render_gt_maps_3d(geom: &ImageGeometry, l3d: &Layout3D, params: &RenderParams) -> Result<MapPair> {
    let model = crate::layout3d::layout_to_model(geom, l3d)?;
    render_gt_maps(&model, params)
}

/// Appearance of synthetic room panoramas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomStyle {
    /// Amplitude of the sinusoidal surface texture (0 gives flat surfaces).
    pub texture_contrast: f64,
    /// Texture frequency in cycles per unit length.
    pub texture_frequency: f64,
}

impl Default for RoomStyle {
    fn default() -> Self {
        Self {
            texture_contrast: 0.1,
            texture_frequency: 1.5,
        }
    }
}

const WALL_COLORS: [[f64; 3]; 6] = [
    [0.80, 0.55, 0.45],
    [0.50, 0.70, 0.55],
    [0.45, 0.55, 0.80],
    [0.75, 0.72, 0.45],
    [0.65, 0.50, 0.75],
    [0.45, 0.72, 0.75],
];

fn surface_color(surface: Surface, point: [f64; 3], style: &RoomStyle) -> [f64; 3] {
    let base = match surface {
        Surface::Ceiling => [0.92, 0.92, 0.88],
        Surface::Floor => [0.30, 0.22, 0.16],
        Surface::Wall(k) => WALL_COLORS[k % WALL_COLORS.len()],
    };
    let f = style.texture_frequency * std::f64::consts::TAU;
    let tex = (f * point[0]).sin() * (f * point[1]).sin() * (f * point[2]).cos();
    base.map(|c| (c + style.texture_contrast * tex).clamp(0.0, 1.0))
}

/// Renders a `[3, H, W]` RGB panorama of a textured room from its camera.
/// Surfaces are painted in 3D, so the image is consistent under camera motion.
pub fn render_room_image(geom: &ImageGeometry, l3d: &Layout3D, style: &RoomStyle) -> Result<Tensor> {
    render_room_image_from(geom, l3d, 0.0, style)
}

/// Same as [`render_room_image`] with the camera raised by `dy`.
pub fn render_room_image_from(geom: &ImageGeometry, l3d: &Layout3D, dy: f64, style: &RoomStyle) -> Result<Tensor> {
    l3d.validate()?;
    if !l3d.contains_camera() {
        return Err(Error::CameraOutsidePolygon);
    }
    let (w, h) = (geom.width, geom.height);
    let mut data = vec![0.0; 3 * w * h];
    for y in 0..h {
        for x in 0..w {
            let d = geom.pixel_to_unit_vector(x as f64, y as f64).as_array();
            let hit = l3d.cast_ray(dy, d).ok_or(Error::CameraExitsRoom {
                offset: dy,
                floor: l3d.floor_y(),
                ceiling: l3d.ceiling_y(),
            })?;
            let world = [hit.point[0], hit.point[1], hit.point[2]];
            let rgb = surface_color(hit.surface, world, style);
            for c in 0..3 {
                data[(c * h + y) * w + x] = rgb[c];
            }
        }
    }
    Tensor::new(vec![3, h, w], data)
}

/// Parameters of the random room generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSampler {
    pub min_walls: usize,
    pub max_walls: usize,
    /// Range of horizontal vertex distances, in camera heights.
    pub radius: (f64, f64),
    /// Range of floor-to-ceiling heights, in camera heights.
    pub ceiling: (f64, f64),
    /// Smallest longitude gap between consecutive corners, radians.
    pub min_gap: f64,
    /// Largest gap; below pi so the camera stays inside the floor polygon.
    pub max_gap: f64,
}

impl Default for RoomSampler {
    fn default() -> Self {
        Self {
            min_walls: 4,
            max_walls: 8,
            radius: (1.5, 3.5),
            ceiling: (2.2, 3.2),
            min_gap: 0.35,
            max_gap: 2.4,
        }
    }
}

/// Random room, star-shaped around the camera so every wall is visible.
/// Wall angles are arbitrary (non-Manhattan).
pub fn random_room<R: Rng>(rng: &mut R, sampler: &RoomSampler) -> Result<Layout3D> {
    let n = rng.gen_range(sampler.min_walls..=sampler.max_walls);
    let tau = std::f64::consts::TAU;
    let (lo, hi) = (sampler.min_gap * n as f64, sampler.max_gap.min(std::f64::consts::PI) * n as f64);
    if n < 3 || lo >= tau || hi <= tau {
        return Err(Error::InvalidLayout(format!(
            "cannot place {n} walls with gaps in [{}, {}]",
            sampler.min_gap, sampler.max_gap
        )));
    }
    // spread the slack over n gaps, redrawing until no gap is too wide
    let slack = tau - lo;
    let cuts = loop {
        let mut cuts: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = cuts.iter().sum();
        for c in &mut cuts {
            *c = sampler.min_gap + slack * *c / total;
        }
        if cuts.iter().all(|&c| c < sampler.max_gap.min(std::f64::consts::PI)) {
            break cuts;
        }
    };
    let start = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mut phi = start;
    let mut floor = Vec::with_capacity(n);
    for gap in cuts {
        let r = rng.gen_range(sampler.radius.0..=sampler.radius.1);
        floor.push([r * phi.sin(), r * phi.cos()]);
        phi += gap;
    }
    let c = rng.gen_range(sampler.ceiling.0..=sampler.ceiling.1);
    Layout3D::new(floor, c, 1.0)
}

/// Random-erasing parameters: rectangle area as a fraction of the image and
/// height/width aspect, both drawn per rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraseParams {
    pub scale: (f64, f64),
    pub aspect: (f64, f64),
    pub count: usize,
    /// Per-channel fill; the per-channel image mean when `None`.
    pub fill: Option<Vec<f64>>,
}

impl Default for EraseParams {
    fn default() -> Self {
        Self {
            scale: (0.02, 0.2),
            aspect: (0.3, 3.3),
            count: 1,
            fill: None,
        }
    }
}

/// Erased rectangle `[x, y, width, height]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraseRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl EraseRect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }
}

fn sample_rect<R: Rng>(rng: &mut R, w: usize, h: usize, p: &EraseParams) -> EraseRect {
    let n = (w * h) as f64;
    let (lo, hi) = (p.scale.0 * n, p.scale.1 * n);
    let (la, lb) = (p.aspect.0.ln(), p.aspect.1.ln());
    for _ in 0..100 {
        let target = rng.gen_range(lo..=hi);
        let ratio = if la < lb { rng.gen_range(la..=lb).exp() } else { p.aspect.0 };
        let rh = (target * ratio).sqrt().round() as usize;
        let rw = (target / ratio).sqrt().round() as usize;
        let area = (rw * rh) as f64;
        if rw >= 1 && rh >= 1 && rw <= w && rh <= h && area >= lo && area <= hi {
            let x = rng.gen_range(0..=w - rw);
            let y = rng.gen_range(0..=h - rh);
            return EraseRect {
                x,
                y,
                width: rw,
                height: rh,
            };
        }
    }
    // tiny or extreme configurations: a square of the smallest allowed area
    let side = lo.sqrt().ceil().max(1.0) as usize;
    let (rw, rh) = (side.min(w), side.min(h));
    EraseRect {
        x: rng.gen_range(0..=w - rw),
        y: rng.gen_range(0..=h - rh),
        width: rw,
        height: rh,
    }
}

/// Replaces `count` random rectangles with the fill value. Labels are untouched.
pub fn random_erase(image: &Tensor, seed: u64, params: &EraseParams) -> Result<(Tensor, Vec<EraseRect>)> {
    let (c, h, w) = image.dims3()?;
    let valid = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1;
    if !valid(params.scale) || params.scale.1 > 1.0 || !valid(params.aspect) {
        return Err(Error::InvalidLayout(format!(
            "bad erase ranges: scale {:?}, aspect {:?}",
            params.scale, params.aspect
        )));
    }
    let fill = match &params.fill {
        Some(f) if f.len() == c => f.clone(),
        Some(f) => {
            return Err(Error::ShapeMismatch(format!("{} fill values for {c} channels", f.len())));
        }
        None => (0..c)
            .map(|ch| image.data()[ch * h * w..(ch + 1) * h * w].iter().sum::<f64>() / (h * w) as f64)
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    let mut rects = Vec::with_capacity(params.count);
    for _ in 0..params.count {
        let r = sample_rect(&mut rng, w, h, params);
        for (ch, &f) in fill.iter().enumerate() {
            for y in r.y..r.y + r.height {
                for x in r.x..r.x + r.width {
                    out.set3(ch, y, x, f);
                }
            }
        }
        rects.push(r);
    }
    Ok((out, rects))
}

/// Horizontal augmentation of a panorama together with its labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizontalAugment {
    /// Column reversal, `u -> W - 1 - u`.
    Mirror,
    /// Circular shift by whole columns, `u -> u + du (mod W)`.
    Rotate(isize),
}

pub fn augment_labels(layout: &LayoutModel, mode: HorizontalAugment) -> Result<LayoutModel> {
    let g = layout.geometry;
    let w = g.width as f64;
    let map_u: Box<dyn Fn(f64) -> f64> = match mode {
        HorizontalAugment::Mirror => Box::new(move |u| g.wrap_u(w - 1.0 - u)),
        HorizontalAugment::Rotate(du) => {
            let s = du.rem_euclid(g.width as isize) as f64;
            Box::new(move |u| {
                let r = u + s;
                if r >= w {
                    r - w
                } else {
                    r
                }
            })
        }
    };
    let mut walls: Vec<CornerPair> = layout
        .walls
        .iter()
        .map(|p| CornerPair {
            ceil: [map_u(p.ceil[0]), p.ceil[1]],
            floor: [map_u(p.floor[0]), p.floor[1]],
        })
        .collect();
    walls.sort_by(crate::layout3d::cmp_pairs);
    LayoutModel::new(g, walls, layout.closed)
}

pub fn augment_horizontal(image: &Tensor, layout: &LayoutModel, mode: HorizontalAugment) -> Result<(Tensor, LayoutModel)> {
    let (_, h, w) = image.dims3()?;
    if (w, h) != (layout.geometry.width, layout.geometry.height) {
        return Err(Error::ShapeMismatch(format!(
            "image is {w}x{h}, labels are {}x{}",
            layout.geometry.width, layout.geometry.height
        )));
    }
    let img = match mode {
        HorizontalAugment::Mirror => image.mirror_columns()?,
        HorizontalAugment::Rotate(du) => image.roll_columns(du)?,
    };
    Ok((img, augment_labels(layout, mode)?))
}
