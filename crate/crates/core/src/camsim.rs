//! Camera rotation and vertical translation of panoramas and their labels,
//! plus the robustness harness that sweeps a perturbation range.
//!
//! Convention: a scene direction `d` seen by the original camera is seen at
//! `R d` by the perturbed one, with `R = R_y(yaw) R_x(pitch)`. A translation
//! `t` raises the camera by `t * h`, `h` being the floor-to-ceiling height;
//! negative values lower it. Translation is applied before rotation.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmetrics::{map_metrics, MapMetrics};
use crate::gt_synth::{render_gt_maps, render_gt_maps_points, CornerPoints, LayoutModel, RenderParams};
use crate::layout3d::{CornerPair, CornerSet, Layout3D};
use crate::maps::MapPair;
use crate::sphere::{snap_near_integer, ImageGeometry, Rotation, SphericalAngles, UnitVector};
use crate::tensor_conv::{BilinearTap, MicroNet, Tensor};

/// Source coordinates this close to an integer are snapped onto it, so
/// identity and whole-column warps copy pixels exactly.
const SNAP_TOL: f64 = 1e-6;

/// Latitude nudge keeping pole rows attached to their column's longitude.
const POLE_NUDGE: f64 = 1e-10;

/// Default bound on `|translation|`, in room heights.
pub const MAX_TRANSLATION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidPerturbation {
    /// Rotation about the x axis, radians.
    pub pitch: f64,
    /// Rotation about the vertical axis, radians.
    pub yaw: f64,
    /// Vertical camera displacement as a fraction of the room height.
    pub translation: f64,
}

impl RigidPerturbation {
    pub fn pitch(angle: f64) -> Self {
        Self {
            pitch: angle,
            ..Self::default()
        }
    }

    pub fn yaw(angle: f64) -> Self {
        Self {
            yaw: angle,
            ..Self::default()
        }
    }

    pub fn translation(t: f64) -> Self {
        Self {
            translation: t,
            ..Self::default()
        }
    }

    pub fn validate(&self, max_translation: f64) -> Result<()> {
        if !self.pitch.is_finite() || !self.yaw.is_finite() || !self.translation.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.translation.abs() > max_translation {
            return Err(Error::InvalidLayout(format!(
                "translation {} exceeds the configured bound {max_translation}",
                self.translation
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Rotation {
        Rotation::about_y(self.yaw).compose(&Rotation::about_x(self.pitch))
    }

    pub fn has_rotation(&self) -> bool {
        self.pitch != 0.0 || self.yaw != 0.0
    }

    pub fn is_pure_yaw(&self) -> bool {
        self.pitch == 0.0 && self.translation == 0.0
    }
}

/// Direction of a destination pixel, kept off the exact poles.
fn pixel_direction(geom: &ImageGeometry, x: usize, y: usize) -> [f64; 3] {
    let a = geom.pixel_to_angles(x as f64, y as f64);
    let limit = PI / 2.0 - POLE_NUDGE;
    SphericalAngles {
        phi: a.phi,
        theta: a.theta.clamp(-limit, limit),
    }
    .to_unit_vector()
    .as_array()
}

fn warp(img: &Tensor, mut source: impl FnMut(usize, usize) -> Result<(f64, f64)>) -> Result<Tensor> {
    let (c, h, w) = img.dims3()?;
    let mut taps = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = source(x, y)?;
            let u = snap_near_integer(u, SNAP_TOL);
            let v = snap_near_integer(v, SNAP_TOL);
            taps.push(BilinearTap::new(w, h, u, v, true));
        }
    }
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        let plane = &img.data()[ch * h * w..(ch + 1) * h * w];
        for (i, t) in taps.iter().enumerate() {
            out[ch * h * w + i] = t.apply(plane);
        }
    }
    Tensor::new(vec![c, h, w], out)
}

fn geometry_of(img: &Tensor) -> Result<ImageGeometry> {
    let (_, h, w) = img.dims3()?;
    ImageGeometry::new(w, h)
}

/// Inverse warp of a full panorama under a camera rotation.
pub fn rotate_panorama(img: &Tensor, rot: &Rotation) -> Result<Tensor> {
    let geom = geometry_of(img)?;
    if rot.is_identity() {
        return Ok(img.clone());
    }
    let inv = rot.inverse();
    let w = geom.width as f64;
    if rot.m[1][1] == 1.0 {
        // pure yaw: longitudes shift, latitudes stay
        let yaw = rot.m[0][2].atan2(rot.m[0][0]);
        let du = yaw / TAU * w;
        return warp(img, |x, y| Ok(((x as f64 - du).rem_euclid(w), y as f64)));
    }
    warp(img, |x, y| {
        let d = pixel_direction(&geom, x, y);
        let s = UnitVector::normalize_array(inv.apply_raw(d))?;
        let (u, v) = geom.unit_vector_to_pixel(s);
        Ok((u, v))
    })
}

/// Per-pixel distance (in camera heights) from the camera to the first layout
/// surface, as a `[1, H, W]` tensor.
pub fn depth_from_layout(geom: &ImageGeometry, l3d: &Layout3D) -> Result<Tensor> {
    l3d.validate()?;
    if !l3d.contains_camera() {
        return Err(Error::CameraOutsidePolygon);
    }
    let (w, h) = (geom.width, geom.height);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = geom.pixel_to_unit_vector(x as f64, y as f64).as_array();
            let hit = l3d.cast_ray(0.0, d).ok_or(Error::CameraOutsidePolygon)?;
            data.push(hit.distance);
        }
    }
    Tensor::new(vec![1, h, w], data)
}

/// Camera displacement for a translation fraction, checked against the room.
fn camera_offset(l3d: &Layout3D, t: f64) -> Result<f64> {
    let dy = t * l3d.ceiling_height;
    if !(dy > l3d.floor_y() && dy < l3d.ceiling_y()) {
        return Err(Error::CameraExitsRoom {
            offset: dy,
            floor: l3d.floor_y(),
            ceiling: l3d.ceiling_y(),
        });
    }
    Ok(dy)
}

/// Inverse warp through the layout surface for a vertical camera move of
/// `t` room heights. Occlusions created by the move are ignored.
pub fn translate_panorama(img: &Tensor, l3d: &Layout3D, t: f64) -> Result<Tensor> {
    let geom = geometry_of(img)?;
    l3d.validate()?;
    if !l3d.contains_camera() {
        return Err(Error::CameraOutsidePolygon);
    }
    let dy = camera_offset(l3d, t)?;
    if dy == 0.0 {
        return Ok(img.clone());
    }
    let h = geom.height as f64;
    warp(img, |x, y| {
        let d = pixel_direction(&geom, x, y);
        let hit = l3d.cast_ray(dy, d).ok_or(Error::CameraExitsRoom {
            offset: dy,
            floor: l3d.floor_y(),
            ceiling: l3d.ceiling_y(),
        })?;
        let p = hit.point;
        // a vertical move keeps longitudes, so the column is unchanged
        let theta = p[1].atan2(p[0].hypot(p[2]));
        Ok((x as f64, (-theta / PI + 0.5) * h))
    })
}

/// Corner points of a labeled layout in the camera frame, together with the
/// room height they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPoints {
    pub points: CornerPoints,
    pub room_height: f64,
    pub closed: bool,
}

impl LabelPoints {
    pub fn from_model(model: &LayoutModel) -> Result<Self> {
        let l3d = crate::layout3d::reconstruct_3d(&model.geometry, &model.corners())?;
        Ok(Self {
            points: model.corner_points(),
            room_height: l3d.ceiling_height,
            closed: model.closed,
        })
    }

    pub fn from_layout(l3d: &Layout3D) -> Self {
        let (c, f) = (l3d.ceiling_y(), l3d.floor_y());
        Self {
            points: l3d.floor.iter().map(|p| ([p[0], c, p[1]], [p[0], f, p[1]])).collect(),
            room_height: l3d.ceiling_height,
            closed: true,
        }
    }

    fn map_points(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        Self {
            points: self.points.iter().map(|&(c, fl)| (f(c), f(fl))).collect(),
            ..self.clone()
        }
    }

    /// Points as seen by the perturbed camera.
    pub fn transformed(&self, p: &RigidPerturbation) -> Self {
        let dy = p.translation * self.room_height;
        let r = p.rotation();
        self.map_points(|q| r.apply_raw([q[0], q[1] - dy, q[2]]))
    }

    /// Undoes [`LabelPoints::transformed`] for the same perturbation.
    pub fn untransformed(&self, p: &RigidPerturbation) -> Self {
        let dy = p.translation * self.room_height;
        let r = p.rotation().inverse();
        self.map_points(|q| {
            let s = r.apply_raw(q);
            [s[0], s[1] + dy, s[2]]
        })
    }

    /// Projects the points to pixels, ordered by ceiling column.
    pub fn corners(&self, geom: &ImageGeometry) -> Result<CornerSet> {
        let px = |index: usize, q: [f64; 3]| -> Result<[f64; 2]> {
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            if (q[1] / n).abs() > 1.0 - 1e-12 {
                return Err(Error::PoleSingularity { index });
            }
            let s = UnitVector::normalize_array(q)?;
            let (u, v) = geom.unit_vector_to_pixel(s);
            Ok([geom.wrap_u(u), v])
        };
        let mut pairs = self
            .points
            .iter()
            .enumerate()
            .map(|(k, &(c, f))| {
                Ok(CornerPair {
                    ceil: px(k, c)?,
                    floor: px(k, f)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        pairs.sort_by(crate::layout3d::cmp_pairs);
        Ok(CornerSet { pairs })
    }
}

/// Exact label transform for a perturbation. Pure yaw is applied as a column
/// shift in pixel space (whole-column shifts stay exact); anything else goes
/// through the 3D corner points.
pub fn transform_labels(model: &LayoutModel, p: &RigidPerturbation) -> Result<CornerSet> {
    let geom = model.geometry;
    if p.is_pure_yaw() {
        let w = geom.width as f64;
        let du = snap_near_integer(p.yaw / TAU * w, 1e-9);
        let shift = |u: f64| {
            let r = (u + du).rem_euclid(w);
            if r >= w {
                0.0
            } else {
                r
            }
        };
        let mut pairs: Vec<CornerPair> = model
            .walls
            .iter()
            .map(|q| CornerPair {
                ceil: [shift(q.ceil[0]), q.ceil[1]],
                floor: [shift(q.floor[0]), q.floor[1]],
            })
            .collect();
        pairs.sort_by(crate::layout3d::cmp_pairs);
        return Ok(CornerSet { pairs });
    }
    LabelPoints::from_model(model)?.transformed(p).corners(&geom)
}

/// Re-expresses a 3D layout in the frame of a vertically moved camera.
pub fn translate_layout(l3d: &Layout3D, t: f64) -> Result<Layout3D> {
    let dy = camera_offset(l3d, t)?;
    Layout3D::new(l3d.floor.clone(), l3d.ceiling_height, l3d.camera_height + dy)
}

/// A labeled test panorama for the robustness harness.
#[derive(Debug, Clone)]
pub struct RobustnessCase {
    pub image: Tensor,
    pub labels: LayoutModel,
    /// Layout used for translation warps; must match the labels.
    pub layout: Layout3D,
}

/// Anything that maps an image to edge and corner probability maps.
pub trait MapPredictor {
    fn predict_maps(&self, image: &Tensor) -> Result<MapPair>;
}

impl MapPredictor for MicroNet {
    fn predict_maps(&self, image: &Tensor) -> Result<MapPair> {
        self.predict(image)
    }
}

/// Perturbed image and its ground-truth maps at the image resolution.
pub fn perturb_case(case: &RobustnessCase, p: &RigidPerturbation, params: &RenderParams) -> Result<(Tensor, MapPair)> {
    let geom = case.labels.geometry;
    if p.is_pure_yaw() {
        let img = rotate_panorama(&case.image, &p.rotation())?;
        let labels = LayoutModel::new(geom, transform_labels(&case.labels, p)?.pairs, case.labels.closed)?;
        return Ok((img, render_gt_maps(&labels, params)?));
    }
    let mut img = case.image.clone();
    if p.translation != 0.0 {
        img = translate_panorama(&img, &case.layout, p.translation)?;
    }
    if p.has_rotation() {
        img = rotate_panorama(&img, &p.rotation())?;
    }
    let pts = LabelPoints::from_layout(&case.layout).transformed(p);
    let maps = render_gt_maps_points(&geom, &pts.points, pts.closed, params)?;
    Ok((img, maps))
}

/// Which parameter a sweep varies. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepKind {
    Pitch { min: f64, max: f64 },
    Yaw { min: f64, max: f64 },
    Translation { min: f64, max: f64 },
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Pitch { .. } => "Rotation",
            SweepKind::Yaw { .. } => "Yaw",
            SweepKind::Translation { .. } => "Translation",
        }
    }

    /// `steps` values spaced uniformly from min to max inclusive.
    pub fn samples(&self, steps: usize) -> Vec<RigidPerturbation> {
        let (lo, hi) = match *self {
            SweepKind::Pitch { min, max } | SweepKind::Yaw { min, max } | SweepKind::Translation { min, max } => {
                (min, max)
            }
        };
        (0..steps)
            .map(|i| {
                let a = if steps == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (steps - 1) as f64
                };
                match self {
                    SweepKind::Pitch { .. } => RigidPerturbation::pitch(a),
                    SweepKind::Yaw { .. } => RigidPerturbation::yaw(a),
                    SweepKind::Translation { .. } => RigidPerturbation::translation(a),
                }
            })
            .collect()
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub f1: MeanStd,
    pub acc: MeanStd,
    pub iou: MeanStd,
}

impl MetricSummary {
    pub fn of(items: &[MapMetrics]) -> Self {
        let pick = |f: fn(&MapMetrics) -> f64| MeanStd::of(&items.iter().map(f).collect::<Vec<_>>());
        Self {
            f1: pick(|m| m.f1),
            acc: pick(|m| m.acc),
            iou: pick(|m| m.iou),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub case: usize,
    pub perturbation: RigidPerturbation,
    pub edges: MapMetrics,
    pub corners: MapMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub records: Vec<SweepRecord>,
    pub edges: MetricSummary,
    pub corners: MetricSummary,
}

/// Evaluates `predictor` on every case under `steps` uniform samples of the
/// sweep range and summarizes edge and corner metrics.
pub fn run_sweep(
    predictor: &impl MapPredictor,
    cases: &[RobustnessCase],
    kind: SweepKind,
    steps: usize,
    params: &RenderParams,
    threshold: f64,
) -> Result<SweepReport> {
    let mut records = Vec::new();
    for p in kind.samples(steps) {
        for (i, case) in cases.iter().enumerate() {
            let (img, gt) = perturb_case(case, &p, params)?;
            let pred = predictor.predict_maps(&img)?;
            records.push(SweepRecord {
                case: i,
                perturbation: p,
                edges: map_metrics(&pred.edge, &gt.edge, threshold)?,
                corners: map_metrics(&pred.corner, &gt.corner, threshold)?,
            });
        }
    }
    let edges: Vec<MapMetrics> = records.iter().map(|r| r.edges).collect();
    let corners: Vec<MapMetrics> = records.iter().map(|r| r.corners).collect();
    Ok(SweepReport {
        kind,
        edges: MetricSummary::of(&edges),
        corners: MetricSummary::of(&corners),
        records,
    })
}

fn range_label(kind: &SweepKind) -> String {
    match *kind {
        SweepKind::Pitch { min, max } => format!("Rotation ({:+.0}deg:{:+.0}deg)", min.to_degrees(), max.to_degrees()),
        SweepKind::Yaw { min, max } => format!("Yaw ({:+.0}deg:{:+.0}deg)", min.to_degrees(), max.to_degrees()),
        SweepKind::Translation { min, max } => format!("Translation ({min:+.1}h:{max:+.1}h)"),
    }
}

/// Robustness table: one row per (sweep, model), edge and corner F1 / Acc /
/// IoU as `mean +- std` percentages.
pub fn robustness_table(rows: &[(String, SweepReport)]) -> String {
    use std::fmt::Write as _;
    let cell = |m: MeanStd| format!("{:6.2} ± {:5.2}", 100.0 * m.mean, 100.0 * m.std);
    let label_w = rows
        .iter()
        .map(|(_, r)| range_label(&r.kind).chars().count())
        .max()
        .unwrap_or(0)
        .max(10);
    let model_w = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(5);
    let mut s = String::new();
    let col = 15;
    let _ = writeln!(
        s,
        "{:<label_w$}  {:<model_w$}  {:^w3$}  {:^w3$}",
        "",
        "",
        "Edges",
        "Corners",
        w3 = 3 * col + 4
    );
    let _ = writeln!(
        s,
        "{:<label_w$}  {:<model_w$}  {:^col$}  {:^col$}  {:^col$}  {:^col$}  {:^col$}  {:^col$}",
        "", "", "F1 %", "Acc %", "IoU %", "F1 %", "Acc %", "IoU %"
    );
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "{:<label_w$}  {:<model_w$}  {}  {}  {}  {}  {}  {}",
            range_label(&r.kind),
            name,
            cell(r.edges.f1),
            cell(r.edges.acc),
            cell(r.edges.iou),
            cell(r.corners.f1),
            cell(r.corners.acc),
            cell(r.corners.iou)
        );
    }
    s
}
