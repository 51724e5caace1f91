//! Map metrics, layout segmentation, pixel error, corner error and 3D IoU.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout3d::{CornerSet, Layout3D, Surface};
use crate::maps::ProbabilityMap;
use crate::polygon;
use crate::sphere::ImageGeometry;

/// Binarization threshold used when none is given.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MapMetrics {
    pub iou: f64,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize, both_empty: bool) -> f64 {
    if den == 0 {
        if both_empty {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn metrics(&self) -> MapMetrics {
        let Confusion { tp, fp, fn_, tn } = *self;
        // nothing predicted and nothing to find
        let empty = tp + fp + fn_ == 0;
        let precision = ratio(tp, tp + fp, empty);
        let recall = ratio(tp, tp + fn_, empty);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MapMetrics {
            iou: ratio(tp, tp + fp + fn_, empty),
            acc: (tp + tn) as f64 / (tp + fp + fn_ + tn).max(1) as f64,
            precision,
            recall,
            f1,
        }
    }
}

/// Pixels strictly above `threshold` count as positive in both maps.
pub fn confusion(pred: &ProbabilityMap, gt: &ProbabilityMap, threshold: f64) -> Result<Confusion> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let mut c = Confusion::default();
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p > threshold, g > threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn map_metrics(pred: &ProbabilityMap, gt: &ProbabilityMap, threshold: f64) -> Result<MapMetrics> {
    Ok(confusion(pred, gt, threshold)?.metrics())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentationMode {
    /// Ceiling, floor, wall.
    Simple,
    /// Ceiling, floor and one label per wall.
    Complete,
}

pub const LABEL_CEILING: u16 = 0;
pub const LABEL_FLOOR: u16 = 1;
pub const LABEL_WALL: u16 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    pub width: usize,
    pub height: usize,
    pub mode: SegmentationMode,
    pub labels: Vec<u16>,
}

impl SegmentationMap {
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn wall_count(&self) -> usize {
        self.labels.iter().map(|&l| l as usize).max().map_or(0, |m| m.saturating_sub(1))
    }
}

/// Labels every pixel by the first layout surface its ray hits. Complete
/// mode numbers walls `2, 3, ...` by the column of their left corner.
pub fn render_segmentation(geom: &ImageGeometry, l3d: &Layout3D, mode: SegmentationMode) -> Result<SegmentationMap> {
    l3d.validate()?;
    let increasing = l3d.check_visibility()?;
    let n = l3d.floor.len();
    // wall k joins vertices k and k+1; its left corner is the one seen first
    let left_u: Vec<f64> = (0..n)
        .map(|k| {
            let v = if increasing { k } else { (k + 1) % n };
            let p = l3d.floor[v];
            geom.wrap_u((p[0].atan2(p[1]) / std::f64::consts::TAU + 0.5) * geom.width as f64)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| left_u[a].total_cmp(&left_u[b]));
    let mut rank = vec![0u16; n];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r as u16;
    }
    let (w, h) = (geom.width, geom.height);
    let mut labels = vec![0u16; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = geom.pixel_to_unit_vector(x as f64, y as f64).as_array();
            let hit = l3d.cast_ray(0.0, d).ok_or(Error::CameraOutsidePolygon)?;
            labels[y * w + x] = match hit.surface {
                Surface::Ceiling => LABEL_CEILING,
                Surface::Floor => LABEL_FLOOR,
                Surface::Wall(k) => match mode {
                    SegmentationMode::Simple => LABEL_WALL,
                    SegmentationMode::Complete => LABEL_WALL + rank[k],
                },
            };
        }
    }
    Ok(SegmentationMap {
        width: w,
        height: h,
        mode,
        labels,
    })
}

/// Fraction of disagreeing pixels. In complete mode predicted walls are first
/// matched one-to-one to ground-truth walls, greedily by pixel overlap;
/// unmatched walls count all their pixels as errors.
pub fn pixel_error(pred: &SegmentationMap, gt: &SegmentationMap) -> Result<f64> {
    if pred.mode != gt.mode {
        return Err(Error::ModeMismatch);
    }
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::ShapeMismatch(format!(
            "segmentations {}x{} vs {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let n = pred.labels.len();
    let wrong = match pred.mode {
        SegmentationMode::Simple => pred.labels.iter().zip(&gt.labels).filter(|(a, b)| a != b).count(),
        SegmentationMode::Complete => {
            let np = pred.labels.iter().copied().max().unwrap_or(0) as usize + 1;
            let ng = gt.labels.iter().copied().max().unwrap_or(0) as usize + 1;
            let mut overlap = vec![0usize; np * ng];
            for (&a, &b) in pred.labels.iter().zip(&gt.labels) {
                overlap[a as usize * ng + b as usize] += 1;
            }
            let mut map: Vec<Option<u16>> = vec![None; np];
            map[LABEL_CEILING as usize] = Some(LABEL_CEILING);
            if np > LABEL_FLOOR as usize {
                map[LABEL_FLOOR as usize] = Some(LABEL_FLOOR);
            }
            let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
            for a in LABEL_WALL as usize..np {
                for b in LABEL_WALL as usize..ng {
                    let o = overlap[a * ng + b];
                    if o > 0 {
                        pairs.push((o, a, b));
                    }
                }
            }
            pairs.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
            let mut used = vec![false; ng];
            for (_, a, b) in pairs {
                if map[a].is_none() && !used[b] {
                    map[a] = Some(b as u16);
                    used[b] = true;
                }
            }
            pred.labels
                .iter()
                .zip(&gt.labels)
                .filter(|(a, b)| map[**a as usize] != Some(**b))
                .count()
        }
    };
    Ok(wrong as f64 / n as f64)
}

/// Mean corner distance in pixels (horizontally wrapped) under the best
/// cyclic correspondence, divided by the image diagonal.
pub fn corner_error(pred: &CornerSet, gt: &CornerSet, geom: &ImageGeometry) -> Result<f64> {
    let n = gt.len();
    if pred.len() != n {
        return Err(Error::CornerCountMismatch { pred: pred.len(), gt: n });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let dist = |a: [f64; 2], b: [f64; 2]| geom.wrapped_du(a[0], b[0]).hypot(a[1] - b[1]);
    let best = (0..n)
        .map(|s| {
            (0..n)
                .map(|k| {
                    let p = &pred.pairs[(k + s) % n];
                    let g = &gt.pairs[k];
                    dist(p.ceil, g.ceil) + dist(p.floor, g.floor)
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best / (2 * n) as f64 / geom.diagonal())
}

/// Volume IoU of two vertical prisms (floor polygon times floor-to-ceiling
/// interval), both expressed in the same camera frame.
pub fn iou3d(a: &Layout3D, b: &Layout3D) -> Result<f64> {
    for l in [a, b] {
        if polygon::area(&l.floor) <= 0.0 || !(l.ceiling_height > 0.0) {
            return Err(Error::DegeneratePolygon("zero-volume layout".into()));
        }
    }
    let overlap_h = (a.ceiling_y().min(b.ceiling_y()) - a.floor_y().max(b.floor_y())).max(0.0);
    let inter = polygon::intersection_area(&a.floor, &b.floor) * overlap_h;
    let union = a.volume() + b.volume() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Voxel-count approximation of [`iou3d`] on an `n^3` grid over the joint
/// bounding box. Slow; meant as a test oracle.
pub fn iou3d_voxel(a: &Layout3D, b: &Layout3D, n: usize) -> f64 {
    let pts = a.floor.iter().chain(&b.floor);
    let (mut x0, mut x1, mut z0, mut z1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        z0 = z0.min(p[1]);
        z1 = z1.max(p[1]);
    }
    let y0 = a.floor_y().min(b.floor_y());
    let y1 = a.ceiling_y().max(b.ceiling_y());
    let cell = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let ys: Vec<f64> = (0..n).map(|k| cell(y0, y1, k)).collect();
    let count_in = |l: &Layout3D| ys.iter().filter(|&&y| y > l.floor_y() && y < l.ceiling_y()).count();
    let (ha, hb) = (count_in(a), count_in(b));
    let both = ys
        .iter()
        .filter(|&&y| y > a.floor_y() && y < a.ceiling_y() && y > b.floor_y() && y < b.ceiling_y())
        .count();
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..n {
        let x = cell(x0, x1, i);
        for j in 0..n {
            let z = cell(z0, z1, j);
            let ia = polygon::contains(&a.floor, [x, z]);
            let ib = polygon::contains(&b.floor, [x, z]);
            match (ia, ib) {
                (true, true) => {
                    inter += both;
                    union += ha + hb - both;
                }
                (true, false) => union += ha,
                (false, true) => union += hb,
                (false, false) => {}
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Layout metrics for one image, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutMetrics {
    pub iou3d: f64,
    pub corner_error: f64,
    pub pixel_error_ss: f64,
    pub pixel_error_cs: f64,
}

/// All layout metrics between a predicted and a ground-truth layout.
pub fn layout_metrics(geom: &ImageGeometry, pred: &Layout3D, gt: &Layout3D) -> Result<LayoutMetrics> {
    let pc = crate::layout3d::layout_to_model(geom, pred)?.corners();
    let gc = crate::layout3d::layout_to_model(geom, gt)?.corners();
    let ss = pixel_error(
        &render_segmentation(geom, pred, SegmentationMode::Simple)?,
        &render_segmentation(geom, gt, SegmentationMode::Simple)?,
    )?;
    let cs = pixel_error(
        &render_segmentation(geom, pred, SegmentationMode::Complete)?,
        &render_segmentation(geom, gt, SegmentationMode::Complete)?,
    )?;
    Ok(LayoutMetrics {
        iou3d: iou3d(pred, gt)?,
        corner_error: corner_error(&pc, &gc, geom)?,
        pixel_error_ss: ss,
        pixel_error_cs: cs,
    })
}

/// Combined metric report; absent groups are omitted from JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<MapMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corners: Option<MapMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutMetrics>,
}

/// Mean of the map metrics, component-wise.
pub fn mean_map_metrics(items: &[MapMetrics]) -> MapMetrics {
    let n = items.len().max(1) as f64;
    let s = items.iter().fold(MapMetrics::default(), |a, m| MapMetrics {
        iou: a.iou + m.iou,
        acc: a.acc + m.acc,
        precision: a.precision + m.precision,
        recall: a.recall + m.recall,
        f1: a.f1 + m.f1,
    });
    MapMetrics {
        iou: s.iou / n,
        acc: s.acc / n,
        precision: s.precision / n,
        recall: s.recall / n,
        f1: s.f1 / n,
    }
}

pub fn mean_layout_metrics(items: &[LayoutMetrics]) -> LayoutMetrics {
    let n = items.len().max(1) as f64;
    let s = items.iter().fold(LayoutMetrics::default(), |a, m| LayoutMetrics {
        iou3d: a.iou3d + m.iou3d,
        corner_error: a.corner_error + m.corner_error,
        pixel_error_ss: a.pixel_error_ss + m.pixel_error_ss,
        pixel_error_cs: a.pixel_error_cs + m.pixel_error_cs,
    });
    LayoutMetrics {
        iou3d: s.iou3d / n,
        corner_error: s.corner_error / n,
        pixel_error_ss: s.pixel_error_ss / n,
        pixel_error_cs: s.pixel_error_cs / n,
    }
}

/// Plain-text table of layout metrics in percent, one row per entry.
pub fn layout_table(rows: &[(String, LayoutMetrics)]) -> String {
    let name_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
    let mut s = String::new();
    let _ = writeln!(s, "{:<name_w$}  {:>8}  {:>8}  {:>8}  {:>8}", "", "3DIoU", "CE", "PE^SS", "PE^CS");
    for (name, m) in rows {
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}",
            name,
            100.0 * m.iou3d,
            100.0 * m.corner_error,
            100.0 * m.pixel_error_ss,
            100.0 * m.pixel_error_cs
        );
    }
    s
}

/// Plain-text table of edge and corner map metrics in percent.
pub fn map_table(rows: &[(String, MapMetrics, MapMetrics)]) -> String {
    let name_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<name_w$}  {:>7} {:>7} {:>7} {:>7} {:>7}  {:>7} {:>7} {:>7} {:>7} {:>7}",
        "", "E.IoU", "E.Acc", "E.P", "E.R", "E.F1", "C.IoU", "C.Acc", "C.P", "C.R", "C.F1"
    );
    for (name, e, c) in rows {
        let _ = writeln!(
            s,
            "{:<name_w$}  {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}  {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            name,
            100.0 * e.iou,
            100.0 * e.acc,
            100.0 * e.precision,
            100.0 * e.recall,
            100.0 * e.f1,
            100.0 * c.iou,
            100.0 * c.acc,
            100.0 * c.precision,
            100.0 * c.recall,
            100.0 * c.f1
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout3d::CornerPair;

    fn binary(w: usize, h: usize, on: &[(usize, usize)]) -> ProbabilityMap {
        let mut m = ProbabilityMap::zeros(w, h);
        for &(x, y) in on {
            m.set(x, y, 1.0);
        }
        m
    }

    #[test]
    fn shifted_block() {
        let gt = binary(6, 4, &[(1, 1), (2, 1)]);
        let pred = binary(6, 4, &[(2, 1), (3, 1)]);
        let m = map_metrics(&pred, &gt, 0.5).unwrap();
        assert!((m.iou - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_disjoint() {
        let gt = binary(5, 5, &[(1, 1), (3, 2)]);
        let m = map_metrics(&gt, &gt, 0.5).unwrap();
        assert_eq!((m.iou, m.acc, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0, 1.0));
        let other = binary(5, 5, &[(0, 0)]);
        let d = map_metrics(&other, &gt, 0.5).unwrap();
        assert_eq!((d.iou, d.precision, d.recall, d.f1), (0.0, 0.0, 0.0, 0.0));
        let empty = ProbabilityMap::zeros(5, 5);
        let e = map_metrics(&empty, &empty, 0.5).unwrap();
        assert_eq!((e.iou, e.precision, e.recall, e.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn corner_error_displacement() {
        let g = ImageGeometry::new(256, 128).unwrap();
        let gt = CornerSet {
            pairs: (0..4)
                .map(|k| CornerPair {
                    ceil: [20.0 + 60.0 * k as f64, 40.0],
                    floor: [20.0 + 60.0 * k as f64, 90.0],
                })
                .collect(),
        };
        let mut pred = gt.clone();
        for p in &mut pred.pairs {
            p.ceil = [p.ceil[0] + 3.0, p.ceil[1] + 4.0];
            p.floor = [p.floor[0] + 3.0, p.floor[1] + 4.0];
        }
        let ce = corner_error(&pred, &gt, &g).unwrap();
        assert!((ce - 5.0 / (256f64.powi(2) + 128f64.powi(2)).sqrt()).abs() < 1e-12);
        let mut cyc = gt.clone();
        cyc.pairs.rotate_left(1);
        assert_eq!(corner_error(&cyc, &gt, &g).unwrap(), 0.0);
    }

    #[test]
    fn shifted_unit_prisms() {
        let sq = |x: f64| vec![[x, 0.0], [x + 1.0, 0.0], [x + 1.0, 1.0], [x, 1.0]];
        let a = Layout3D {
            floor: sq(0.0),
            ceiling_height: 1.0,
            camera_height: 0.5,
        };
        let b = Layout3D {
            floor: sq(0.5),
            ..a.clone()
        };
        assert!((iou3d(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((iou3d(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segmentation_center_is_wall() {
        let g = ImageGeometry::new(64, 32).unwrap();
        let l = Layout3D::new(vec![[-2.0, -2.0], [-2.0, 2.0], [2.0, 2.0], [2.0, -2.0]], 3.0, 1.0).unwrap();
        let s = render_segmentation(&g, &l, SegmentationMode::Simple).unwrap();
        assert_eq!(s.get(32, 16), LABEL_WALL);
        assert_eq!(s.get(0, 0), LABEL_CEILING);
        assert_eq!(s.get(0, 31), LABEL_FLOOR);
        let c = render_segmentation(&g, &l, SegmentationMode::Complete).unwrap();
        assert_eq!(pixel_error(&c, &c).unwrap(), 0.0);
        assert_eq!(c.wall_count(), 4);
    }
}
