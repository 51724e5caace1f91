use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use panolayout::camsim::{rotate_panorama, translate_panorama, LabelPoints, RigidPerturbation};
use panolayout::evalmetrics::{
    layout_metrics, layout_table, map_metrics, map_table, mean_layout_metrics, mean_map_metrics, LayoutMetrics,
    MapMetrics,
};
use panolayout::gt_synth::{
    augment_horizontal, random_erase, random_room, render_gt_maps, render_gt_maps_3d, render_gt_maps_points,
    render_room_image,
    EraseParams, HorizontalAugment, LayoutModel, RenderParams, RoomSampler, RoomStyle,
};
use panolayout::io::{self, read_json, write_json, write_map_png, write_rgb_png, write_tensor, write_tensor_file};
use panolayout::kernel_offsets::{KernelSpec, OffsetField};
use panolayout::layout3d::{extract_corners, layout_to_model, reconstruct_3d, Layout3D, PeakParams};
use panolayout::tensor_conv::{train_micro as train, ConvMode, MicroNet, NetConfig, Tensor, TargetMode, TrainConfig, TrainSample};
use panolayout::{ImageGeometry, MapPair, ProbabilityMap};

use crate::manifest::{Manifest, PerturbationTag, Prediction, Record};
use crate::{
    Axis, AugmentArgs, EvalLayoutArgs, EvalMapsArgs, ExtractArgs, GenGtArgs, Invalid, OffsetsArgs, Outcome,
    PeakArgs, ReconstructArgs, Sampling, SimRotateArgs, SimTranslateArgs, SweepArgs, SynthArgs, Target, TrainArgs,
};

fn create_dir(dir: &Path) -> Result<(), Invalid> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn read_labels(path: &Path) -> anyhow::Result<LayoutModel> {
    read_json(path).with_context(|| format!("reading labels {}", path.display()))
}

/// Loads a probability map from an 8-bit PNG or a tensor file with extents
/// `[H, W]` or `[1, H, W]`.
pub fn read_map(path: &Path) -> anyhow::Result<ProbabilityMap> {
    let is_png = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("png"))
        .unwrap_or(false);
    if is_png {
        return io::read_map_png(path).with_context(|| format!("reading {}", path.display()));
    }
    let t = io::read_tensor_file(path).with_context(|| format!("reading {}", path.display()))?;
    let (h, w) = match t.shape[..] {
        [h, w] | [1, h, w] => (h, w),
        _ => bail!("{}: expected a [H, W] map, got {:?}", path.display(), t.shape),
    };
    Ok(ProbabilityMap::new(w, h, t.data)?)
}

fn write_maps(dir: &Path, stem: &str, maps: &MapPair, dtype: io::DType) -> anyhow::Result<(PathBuf, PathBuf)> {
    let edge = dir.join(format!("{stem}edge.png"));
    let corner = dir.join(format!("{stem}corner.png"));
    write_map_png(&edge, &maps.edge)?;
    write_map_png(&corner, &maps.corner)?;
    write_tensor(&dir.join(format!("{stem}edge.cflt")), &maps.edge.to_tensor(), dtype)?;
    write_tensor(&dir.join(format!("{stem}corner.cflt")), &maps.corner.to_tensor(), dtype)?;
    Ok((edge, corner))
}

/// Runs `f` over records in parallel, logs failures and returns the
/// successes in record order with the failure count.
fn run_batch<T: Send>(
    records: &[Record],
    f: impl Fn(&Record) -> anyhow::Result<T> + Sync,
) -> (Vec<(String, T)>, usize) {
    let results: Vec<_> = records.par_iter().map(|r| (r.id.clone(), f(r))).collect();
    let mut ok = Vec::new();
    let mut failed = 0;
    for (id, r) in results {
        match r {
            Ok(v) => ok.push((id, v)),
            Err(e) => {
                log::error!("record {id}: {e:#}");
                failed += 1;
            }
        }
    }
    ok.sort_by(|a, b| a.0.cmp(&b.0));
    (ok, failed)
}

pub fn offsets(a: &OffsetsArgs) -> Outcome {
    let geom = ImageGeometry::with_any_aspect(a.width, a.height)?;
    let spec = match a.alpha {
        Some(deg) => KernelSpec::new(a.resolution, deg.to_radians())?,
        None => KernelSpec::matching_standard(a.resolution, &geom)?,
    };
    let field = OffsetField::new(geom, spec);
    let shape = field.shape();
    write_tensor_file(&a.output, &shape, &field.to_flat(), a.dtype.into())?;
    if let Some(png) = &a.png {
        let mut img = Tensor::zeros(&[3, geom.height, geom.width]);
        for &v in &a.rows {
            if v >= geom.height {
                return Err(anyhow!("row {v} is outside the {}-row image", geom.height).into());
            }
            img.set3(1, v, geom.width / 2, 1.0);
            for [u, y] in field.positions_at(geom.width as f64 / 2.0, v) {
                let x = (u.round() as usize) % geom.width;
                let y = (y.round().max(0.0) as usize).min(geom.height - 1);
                for c in 0..3 {
                    img.set3(c, y, x, 1.0);
                }
            }
        }
        write_rgb_png(png, &img)?;
    }
    println!(
        "offsets: {} rows x {} samples, alpha {:.4} deg",
        shape[0],
        shape[1],
        spec.fov.to_degrees()
    );
    Ok(0)
}

pub fn synth(a: &SynthArgs) -> Outcome {
    let geom = ImageGeometry::with_any_aspect(a.size.width, a.size.height)?;
    let sampler = RoomSampler {
        min_walls: a.min_walls,
        max_walls: a.max_walls,
        ..RoomSampler::default()
    };
    if a.min_walls < 3 || a.min_walls > a.max_walls {
        return Err(anyhow!("need 3 <= min-walls <= max-walls").into());
    }
    create_dir(&a.out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let rooms = (0..a.count)
        .map(|_| random_room(&mut rng, &sampler))
        .collect::<Result<Vec<_>, _>>()?;
    let (done, failed) = run_batch(
        &(0..a.count).map(|i| Record::new(format!("room_{i:03}"))).collect::<Vec<_>>(),
        |rec| {
            let i: usize = rec.id[5..].parse()?;
            let room = &rooms[i];
            let labels = layout_to_model(&geom, room)?;
            let img = render_room_image(&geom, room, &RoomStyle::default())?;
            let mut out = rec.clone();
            let p = |ext: &str| a.out_dir.join(format!("{}{ext}", rec.id));
            write_rgb_png(&p(".png"), &img)?;
            write_json(&p(".json"), &labels)?;
            write_json(&p(".layout.json"), room)?;
            out.panorama = Some(p(".png"));
            out.labels = Some(p(".json"));
            out.layout = Some(p(".layout.json"));
            Ok(out)
        },
    );
    let m = Manifest::new(&geom, done.into_iter().map(|(_, r)| r).collect());
    m.save(&a.out_dir.join("manifest.json"))?;
    println!("synth: {} rooms written to {}", m.records.len(), a.out_dir.display());
    Ok(failed)
}

pub fn gen_gt(a: &GenGtArgs) -> Outcome {
    create_dir(&a.out_dir)?;
    let params = a.gt.params();
    let dtype = a.dtype.into();
    if let Some(path) = &a.labels {
        let labels = read_labels(path)?;
        let maps = render_gt_maps(&labels, &params)?;
        write_maps(&a.out_dir, "", &maps, dtype)?;
        println!(
            "gen-gt: edge positives {:.2}%, corner positives {:.2}%",
            100.0 * maps.edge.positive_fraction(0.5),
            100.0 * maps.corner.positive_fraction(0.5)
        );
        return Ok(0);
    }
    let path = a.manifest.as_ref().expect("clap enforces labels or manifest");
    let m = Manifest::load(path)?;
    let (done, failed) = run_batch(&m.records, |rec| {
        let labels = read_labels(rec.labels.as_ref().ok_or_else(|| anyhow!("no labels"))?)?;
        let maps = render_gt_maps(&labels, &params)?;
        let (edge, corner) = write_maps(&a.out_dir, &format!("{}.", rec.id), &maps, dtype)?;
        let mut out = rec.clone();
        out.edge = Some(edge);
        out.corner = Some(corner);
        Ok(out)
    });
    let out = Manifest::new(&m.geometry()?, done.into_iter().map(|(_, r)| r).collect());
    out.save(&a.out_dir.join("manifest.json"))?;
    println!("gen-gt: {} records, {failed} failed", m.records.len());
    Ok(failed)
}

pub fn augment(a: &AugmentArgs) -> Outcome {
    if a.erase > 0 && a.seed.is_none() {
        return Err(anyhow!("--erase needs an explicit --seed").into());
    }
    let mut labels = read_labels(&a.labels)?;
    let g = labels.geometry;
    let mut img = io::read_rgb_png(&a.image, Some((g.width, g.height)))?;
    if a.mirror {
        (img, labels) = augment_horizontal(&img, &labels, HorizontalAugment::Mirror)?;
    }
    if a.shift != 0 {
        (img, labels) = augment_horizontal(&img, &labels, HorizontalAugment::Rotate(a.shift))?;
    }
    let mut rects = Vec::new();
    if a.erase > 0 {
        let params = EraseParams {
            count: a.erase,
            ..EraseParams::default()
        };
        (img, rects) = random_erase(&img, a.seed.unwrap_or(0), &params)?;
    }
    create_dir(&a.out_dir)?;
    write_rgb_png(&a.out_dir.join("image.png"), &img)?;
    write_json(&a.out_dir.join("labels.json"), &labels)?;
    write_json(&a.out_dir.join("erased.json"), &rects)?;
    println!("augment: {} walls, {} erased rectangles", labels.walls.len(), rects.len());
    Ok(0)
}

fn peak_params(p: &PeakArgs) -> PeakParams {
    PeakParams {
        min_peak: p.min_peak,
        nms_radius: p.nms_radius,
        subpixel: !p.no_subpixel,
    }
}

fn extract_one(map_path: &Path, params: &PeakParams) -> anyhow::Result<LayoutModel> {
    let map = read_map(map_path)?;
    let geom = ImageGeometry::with_any_aspect(map.width, map.height)?;
    let ex = extract_corners(&map, params)?;
    Ok(LayoutModel::new(geom, ex.corners.pairs, true)?)
}

pub fn extract_layout(a: &ExtractArgs) -> Outcome {
    let params = peak_params(&a.peaks);
    if let Some(map) = &a.map {
        if !map.exists() {
            return Err(anyhow!("missing file {}", map.display()).into());
        }
        let out = a.output.as_ref().expect("clap enforces output");
        return match extract_one(map, &params) {
            Ok(labels) => {
                write_json(out, &labels)?;
                println!("extract-layout: {} corner pairs", labels.walls.len());
                Ok(0)
            }
            Err(e) => {
                log::error!("{}: {e:#}", map.display());
                Ok(1)
            }
        };
    }
    let m = Manifest::load(a.manifest.as_ref().expect("clap enforces map or manifest"))?;
    let dir = a.out_dir.as_ref().expect("clap enforces out-dir");
    create_dir(dir)?;
    let (done, failed) = run_batch(&m.records, |rec| {
        let map = rec
            .prediction
            .as_ref()
            .and_then(|p| p.corner.as_ref())
            .ok_or_else(|| anyhow!("no predicted corner map"))?;
        let labels = extract_one(map, &params)?;
        let path = dir.join(format!("{}.json", rec.id));
        write_json(&path, &labels)?;
        let mut out = rec.clone();
        out.prediction.get_or_insert_with(Prediction::default).labels = Some(path);
        Ok(out)
    });
    Manifest::new(&m.geometry()?, done.into_iter().map(|(_, r)| r).collect()).save(&dir.join("manifest.json"))?;
    println!("extract-layout: {} records, {failed} failed", m.records.len());
    Ok(failed)
}

fn reconstruct_one(path: &Path) -> anyhow::Result<Layout3D> {
    let labels = read_labels(path)?;
    Ok(reconstruct_3d(&labels.geometry, &labels.corners())?)
}

pub fn reconstruct(a: &ReconstructArgs) -> Outcome {
    if let Some(path) = &a.labels {
        let labels = read_labels(path)?;
        let out = a.output.as_ref().expect("clap enforces output");
        return match reconstruct_3d(&labels.geometry, &labels.corners()) {
            Ok(l3d) => {
                write_json(out, &l3d)?;
                println!(
                    "reconstruct: {} walls, ceiling height {:.4}, floor area {:.4}",
                    l3d.floor.len(),
                    l3d.ceiling_height,
                    l3d.floor_area()
                );
                Ok(0)
            }
            Err(e) => {
                log::error!("{}: {e}", path.display());
                Ok(1)
            }
        };
    }
    let m = Manifest::load(a.manifest.as_ref().expect("clap enforces labels or manifest"))?;
    let dir = a.out_dir.as_ref().expect("clap enforces out-dir");
    create_dir(dir)?;
    let (done, failed) = run_batch(&m.records, |rec| {
        let labels = rec
            .prediction
            .as_ref()
            .and_then(|p| p.labels.as_ref())
            .ok_or_else(|| anyhow!("no predicted labels"))?;
        let l3d = reconstruct_one(labels)?;
        write_json(&dir.join(format!("{}.layout.json", rec.id)), &l3d)?;
        Ok(())
    });
    println!("reconstruct: {} layouts, {failed} failed", done.len());
    Ok(failed)
}

#[derive(Serialize)]
struct MapRecord {
    id: String,
    edges: MapMetrics,
    corners: MapMetrics,
}

#[derive(Serialize)]
struct MapSummary {
    records: Vec<MapRecord>,
    failed: usize,
    mean: Option<MapRecord>,
}

fn eval_maps_one(
    pred_edge: &Path,
    pred_corner: &Path,
    gt: &MapPair,
    threshold: f64,
) -> anyhow::Result<(MapMetrics, MapMetrics)> {
    let pe = read_map(pred_edge)?;
    let pc = read_map(pred_corner)?;
    Ok((
        map_metrics(&pe, &gt.edge, threshold)?,
        map_metrics(&pc, &gt.corner, threshold)?,
    ))
}

pub fn eval_maps(a: &EvalMapsArgs) -> Outcome {
    let params = a.gt_params.params();
    let (results, failed) = match &a.manifest {
        None => {
            let (pe, pc, gt) = (
                a.pred_edge.as_ref().expect("clap"),
                a.pred_corner.as_ref().expect("clap"),
                a.gt.as_ref().expect("clap"),
            );
            let gt = render_gt_maps(&read_labels(gt)?, &params)?;
            let r = eval_maps_one(pe, pc, &gt, a.threshold)?;
            (vec![("image".to_string(), r)], 0)
        }
        Some(path) => {
            let m = Manifest::load(path)?;
            run_batch(&m.records, |rec| {
                let pred = rec.prediction.as_ref().ok_or_else(|| anyhow!("no prediction"))?;
                let (pe, pc) = match (&pred.edge, &pred.corner) {
                    (Some(e), Some(c)) => (e, c),
                    _ => bail!("prediction needs edge and corner maps"),
                };
                let gt = match (&rec.edge, &rec.corner, &rec.labels) {
                    (Some(e), Some(c), _) => MapPair {
                        edge: read_map(e)?,
                        corner: read_map(c)?,
                    },
                    (_, _, Some(l)) => render_gt_maps(&read_labels(l)?, &params)?,
                    _ => bail!("no ground truth"),
                };
                eval_maps_one(pe, pc, &gt, a.threshold)
            })
        }
    };
    let mut rows: Vec<(String, MapMetrics, MapMetrics)> =
        results.iter().map(|(id, (e, c))| (id.clone(), *e, *c)).collect();
    let mean = if results.is_empty() {
        None
    } else {
        let e: Vec<_> = results.iter().map(|r| r.1 .0).collect();
        let c: Vec<_> = results.iter().map(|r| r.1 .1).collect();
        Some(MapRecord {
            id: "mean".into(),
            edges: mean_map_metrics(&e),
            corners: mean_map_metrics(&c),
        })
    };
    if let Some(m) = &mean {
        if rows.len() > 1 {
            rows.push((m.id.clone(), m.edges, m.corners));
        }
    }
    print!("{}", map_table(&rows));
    if let Some(json) = &a.json {
        let summary = MapSummary {
            records: results
                .into_iter()
                .map(|(id, (edges, corners))| MapRecord { id, edges, corners })
                .collect(),
            failed,
            mean,
        };
        write_json(json, &summary)?;
    }
    Ok(failed)
}

/// Layout JSON of either kind, as a 3D layout.
fn load_layout(path: &Path) -> anyhow::Result<(Layout3D, Option<ImageGeometry>)> {
    let v: serde_json::Value = read_json(path).with_context(|| format!("reading {}", path.display()))?;
    if v.get("walls").is_some() {
        let labels: LayoutModel = serde_json::from_value(v).with_context(|| format!("parsing {}", path.display()))?;
        let l3d = reconstruct_3d(&labels.geometry, &labels.corners())?;
        return Ok((l3d, Some(labels.geometry)));
    }
    let l3d: Layout3D = serde_json::from_value(v).with_context(|| format!("parsing {}", path.display()))?;
    l3d.validate()?;
    Ok((l3d, None))
}

fn eval_layout_one(pred: &Path, gt: &Path, fallback: &ImageGeometry) -> anyhow::Result<LayoutMetrics> {
    let (p, gp) = load_layout(pred)?;
    let (g, gg) = load_layout(gt)?;
    let geom = match (gp, gg) {
        (Some(a), Some(b)) if a != b => bail!("prediction and ground truth have different image sizes"),
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => *fallback,
    };
    Ok(layout_metrics(&geom, &p, &g)?)
}

#[derive(Serialize)]
struct LayoutRecord {
    id: String,
    #[serde(flatten)]
    metrics: LayoutMetrics,
}

#[derive(Serialize)]
struct LayoutSummary {
    records: Vec<LayoutRecord>,
    failed: usize,
    mean: Option<LayoutMetrics>,
}

pub fn eval_layout(a: &EvalLayoutArgs) -> Outcome {
    let fallback = ImageGeometry::with_any_aspect(a.size.width, a.size.height)?;
    let (results, failed) = match &a.manifest {
        None => {
            let (pred, gt) = (a.pred.as_ref().expect("clap"), a.gt.as_ref().expect("clap"));
            for p in [pred, gt] {
                if !p.exists() {
                    return Err(anyhow!("missing file {}", p.display()).into());
                }
            }
            match eval_layout_one(pred, gt, &fallback) {
                Ok(m) => (vec![("layout".to_string(), m)], 0),
                Err(e) => {
                    log::error!("{e:#}");
                    (Vec::new(), 1)
                }
            }
        }
        Some(path) => {
            let m = Manifest::load(path)?;
            let geom = m.geometry()?;
            run_batch(&m.records, |rec| {
                let pred = rec
                    .prediction
                    .as_ref()
                    .and_then(|p| p.labels.as_ref())
                    .ok_or_else(|| anyhow!("no predicted labels"))?;
                let gt = rec
                    .layout
                    .as_ref()
                    .or(rec.labels.as_ref())
                    .ok_or_else(|| anyhow!("no ground truth"))?;
                eval_layout_one(pred, gt, &geom)
            })
        }
    };
    let mean = (!results.is_empty()).then(|| mean_layout_metrics(&results.iter().map(|r| r.1).collect::<Vec<_>>()));
    let mut rows = results.clone();
    if let (Some(m), true) = (mean, rows.len() > 1) {
        rows.push(("mean".into(), m));
    }
    print!("{}", layout_table(&rows));
    if let Some(json) = &a.json {
        let summary = LayoutSummary {
            records: results
                .into_iter()
                .map(|(id, metrics)| LayoutRecord { id, metrics })
                .collect(),
            failed,
            mean,
        };
        write_json(json, &summary)?;
    }
    Ok(failed)
}

fn sweep_values(s: &SweepArgs) -> Result<Vec<f64>, Invalid> {
    if s.steps == 0 {
        return Err(anyhow!("--steps must be positive").into());
    }
    if !(s.min.is_finite() && s.max.is_finite()) || s.min > s.max {
        return Err(anyhow!("need finite --min <= --max").into());
    }
    Ok(match s.sampling {
        Sampling::Grid => (0..s.steps)
            .map(|i| {
                if s.steps == 1 {
                    s.min
                } else {
                    s.min + (s.max - s.min) * i as f64 / (s.steps - 1) as f64
                }
            })
            .collect(),
        Sampling::Random => {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            (0..s.steps).map(|_| rng.gen_range(s.min..=s.max)).collect()
        }
    })
}

/// Writes one perturbed sample and returns its manifest record. The
/// transformed corners are always written; labels only when they still form
/// a valid layout (ceiling corners above the horizon, floor corners below).
fn write_sample(
    dir: &Path,
    id: &str,
    img: &Tensor,
    points: &LabelPoints,
    params: &RenderParams,
    tag: PerturbationTag,
) -> anyhow::Result<Record> {
    let geom = ImageGeometry::with_any_aspect(img.shape()[2], img.shape()[1])?;
    let corners = points.corners(&geom)?;
    let maps = render_gt_maps_points(&geom, &points.points, points.closed, params)?;
    let p = |ext: &str| dir.join(format!("{id}{ext}"));
    write_rgb_png(&p(".png"), img)?;
    write_json(&p(".corners.json"), &corners)?;
    write_map_png(&p(".edge.png"), &maps.edge)?;
    write_map_png(&p(".corner.png"), &maps.corner)?;
    let mut r = Record::new(id);
    match LayoutModel::new(geom, corners.pairs, points.closed) {
        Ok(labels) => {
            write_json(&p(".json"), &labels)?;
            r.labels = Some(p(".json"));
        }
        Err(e) => log::warn!("{id}: no labels written: {e}"),
    }
    r.panorama = Some(p(".png"));
    r.edge = Some(p(".edge.png"));
    r.corner = Some(p(".corner.png"));
    r.perturbation = Some(tag);
    Ok(r)
}

fn finish_sweep(dir: &Path, geom: &ImageGeometry, done: Vec<(String, Record)>, total: usize, failed: usize, name: &str) -> Outcome {
    Manifest::new(geom, done.into_iter().map(|(_, r)| r).collect()).save(&dir.join("manifest.json"))?;
    println!("{name}: {} of {total} samples written to {}", total - failed, dir.display());
    Ok(failed)
}

pub fn sim_rotate(a: &SimRotateArgs) -> Outcome {
    let s = &a.sweep;
    let values = sweep_values(s)?;
    let labels = read_labels(&s.labels)?;
    let geom = labels.geometry;
    let img = io::read_rgb_png(&s.image, Some((geom.width, geom.height)))?;
    let points = LabelPoints::from_model(&labels)?;
    create_dir(&s.out_dir)?;
    let params = s.gt.params();
    let records: Vec<Record> = (0..values.len()).map(|i| Record::new(format!("rot_{i:03}"))).collect();
    let (done, failed) = run_batch(&records, |rec| {
        let i: usize = rec.id[4..].parse()?;
        let deg = values[i];
        let p = match a.axis {
            Axis::Pitch => RigidPerturbation::pitch(deg.to_radians()),
            Axis::Yaw => RigidPerturbation::yaw(deg.to_radians()),
        };
        let rotated = rotate_panorama(&img, &p.rotation())?;
        let kind = match a.axis {
            Axis::Pitch => "pitch",
            Axis::Yaw => "yaw",
        };
        write_sample(&s.out_dir, &rec.id, &rotated, &points.transformed(&p), &params, PerturbationTag {
            kind: kind.into(),
            value: deg,
        })
    });
    finish_sweep(&s.out_dir, &geom, done, values.len(), failed, "sim-rotate")
}

pub fn sim_translate(a: &SimTranslateArgs) -> Outcome {
    let s = &a.sweep;
    let values = sweep_values(s)?;
    let labels = read_labels(&s.labels)?;
    let geom = labels.geometry;
    let img = io::read_rgb_png(&s.image, Some((geom.width, geom.height)))?;
    let l3d: Layout3D = match &a.layout {
        Some(p) => {
            let l: Layout3D = read_json(p).with_context(|| format!("reading {}", p.display()))?;
            l.validate()?;
            l
        }
        None => reconstruct_3d(&geom, &labels.corners()).context("reconstructing the scene from the labels")?,
    };
    create_dir(&s.out_dir)?;
    let params = s.gt.params();
    let records: Vec<Record> = (0..values.len()).map(|i| Record::new(format!("trans_{i:03}"))).collect();
    let (done, failed) = run_batch(&records, |rec| {
        let i: usize = rec.id[6..].parse()?;
        let t = values[i];
        RigidPerturbation::translation(t).validate(panolayout::camsim::MAX_TRANSLATION)?;
        let moved = translate_panorama(&img, &l3d, t)?;
        let points = LabelPoints::from_layout(&l3d).transformed(&RigidPerturbation::translation(t));
        write_sample(&s.out_dir, &rec.id, &moved, &points, &params, PerturbationTag {
            kind: "translation".into(),
            value: t,
        })
    });
    finish_sweep(&s.out_dir, &geom, done, values.len(), failed, "sim-translate")
}

#[derive(Serialize)]
struct TrainReport {
    seed: u64,
    width: usize,
    height: usize,
    channels: Vec<usize>,
    resolution: usize,
    epochs: usize,
    initial_loss: f64,
    final_loss: f64,
    ratio: f64,
    history: Vec<f64>,
}

pub fn train_micro(a: &TrainArgs) -> Outcome {
    let (geom, image, target) = match (&a.image, &a.labels) {
        (Some(img), Some(labels)) => {
            let labels = read_labels(labels)?;
            let g = labels.geometry;
            let image = io::read_rgb_png(img, Some((g.width, g.height)))?;
            let params = RenderParams {
                thickness: a.thickness,
                sigma: a.sigma,
            };
            (g, image, render_gt_maps(&labels, &params)?)
        }
        _ => {
            let g = ImageGeometry::with_any_aspect(a.width, a.height)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let room = random_room(&mut rng, &RoomSampler::default())?;
            let params = RenderParams {
                thickness: a.thickness,
                sigma: a.sigma,
            };
            let image = render_room_image(&g, &room, &RoomStyle::default())?;
            (g, image, render_gt_maps_3d(&g, &room, &params)?)
        }
    };
    let mut channels = vec![3];
    channels.extend(&a.hidden);
    channels.push(2);
    let cfg = NetConfig {
        channels: channels.clone(),
        resolution: a.resolution,
        mode: if a.standard { ConvMode::Standard } else { ConvMode::Equirect },
        dropout: 0.0,
        seed: a.seed,
    };
    let mut net = MicroNet::new(&cfg, geom)?;
    let mut tc = TrainConfig {
        epochs: a.epochs,
        target_mode: match a.target {
            Target::Soft => TargetMode::Soft,
            Target::Binarized => TargetMode::Binarized,
        },
        seed: a.seed,
        ..TrainConfig::default()
    };
    tc.adam.learning_rate = a.lr;
    tc.adam.lr_decay = a.lr_decay;
    let input = image.standardized()?;
    let history = train(&mut net, &[TrainSample { image: input.clone(), target }], &tc)?;
    let pred = net.predict(&input)?;
    create_dir(&a.out_dir)?;
    write_map_png(&a.out_dir.join("pred_edge.png"), &pred.edge)?;
    write_map_png(&a.out_dir.join("pred_corner.png"), &pred.corner)?;
    write_rgb_png(&a.out_dir.join("image.png"), &image)?;
    let (first, last) = match (history.first(), history.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => (f64::NAN, f64::NAN),
    };
    let report = TrainReport {
        seed: a.seed,
        width: geom.width,
        height: geom.height,
        channels,
        resolution: a.resolution,
        epochs: a.epochs,
        initial_loss: first,
        final_loss: last,
        ratio: last / first,
        history,
    };
    write_json(&a.out_dir.join("history.json"), &report)?;
    println!(
        "train-micro: loss {:.4} -> {:.4} (ratio {:.4}) over {} epochs",
        first, last, report.ratio, a.epochs
    );
    Ok(0)
}
