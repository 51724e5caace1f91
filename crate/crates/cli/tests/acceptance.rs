//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs with `cargo test --test acceptance`. Built without the libtest
//! harness so the report is always printed.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use panolayout::camsim::{
    robustness_table, run_sweep, LabelPoints, RigidPerturbation, RobustnessCase, SweepKind,
};
use panolayout::evalmetrics::{iou3d, iou3d_voxel, layout_metrics};
use panolayout::gt_synth::{
    random_room, render_gt_maps, render_gt_maps_3d, render_room_image, RenderParams, RoomSampler, RoomStyle,
};
use panolayout::kernel_offsets::{sample_positions, KernelSpec, OffsetField};
use panolayout::layout3d::{extract_corners, layout_to_model, reconstruct_3d, Layout3D, PeakParams};
use panolayout::sphere::rotate_align;
use panolayout::tensor_conv::{
    class_weights, conv_equi, conv_equi_backward, conv_standard, conv_standard_backward, gradient_check,
    multi_scale_loss, train_micro, weighted_bce, ConvLayer, MicroNet, NetConfig, Padding, TargetMode, Tensor,
    TrainConfig, TrainSample,
};
use panolayout::{ImageGeometry, MapPair, ProbabilityMap, SphericalAngles};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(t: Duration, limit_s: f64) -> bool {
    t.as_secs_f64() < limit_s
}

fn max_err(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn geometry_exactness() -> Outcome {
    let t0 = Instant::now();
    let g = ImageGeometry::new(256, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut pix, mut ang, mut iso) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let (u, v) = (rng.gen_range(0.0..256.0), rng.gen_range(0.001..127.999));
        let (u2, v2) = g.angles_to_pixel(g.pixel_to_angles(u, v));
        pix = pix.max(g.wrapped_du(u, u2).abs()).max((v - v2).abs());

        let a = SphericalAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-FRAC_PI_2 + 1e-3..FRAC_PI_2 - 1e-3));
        let b = a.to_unit_vector().to_angles();
        let dphi = (a.phi - b.phi + PI).rem_euclid(TAU) - PI;
        ang = ang.max(dphi.abs()).max((a.theta - b.theta).abs());

        let p = SphericalAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5)).to_unit_vector();
        let q = SphericalAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5)).to_unit_vector();
        let c = SphericalAngles::new(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5));
        let (rp, rq) = (rotate_align(p, c), rotate_align(q, c));
        iso = iso.max((rp.dot(&rq) - p.dot(&q)).abs()).max((rp.norm() - 1.0).abs());
    }
    let t = t0.elapsed();
    check(
        pix <= 1e-9 && ang <= 1e-9 && iso <= 1e-12 && within(t, 1.0),
        format!("pixel {pix:.1e}, angle {ang:.1e}, isometry {iso:.1e}, {t:.2?}"),
    )
}

fn offset_fidelity() -> Outcome {
    let g = ImageGeometry::new(256, 128).unwrap();
    let spec = KernelSpec::matching_standard(3, &g).unwrap();
    let field = OffsetField::new(g, spec);

    // equator: kernel centered on (100, 64) vs the regular grid
    let eq = field.positions_at(100.0, 64);
    let mut grid_err = 0.0f64;
    for (k, p) in eq.iter().enumerate() {
        let (dy, dx) = ((k / 3) as f64 - 1.0, (k % 3) as f64 - 1.0);
        grid_err = grid_err.max(g.wrapped_du(p[0], 100.0 + dx).abs()).max((p[1] - (64.0 + dy)).abs());
    }

    // near the pole: middle-row taps spread by ~1/cos(theta)
    let v = 10usize;
    let theta = g.pixel_to_angles(0.0, v as f64).theta;
    let row = field.positions_at(100.0, v);
    let spacing = (g.wrapped_du(row[5][0], row[4][0]).abs() + g.wrapped_du(row[4][0], row[3][0]).abs()) / 2.0;
    let predicted = 1.0 / theta.cos();
    let spread_err = (spacing - predicted).abs() / predicted;

    // the stored row shifted by u0 equals the directly computed kernel
    let mut constancy = 0.0f64;
    for v in (0..128).step_by(7) {
        for u0 in [0usize, 1, 37, 128, 255] {
            let a = field.positions_at(u0 as f64, v);
            let b = sample_positions(&g, &spec, u0 as f64, v as f64);
            for (p, q) in a.iter().zip(&b) {
                constancy = constancy.max(g.wrapped_du(p[0], q[0]).abs()).max((p[1] - q[1]).abs());
            }
        }
    }

    // rows v and H - v mirror about the equator
    let mut mirror = 0.0f64;
    for v in 1..128 {
        let (a, b) = (field.row(v), field.row(128 - v));
        for k in 0..9 {
            let m = (2 - k / 3) * 3 + k % 3;
            mirror = mirror.max(g.wrapped_du(a[k][0], b[m][0]).abs()).max((a[k][1] + b[m][1] - 128.0).abs());
        }
    }
    check(
        grid_err <= 0.02 && spread_err <= 0.10 && constancy <= 1e-9 && mirror <= 1e-9,
        format!(
            "equator {grid_err:.1e} px, spacing {spacing:.3} px vs 1/cos {predicted:.3} at theta {theta:.3} ({:.1}%), row shift {constancy:.1e}, mirror {mirror:.1e}",
            100.0 * spread_err
        ),
    )
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn naive_conv(x: &Tensor, l: &ConvLayer) -> Tensor {
    let (c, h, w) = x.dims3().unwrap();
    let (o, r) = (l.out_channels(), l.resolution());
    let p = (r / 2) as isize;
    Tensor::from_fn3(o, h, w, |oi, y, xx| {
        let mut s = l.bias[oi];
        for ci in 0..c {
            for a in 0..r {
                for b in 0..r {
                    let (yy, xs) = (y as isize + a as isize - p, xx as isize + b as isize - p);
                    if yy >= 0 && xs >= 0 && (yy as usize) < h && (xs as usize) < w {
                        s += l.weights.data()[((oi * c + ci) * r + a) * r + b] * x.at3(ci, yy as usize, xs as usize);
                    }
                }
            }
        }
        s
    })
}

/// Smooth test panorama: low-frequency, horizontally periodic.
fn smooth_image(c: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn3(c, h, w, |ch, y, x| {
        let u = TAU * x as f64 / w as f64;
        let v = PI * y as f64 / h as f64;
        (u + ch as f64).sin() * v.sin() + 0.5 * (2.0 * u - 0.3 * ch as f64).cos() * (2.0 * v).cos()
    })
}

fn conv_equivalences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tensor(&mut rng, &[3, 12, 20]);
    let layer = ConvLayer::init_uniform(4, 3, 3, 1, &mut rng);
    let naive = naive_conv(&x, &layer).max_abs_diff(&conv_standard(&x, &layer, Padding::Same).unwrap());

    let g = ImageGeometry::new(256, 128).unwrap();
    let field = OffsetField::new(g, KernelSpec::matching_standard(3, &g).unwrap());
    let img = smooth_image(3, 128, 256);
    let layer = ConvLayer::init_uniform(4, 3, 3, 1, &mut rng);
    let eq = conv_equi(&img, &layer, &field).unwrap();
    let st = conv_standard(&img, &layer, Padding::Same).unwrap();
    let equator = max_err((0..4).flat_map(|o| {
        let (eq, st) = (&eq, &st);
        // interior columns: the standard conv zero-pads where the equirectangular one wraps
        (1..255).map(move |u| (eq.at3(o, 64, u) - st.at3(o, 64, u)).abs())
    }));

    let noisy = random_tensor(&mut rng, &[3, 128, 256]);
    let base = conv_equi(&noisy, &layer, &field).unwrap();
    let mut shift = 0.0f64;
    for k in [1isize, 7, -40, 128] {
        let a = conv_equi(&noisy.roll_columns(k).unwrap(), &layer, &field).unwrap();
        shift = shift.max(a.max_abs_diff(&base.roll_columns(k).unwrap()));
    }
    check(
        naive <= 1e-6 && equator <= 1e-4 && shift <= 1e-9,
        format!("naive oracle {naive:.1e}, equator vs standard {equator:.1e}, integer shift {shift:.1e}"),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient_checks() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // conv weights, standard and equirectangular
    let x = random_tensor(&mut rng, &[2, 10, 16]);
    let layer = ConvLayer::init_uniform(3, 2, 3, 1, &mut rng);
    let gout = random_tensor(&mut rng, &[3, 10, 16]);
    let gx = ImageGeometry::with_any_aspect(16, 10).unwrap();
    let field = OffsetField::new(gx, KernelSpec::matching_standard(3, &gx).unwrap());
    let wgrad_std = conv_standard_backward(&x, &layer, Padding::Same, &gout).unwrap().weights;
    let e_std = gradient_check(
        |w| {
            let mut l = layer.clone();
            l.weights = Tensor::new(layer.weights.shape().to_vec(), w.to_vec()).unwrap();
            dot(conv_standard(&x, &l, Padding::Same).unwrap().data(), gout.data())
        },
        layer.weights.data(),
        wgrad_std.data(),
    );
    let grads = conv_equi_backward(&x, &layer, &field, &gout).unwrap();
    let e_eqw = gradient_check(
        |w| {
            let mut l = layer.clone();
            l.weights = Tensor::new(layer.weights.shape().to_vec(), w.to_vec()).unwrap();
            dot(conv_equi(&x, &l, &field).unwrap().data(), gout.data())
        },
        layer.weights.data(),
        grads.weights.data(),
    );
    let conv_w = e_std.max(e_eqw);

    // equirectangular input gradient
    let e_in = gradient_check(
        |xs| {
            let xt = Tensor::new(x.shape().to_vec(), xs.to_vec()).unwrap();
            dot(conv_equi(&xt, &layer, &field).unwrap().data(), gout.data())
        },
        x.data(),
        grads.input.data(),
    );

    // weighted BCE on a soft target
    let (w, h) = (12, 6);
    let gt = ProbabilityMap::new(w, h, (0..w * h).map(|i| if i % 7 == 0 { 0.9 } else { 0.1 * (i % 3) as f64 }).collect())
        .unwrap();
    let pred: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.05..0.95)).collect();
    let pm = ProbabilityMap::new(w, h, pred.clone()).unwrap();
    let analytic = weighted_bce(&pm, &gt, TargetMode::Soft).unwrap().grad;
    let e_bce = gradient_check(
        |p| weighted_bce(&ProbabilityMap::new(w, h, p.to_vec()).unwrap(), &gt, TargetMode::Soft).unwrap().loss,
        &pred,
        &analytic,
    );

    // multi-scale: two resolutions, both maps
    let mk = |w: usize, h: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        ProbabilityMap::new(w, h, (0..w * h).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    };
    let gts = vec![
        MapPair { edge: mk(8, 4, &mut rng, 0.0, 1.0), corner: mk(8, 4, &mut rng, 0.0, 1.0) },
        MapPair { edge: mk(16, 8, &mut rng, 0.0, 1.0), corner: mk(16, 8, &mut rng, 0.0, 1.0) },
    ];
    let preds = vec![
        MapPair { edge: mk(8, 4, &mut rng, 0.05, 0.95), corner: mk(8, 4, &mut rng, 0.05, 0.95) },
        MapPair { edge: mk(16, 8, &mut rng, 0.05, 0.95), corner: mk(16, 8, &mut rng, 0.05, 0.95) },
    ];
    let flat: Vec<f64> = preds.iter().flat_map(|p| p.edge.data.iter().chain(&p.corner.data).copied()).collect();
    let ms = multi_scale_loss(&preds, &gts, TargetMode::Soft).unwrap();
    let analytic: Vec<f64> = ms.grads.iter().flat_map(|[e, c]| e.iter().chain(c).copied()).collect();
    let unflat = |v: &[f64]| {
        let mut out = Vec::new();
        let mut off = 0;
        for p in &preds {
            let (w, h) = (p.edge.width, p.edge.height);
            let n = w * h;
            out.push(MapPair {
                edge: ProbabilityMap::new(w, h, v[off..off + n].to_vec()).unwrap(),
                corner: ProbabilityMap::new(w, h, v[off + n..off + 2 * n].to_vec()).unwrap(),
            });
            off += 2 * n;
        }
        out
    };
    let e_ms = gradient_check(|v| multi_scale_loss(&unflat(v), &gts, TargetMode::Soft).unwrap().total, &flat, &analytic);
    let t = t0.elapsed();
    check(
        conv_w < 1e-6 && e_in < 1e-5 && e_bce < 1e-7 && e_ms < 1e-7 && within(t, 30.0),
        format!("conv weights {conv_w:.1e}, equi input {e_in:.1e}, BCE {e_bce:.1e}, multi-scale {e_ms:.1e}, {t:.2?}"),
    )
}

fn box_room() -> Layout3D {
    Layout3D::new(vec![[-2.0, -2.0], [-2.0, 2.0], [2.0, 2.0], [2.0, -2.0]], 3.0, 1.0).unwrap()
}

fn loss_weights() -> Outcome {
    let mut gt = vec![0.0; 400];
    for v in gt.iter_mut().take(20) {
        *v = 1.0;
    }
    let w = class_weights(&gt);
    let weights_ok = (w.positive - 20.0).abs() <= 1e-6
        && (w.negative - 400.0 / 380.0).abs() <= 1e-6
        && format!("{:.4}", w.negative) == "1.0526";

    let g = ImageGeometry::new(256, 128).unwrap();
    let maps = render_gt_maps_3d(&g, &box_room(), &RenderParams::default()).unwrap();
    let (fe, fc) = (maps.edge.positive_fraction(0.5), maps.corner.positive_fraction(0.5));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let room = random_room(&mut rng, &RoomSampler::default()).unwrap();
        let m = render_gt_maps_3d(&g, &room, &RenderParams::default()).unwrap();
        worst = worst.max(m.edge.positive_fraction(0.5));
    }
    check(
        weights_ok && fe <= 0.10 && fc <= 0.10,
        format!(
            "w1 {:.6}, w0 {:.6}; box room positives edge {:.2}% corner {:.2}% (random rooms, edge max {:.2}%)",
            w.positive,
            w.negative,
            100.0 * fe,
            100.0 * fc,
            100.0 * worst
        ),
    )
}

fn synthetic_round_trip() -> Outcome {
    let t0 = Instant::now();
    let g = ImageGeometry::new(256, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut min_iou, mut max_ce, mut max_pe) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut walls: BTreeMap<usize, usize> = BTreeMap::new();
    let mut failures = Vec::new();
    for i in 0..20 {
        let room = random_room(&mut rng, &RoomSampler::default()).unwrap();
        *walls.entry(room.floor.len()).or_default() += 1;
        let res = (|| -> panolayout::Result<_> {
            let labels = layout_to_model(&g, &room)?;
            let maps = render_gt_maps(&labels, &RenderParams::default())?;
            let ex = extract_corners(&maps.corner, &PeakParams::default())?;
            let rec = reconstruct_3d(&g, &ex.corners)?;
            layout_metrics(&g, &rec, &room)
        })();
        match res {
            Ok(m) => {
                min_iou = min_iou.min(m.iou3d);
                max_ce = max_ce.max(m.corner_error);
                max_pe = max_pe.max(m.pixel_error_cs);
            }
            Err(e) => failures.push(format!("room {i}: {e}")),
        }
    }
    let t = t0.elapsed();
    check(
        failures.is_empty() && min_iou >= 0.97 && max_ce <= 0.01 && max_pe <= 0.02 && within(t, 10.0),
        format!(
            "20 rooms (walls {walls:?}): min 3DIoU {min_iou:.4}, max CE {max_ce:.1e}, max PE^CS {max_pe:.1e}, {t:.2?}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn iou_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sampler = RoomSampler::default();
    let mut worst = 0.0f64;
    let mut range = (1.0f64, 0.0f64);
    for _ in 0..50 {
        let a = random_room(&mut rng, &sampler).unwrap();
        let b0 = random_room(&mut rng, &sampler).unwrap();
        let (s, dx, dz) = (rng.gen_range(0.5..1.3), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let b = Layout3D {
            floor: b0.floor.iter().map(|p| [s * p[0] + dx, s * p[1] + dz]).collect(),
            ceiling_height: b0.ceiling_height,
            camera_height: rng.gen_range(0.6..1.4),
        };
        let exact = iou3d(&a, &b).unwrap();
        range = (range.0.min(exact), range.1.max(exact));
        worst = worst.max((exact - iou3d_voxel(&a, &b, 200)).abs());
    }
    let sq = |x: f64| vec![[x, 0.0], [x + 1.0, 0.0], [x + 1.0, 1.0], [x, 1.0]];
    let cube = Layout3D { floor: sq(0.0), ceiling_height: 1.0, camera_height: 0.5 };
    let shifted = Layout3D { floor: sq(0.5), ..cube.clone() };
    let third = iou3d(&cube, &shifted).unwrap();
    let third_vox = iou3d_voxel(&cube, &shifted, 200);
    check(
        worst <= 0.01 && (third - 1.0 / 3.0).abs() < 1e-12 && (third_vox - 1.0 / 3.0).abs() <= 0.01,
        format!(
            "50 pairs (IoU {:.3}..{:.3}): max |exact - voxel| {worst:.1e}; shifted cube {third:.6} (voxel {third_vox:.4})",
            range.0, range.1
        ),
    )
}

fn micro_training() -> Outcome {
    let t0 = Instant::now();
    let g = ImageGeometry::new(32, 16).unwrap();
    let room = Layout3D::new(vec![[-2.0, -1.5], [-2.5, 2.0], [2.0, 2.5], [1.8, -2.0]], 2.8, 1.0).unwrap();
    let image = render_room_image(&g, &room, &RoomStyle::default()).unwrap().standardized().unwrap();
    let target = render_gt_maps_3d(&g, &room, &RenderParams { thickness: 0.75, sigma: 0.5 }).unwrap();
    let net_cfg = NetConfig {
        channels: vec![3, 32, 32, 2],
        resolution: 7,
        seed: 1,
        ..NetConfig::default()
    };
    let cfg = TrainConfig {
        target_mode: TargetMode::Binarized,
        ..TrainConfig::default()
    };
    let data = [TrainSample { image, target }];
    let mut net = MicroNet::new(&net_cfg, g).unwrap();
    let history = train_micro(&mut net, &data, &cfg).unwrap();
    let t = t0.elapsed();
    let ratio = history.last().unwrap() / history[0];

    let mut again = MicroNet::new(&net_cfg, g).unwrap();
    let short = TrainConfig { epochs: 25, ..cfg.clone() };
    let repeat = train_micro(&mut again, &data, &short).unwrap();
    let deterministic = repeat[..] == history[..25];
    check(
        history.len() == 300 && ratio <= 0.10 && deterministic && within(t, 120.0),
        format!(
            "3 layers [3,32,32,2] r=7 on 32x16: loss {:.1} -> {:.1} (ratio {ratio:.4}) in {} epochs, {t:.1?}; rerun {}",
            history[0],
            history.last().unwrap(),
            history.len(),
            if deterministic { "bit-identical" } else { "DIFFERS" }
        ),
    )
}

fn robustness_harness() -> Outcome {
    let g = ImageGeometry::new(64, 32).unwrap();
    let room = box_room();
    let labels = layout_to_model(&g, &room).unwrap();
    let image = render_room_image(&g, &room, &RoomStyle::default()).unwrap();
    let case = RobustnessCase { image, labels: labels.clone(), layout: room.clone() };
    let net = MicroNet::new(&NetConfig { seed: 9, ..NetConfig::default() }, g).unwrap();
    let params = RenderParams { thickness: 1.5, sigma: 1.0 };
    let cases = [case];

    // whole-column yaw steps
    let step = TAU / g.width as f64;
    let yaw = run_sweep(&net, &cases, SweepKind::Yaw { min: 0.0, max: 12.0 * step }, 13, &params, 0.5).unwrap();
    let base = &yaw.records[0];
    let yaw_exact = yaw.records.iter().all(|r| r.edges == base.edges && r.corners == base.corners);
    let edge_pos = base.edges.recall > 0.0 || base.edges.precision > 0.0;

    let pitch = run_sweep(&net, &cases, SweepKind::Pitch { min: -30f64.to_radians(), max: 30f64.to_radians() }, 11, &params, 0.5)
        .unwrap();
    let trans = run_sweep(&net, &cases, SweepKind::Translation { min: -0.3, max: 0.3 }, 11, &params, 0.5).unwrap();
    let table = robustness_table(&[("EquiConvs".into(), trans.clone()), ("EquiConvs".into(), pitch.clone())]);
    let table_ok = table.contains("Translation (-0.3h:+0.3h)")
        && table.contains("Rotation (-30deg:+30deg)")
        && table.contains("Edges")
        && table.contains("Corners")
        && table.matches('±').count() == 12
        && pitch.records.len() == 11
        && trans.records.len() == 11;

    // inverse perturbation on the label points
    let pts = LabelPoints::from_model(&labels).unwrap();
    let gt_corners = labels.corners();
    let mut round = 0.0f64;
    for p in [
        RigidPerturbation::pitch(0.4),
        RigidPerturbation::pitch(-0.52),
        RigidPerturbation::yaw(1.1),
        RigidPerturbation::translation(0.3),
        RigidPerturbation::translation(-0.3),
        RigidPerturbation { pitch: 0.3, yaw: -0.7, translation: 0.2 },
    ] {
        let back = pts.transformed(&p).untransformed(&p).corners(&g).unwrap();
        for (a, b) in back.pairs.iter().zip(&gt_corners.pairs) {
            round = round
                .max(g.wrapped_du(a.ceil[0], b.ceil[0]).abs())
                .max(g.wrapped_du(a.floor[0], b.floor[0]).abs())
                .max((a.ceil[1] - b.ceil[1]).abs())
                .max((a.floor[1] - b.floor[1]).abs());
        }
    }
    check(
        yaw_exact && edge_pos && table_ok && round <= 1e-9,
        format!(
            "13 whole-column yaws {}; pitch/translation sweeps of 11 steps tabulated; label round trip {round:.1e}\n{}",
            if yaw_exact { "bit-identical" } else { "DIFFER" },
            table.trim_end()
        ),
    )
}

fn run(bin: &str, dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(bin).args(args).current_dir(dir).output().expect("running the CLI");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_panolayout");
    let commands: Vec<Vec<&str>> = vec![
        vec!["offsets", "--width", "256", "--height", "128", "-r", "3", "--alpha-auto", "off.cflt", "--png", "off.png", "--rows", "10,64"],
        vec!["synth", "--seed", "11", "--count", "3", "--out-dir", "syn"],
        vec!["gen-gt", "syn/room_000.json", "--sigma", "2", "--thickness", "3", "--out-dir", "gt"],
        vec!["gen-gt", "--manifest", "syn/manifest.json", "--out-dir", "gtm"],
        vec!["augment", "syn/room_000.png", "syn/room_000.json", "--mirror", "--shift", "17", "--erase", "2", "--seed", "5", "--out-dir", "aug"],
        vec!["extract-layout", "gt/corner.png", "--output", "ex.json"],
        vec!["reconstruct", "ex.json", "--output", "rec.json"],
        vec!["eval-maps", "--pred-edge", "gt/edge.png", "--pred-corner", "gt/corner.png", "--gt", "syn/room_000.json", "--json", "em.json"],
        vec!["eval-layout", "ex.json", "syn/room_000.layout.json", "--json", "el.json"],
        vec!["sim-rotate", "syn/room_000.png", "syn/room_000.json", "--min", "-30", "--max", "30", "--steps", "11", "--seed", "7", "--out-dir", "rot"],
        vec!["sim-rotate", "syn/room_000.png", "syn/room_000.json", "--min", "-30", "--max", "30", "--steps", "4", "--seed", "7", "--sampling", "random", "--out-dir", "rotr"],
        vec!["sim-translate", "syn/room_000.png", "syn/room_000.json", "--layout", "syn/room_000.layout.json", "--min", "-0.3", "--max", "0.3", "--steps", "5", "--seed", "3", "--out-dir", "tr"],
        vec!["train-micro", "--seed", "2", "--width", "32", "--height", "16", "--hidden", "4,4", "-r", "3", "--epochs", "5", "--out-dir", "train"],
        vec!["render-overlay", "syn/room_000.png", "--gt", "syn/room_000.json", "--pred", "ex.json", "--output", "overlay.png"],
    ];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut bad = Vec::new();
    for cmd in &commands {
        let (ca, oa) = run(bin, a.path(), cmd);
        let (cb, ob) = run(bin, b.path(), cmd);
        if ca != 0 || cb != 0 {
            bad.push(format!("{} exited {ca}/{cb}", cmd[0]));
        } else if oa != ob {
            bad.push(format!("{} stdout differs", cmd[0]));
        }
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<&String> = ta.keys().filter(|k| tb.get(*k) != ta.get(*k)).collect();
    if ta.len() != tb.len() {
        bad.push(format!("{} vs {} files", ta.len(), tb.len()));
    }
    if !differing.is_empty() {
        bad.push(format!("differing files: {differing:?}"));
    }
    check(
        bad.is_empty(),
        format!(
            "{} commands run twice, {} output files byte-identical{}",
            commands.len(),
            ta.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join("; ")) }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Geometry exactness", geometry_exactness),
        ("Offset-field fidelity", offset_fidelity),
        ("Convolution equivalences", conv_equivalences),
        ("Gradient checks", gradient_checks),
        ("Loss weights and GT sparsity", loss_weights),
        ("Synthetic round trip", synthetic_round_trip),
        ("3D IoU oracle", iou_oracle),
        ("Micro-training", micro_training),
        ("Robustness harness", robustness_harness),
        ("CLI reproducibility", cli_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let res = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
