use std::f64::consts::PI;

use proptest::prelude::*;

use panolayout::camsim::{
    perturb_case, rotate_panorama, transform_labels, translate_layout, translate_panorama, LabelPoints,
    RigidPerturbation, RobustnessCase,
};
use panolayout::gt_synth::{render_gt_maps, render_room_image, RenderParams, RoomStyle};
use panolayout::layout3d::{layout_to_model, Layout3D};
use panolayout::sphere::Rotation;
use panolayout::tensor_conv::Tensor;
use panolayout::ImageGeometry;

fn room() -> Layout3D {
    Layout3D::new(vec![[-2.0, -1.5], [-2.5, 2.0], [2.0, 2.5], [1.8, -2.0]], 2.8, 1.0).unwrap()
}

/// Test panorama in [0, 1] that is smooth on the sphere: a low-order
/// polynomial of the viewing direction.
fn smooth_image(h: usize, w: usize) -> Tensor {
    let g = ImageGeometry::new(w, h).unwrap();
    Tensor::from_fn3(3, h, w, |c, y, x| {
        let [dx, dy, dz] = g.pixel_to_unit_vector(x as f64, y as f64).as_array();
        let k = c as f64;
        0.5 + 0.2 * dx + 0.15 * (dy - 0.3 * k) * dz + 0.1 * dx * dy - 0.05 * k * dz
    })
}

fn psnr(a: &Tensor, b: &Tensor) -> f64 {
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    10.0 * (1.0 / mse).log10()
}

fn range(t: &Tensor) -> (f64, f64) {
    t.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rotation_and_inverse_restore_smooth_images(pitch in -0.6..0.6f64, yaw in -PI..PI) {
        let img = smooth_image(64, 128);
        let rot = RigidPerturbation { pitch, yaw, translation: 0.0 }.rotation();
        let there = rotate_panorama(&img, &rot).unwrap();
        let back = rotate_panorama(&there, &rot.inverse()).unwrap();
        prop_assert!(psnr(&img, &back) > 40.0, "{} dB", psnr(&img, &back));
        let (lo, hi) = range(&img);
        let (a, b) = range(&there);
        prop_assert!(a >= lo - 1e-12 && b <= hi + 1e-12);
    }

    #[test]
    fn labels_return_under_the_inverse(pitch in -0.5..0.5f64, yaw in -PI..PI, t in -0.3..0.3f64) {
        let g = ImageGeometry::new(256, 128).unwrap();
        let labels = layout_to_model(&g, &room()).unwrap();
        let p = RigidPerturbation { pitch, yaw, translation: t };
        let back = LabelPoints::from_model(&labels).unwrap().transformed(&p).untransformed(&p).corners(&g).unwrap();
        for (a, b) in back.pairs.iter().zip(&labels.walls) {
            for (x, y) in [(a.ceil, b.ceil), (a.floor, b.floor)] {
                prop_assert!(g.wrapped_du(x[0], y[0]).abs() <= 1e-9 && (x[1] - y[1]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn vertical_moves_round_trip_on_textured_rooms() {
    let g = ImageGeometry::new(256, 128).unwrap();
    let l3d = room();
    let img = render_room_image(&g, &l3d, &RoomStyle::default()).unwrap();
    let (lo, hi) = range(&img);
    for t in [-0.2, -0.1, 0.1, 0.2] {
        let up = translate_panorama(&img, &l3d, t).unwrap();
        let moved = translate_layout(&l3d, t).unwrap();
        let back = translate_panorama(&up, &moved, -t * l3d.ceiling_height / moved.ceiling_height).unwrap();
        let q = psnr(&img, &back);
        assert!(q > 35.0, "t {t}: {q} dB");
        let (a, b) = range(&up);
        assert!(a >= lo - 1e-12 && b <= hi + 1e-12);
    }
}

#[test]
fn warped_maps_agree_with_rendered_labels() {
    let g = ImageGeometry::new(256, 128).unwrap();
    let l3d = room();
    let labels = layout_to_model(&g, &l3d).unwrap();
    let params = RenderParams::default();
    let edge = render_gt_maps(&labels, &params).unwrap().edge;
    let case = RobustnessCase { image: edge.to_tensor(), labels, layout: l3d };
    for p in [
        RigidPerturbation::pitch(0.3),
        RigidPerturbation::pitch(-0.5),
        RigidPerturbation { pitch: 0.2, yaw: 0.7, translation: 0.0 },
        RigidPerturbation::yaw(1.3),
    ] {
        let (warped, maps) = perturb_case(&case, &p, &params).unwrap();
        let mad = warped.data().iter().zip(&maps.edge.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / maps.edge.data.len() as f64;
        assert!(mad < 0.02, "{p:?}: {mad}");
    }
}

#[test]
fn whole_column_yaw_is_a_column_roll() {
    let g = ImageGeometry::new(256, 128).unwrap();
    let img = smooth_image(128, 256);
    let rolled = rotate_panorama(&img, &Rotation::about_y(PI / 2.0)).unwrap();
    assert_eq!(rolled, img.roll_columns(64).unwrap());

    let labels = layout_to_model(&g, &room()).unwrap();
    let turned = transform_labels(&labels, &RigidPerturbation::yaw(PI / 2.0)).unwrap();
    let mut want: Vec<f64> = labels.walls.iter().map(|p| (p.ceil[0] + 64.0) % 256.0).collect();
    let mut got: Vec<f64> = turned.pairs.iter().map(|p| p.ceil[0]).collect();
    want.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    assert_eq!(got, want);
}

#[test]
fn raising_the_camera_pushes_the_floor_down() {
    let g = ImageGeometry::new(256, 128).unwrap();
    let labels = layout_to_model(&g, &room()).unwrap();
    let up = transform_labels(&labels, &RigidPerturbation::translation(0.2)).unwrap();
    for (a, b) in up.pairs.iter().zip(&labels.walls) {
        // farther from the horizon row 64 on the floor, closer on the ceiling
        assert!(a.floor[1] > b.floor[1], "{a:?} vs {b:?}");
        assert!(a.ceil[1] > b.ceil[1], "{a:?} vs {b:?}");
    }
}
