use anyhow::{anyhow, Context};

use panolayout::gt_synth::{boundary_pixels, LayoutModel};
use panolayout::io::{read_json, read_rgb_png, write_rgb_png};
use panolayout::tensor_conv::Tensor;

use crate::{Outcome, OverlayArgs};

/// Ground truth is drawn in dark magenta, predictions in light magenta.
pub const GT_COLOR: [f64; 3] = [139.0 / 255.0, 0.0, 139.0 / 255.0];
pub const PRED_COLOR: [f64; 3] = [1.0, 128.0 / 255.0, 1.0];

/// Paints the projected boundary of `layout` onto `img`, one pixel wide.
pub fn draw_layout(img: &mut Tensor, layout: &LayoutModel, color: [f64; 3]) {
    let g = layout.geometry;
    for [u, v] in boundary_pixels(layout) {
        let x = (u.floor() as isize).rem_euclid(g.width as isize) as usize;
        let y = (v.floor().max(0.0) as usize).min(g.height - 1);
        for (c, &val) in color.iter().enumerate() {
            img.set3(c, y, x, val);
        }
    }
}

pub fn render_overlay(a: &OverlayArgs) -> Outcome {
    let load = |p: &std::path::Path| -> anyhow::Result<LayoutModel> {
        read_json(p).with_context(|| format!("reading labels {}", p.display()))
    };
    let gt = a.gt.as_deref().map(load).transpose()?;
    let pred = a.pred.as_deref().map(load).transpose()?;
    let geom = match (&gt, &pred) {
        (Some(g), Some(p)) if g.geometry != p.geometry => {
            return Err(anyhow!("ground truth and prediction have different image sizes").into())
        }
        (Some(l), _) | (None, Some(l)) => l.geometry,
        (None, None) => return Err(anyhow!("nothing to draw: pass --gt and/or --pred").into()),
    };
    let mut img = read_rgb_png(&a.image, Some((geom.width, geom.height)))?;
    if let Some(l) = &gt {
        draw_layout(&mut img, l, GT_COLOR);
    }
    if let Some(l) = &pred {
        draw_layout(&mut img, l, PRED_COLOR);
    }
    write_rgb_png(&a.output, &img)?;
    Ok(0)
}
