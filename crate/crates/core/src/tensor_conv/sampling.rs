use super::tensor::Tensor;

/// The four neighbors and weights of a bilinear lookup on an `h x w` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearTap {
    /// Flat `y * w + x` indices: top-left, top-right, bottom-left, bottom-right.
    pub idx: [usize; 4],
    pub weights: [f64; 4],
    /// Set when a coordinate had to be clamped into the raster.
    pub clamped: bool,
}

impl BilinearTap {
    pub fn new(w: usize, h: usize, u: f64, v: f64, horizontal_wrap: bool) -> Self {
        let mut clamped = false;
        let vmax = (h - 1) as f64;
        let vv = if v < 0.0 {
            clamped = true;
            0.0
        } else if v > vmax {
            clamped = true;
            vmax
        } else {
            v
        };
        let y0 = (vv.floor() as usize).min(h - 1);
        let fy = vv - y0 as f64;
        let y1 = (y0 + 1).min(h - 1);

        let (x0, x1, fx) = if horizontal_wrap {
            let wf = w as f64;
            let mut uu = u.rem_euclid(wf);
            if uu >= wf {
                uu = 0.0;
            }
            let x0 = (uu.floor() as usize).min(w - 1);
            (x0, (x0 + 1) % w, uu - x0 as f64)
        } else {
            let umax = (w - 1) as f64;
            let uu = if u < 0.0 {
                clamped = true;
                0.0
            } else if u > umax {
                clamped = true;
                umax
            } else {
                u
            };
            let x0 = (uu.floor() as usize).min(w - 1);
            (x0, (x0 + 1).min(w - 1), uu - x0 as f64)
        };
        Self::from_parts(w, y0, y1, fy, x0, x1, fx, clamped)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        w: usize,
        y0: usize,
        y1: usize,
        fy: f64,
        x0: usize,
        x1: usize,
        fx: f64,
        clamped: bool,
    ) -> Self {
        Self {
            idx: [y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1],
            weights: [
                (1.0 - fy) * (1.0 - fx),
                (1.0 - fy) * fx,
                fy * (1.0 - fx),
                fy * fx,
            ],
            clamped,
        }
    }

    #[inline]
    pub fn apply(&self, plane: &[f64]) -> f64 {
        self.weights[0] * plane[self.idx[0]]
            + self.weights[1] * plane[self.idx[1]]
            + self.weights[2] * plane[self.idx[2]]
            + self.weights[3] * plane[self.idx[3]]
    }
}

/// Result of sampling every channel at one continuous position.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub values: Vec<f64>,
    pub clamped: bool,
}

/// Bilinear lookup of all channels of a `[C, H, W]` tensor at `(u, v)`.
///
/// Out-of-range `v` (and `u` when wrap is off) is clamped to the edge and
/// reported through [`Sample::clamped`].
pub fn bilinear_sample(t: &Tensor, u: f64, v: f64, horizontal_wrap: bool) -> Sample {
    let (c, h, w) = t.dims3().expect("bilinear_sample needs a [C, H, W] tensor");
    let tap = BilinearTap::new(w, h, u, v, horizontal_wrap);
    let plane = h * w;
    let values = (0..c)
        .map(|ci| tap.apply(&t.data()[ci * plane..(ci + 1) * plane]))
        .collect();
    Sample {
        values,
        clamped: tap.clamped,
    }
}
