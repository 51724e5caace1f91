//! Class-balanced binary cross-entropy over edge/corner maps.
//!
//! `L_i = w1 * y * (-ln p) + w0 * (1 - y) * (-ln(1 - p))` with `w_t = N / N_t`,
//! where `N_t` counts pixels of class `t` in the ground truth (positive means
//! `y > 0.5`). The total multi-resolution loss sums `L_i` over pixels, both
//! maps and every resolution.

use log::warn;

use crate::error::{Error, Result};
use crate::maps::{MapPair, ProbabilityMap};

/// Predictions are clipped to `[PRED_CLIP, 1 - PRED_CLIP]` before the logs.
pub const PRED_CLIP: f64 = 1e-7;

/// How blurred ground truth enters the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// Use the blurred values as soft targets.
    #[default]
    Soft,
    /// Re-binarize targets at 0.5.
    Binarized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub positive: f64,
    pub negative: f64,
}

/// `w_t = N / N_t`; a class with no pixels gets weight 0.
pub fn class_weights(gt: &[f64]) -> ClassWeights {
    let n = gt.len();
    let n_pos = gt.iter().filter(|&&y| y > 0.5).count();
    let n_neg = n - n_pos;
    let weight = |count: usize, name: &str| {
        if count == 0 {
            warn!("ground truth has no {name} pixels; class weight set to 0");
            0.0
        } else {
            n as f64 / count as f64
        }
    };
    ClassWeights {
        positive: weight(n_pos, "positive"),
        negative: weight(n_neg, "negative"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BceOutput {
    pub loss: f64,
    /// `dL/dp` for each pixel, including the effect of clipping.
    pub grad: Vec<f64>,
    pub weights: ClassWeights,
}

pub(crate) fn weighted_bce_slices(pred: &[f64], gt: &[f64], mode: TargetMode) -> BceOutput {
    debug_assert_eq!(pred.len(), gt.len());
    let weights = class_weights(gt);
    let (w1, w0) = (weights.positive, weights.negative);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p_raw, &y_raw) in pred.iter().zip(gt) {
        let y = match mode {
            TargetMode::Soft => y_raw,
            TargetMode::Binarized => {
                if y_raw > 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let inside = p_raw > PRED_CLIP && p_raw < 1.0 - PRED_CLIP;
        let p = p_raw.clamp(PRED_CLIP, 1.0 - PRED_CLIP);
        loss += w1 * y * -p.ln() + w0 * (1.0 - y) * -(1.0 - p).ln();
        grad.push(if inside {
            -w1 * y / p + w0 * (1.0 - y) / (1.0 - p)
        } else {
            0.0
        });
    }
    BceOutput { loss, grad, weights }
}

pub fn weighted_bce(pred: &ProbabilityMap, gt: &ProbabilityMap, mode: TargetMode) -> Result<BceOutput> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    Ok(weighted_bce_slices(&pred.data, &gt.data, mode))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleLoss {
    pub total: f64,
    /// Per resolution: `[edge, corner]` loss.
    pub per_map: Vec<[f64; 2]>,
    /// Per resolution: `[edge, corner]` gradients with respect to the predictions.
    pub grads: Vec<[Vec<f64>; 2]>,
}

/// Sum of [`weighted_bce`] over all resolutions and both maps.
pub fn multi_scale_loss(preds: &[MapPair], gts: &[MapPair], mode: TargetMode) -> Result<MultiScaleLoss> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted resolutions vs {} ground-truth resolutions",
            preds.len(),
            gts.len()
        )));
    }
    let mut total = 0.0;
    let mut per_map = Vec::with_capacity(preds.len());
    let mut grads = Vec::with_capacity(preds.len());
    for (p, g) in preds.iter().zip(gts) {
        let e = weighted_bce(&p.edge, &g.edge, mode)?;
        let c = weighted_bce(&p.corner, &g.corner, mode)?;
        total += e.loss + c.loss;
        per_map.push([e.loss, c.loss]);
        grads.push([e.grad, c.grad]);
    }
    Ok(MultiScaleLoss { total, per_map, grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn map(w: usize, h: usize, data: Vec<f64>) -> ProbabilityMap {
        ProbabilityMap::new(w, h, data).unwrap()
    }

    #[test]
    fn five_percent_positives() {
        let mut gt = vec![0.0; 400];
        for v in gt.iter_mut().take(20) {
            *v = 1.0;
        }
        let w = class_weights(&gt);
        assert!((w.positive - 20.0).abs() < 1e-12);
        assert!((w.negative - 400.0 / 380.0).abs() < 1e-12);
        assert!((w.negative - 1.052_631_578_947_368_4).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let gt: Vec<f64> = (0..64).map(|i| if i % 7 == 0 { 1.0 } else { 0.0 }).collect();
        let g = map(8, 8, gt.clone());
        let out = weighted_bce(&g, &g, TargetMode::Soft).unwrap();
        let w = out.weights;
        let bound = 64.0 * w.positive.max(w.negative) * -(1.0f64 - 1e-7).ln();
        assert!(out.loss <= bound + 1e-15);
        assert!(out.loss < 1e-3);
    }

    #[test]
    fn half_prediction_costs_log_two_per_weight() {
        let gt: Vec<f64> = (0..50).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        let out = weighted_bce(&map(10, 5, vec![0.5; 50]), &map(10, 5, gt), TargetMode::Soft).unwrap();
        let expected = (5.0 * 10.0 + 45.0 * 50.0 / 45.0) * LN_2;
        assert!((out.loss - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_class_gets_zero_weight() {
        let w = class_weights(&[0.0; 10]);
        assert_eq!(w.positive, 0.0);
        assert_eq!(w.negative, 1.0);
    }

    #[test]
    fn clipped_region_has_zero_gradient() {
        let out = weighted_bce(&map(2, 1, vec![0.0, 1.0]), &map(2, 1, vec![1.0, 0.0]), TargetMode::Soft).unwrap();
        assert_eq!(out.grad, vec![0.0, 0.0]);
        assert!(out.loss > 0.0);
    }

    #[test]
    fn binarized_targets_differ_from_soft() {
        let gt = map(2, 1, vec![0.8, 0.2]);
        let p = map(2, 1, vec![0.6, 0.3]);
        let s = weighted_bce(&p, &gt, TargetMode::Soft).unwrap().loss;
        let b = weighted_bce(&p, &gt, TargetMode::Binarized).unwrap().loss;
        let expected_b = 2.0 * -(0.6f64).ln() + 2.0 * -(0.7f64).ln();
        assert!((b - expected_b).abs() < 1e-12);
        assert!((s - b).abs() > 1e-3);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(weighted_bce(&map(2, 1, vec![0.5; 2]), &map(1, 2, vec![0.5; 2]), TargetMode::Soft).is_err());
    }
}
