//! Small convolutional stacks for mechanism checks: conv + ReLU hidden layers
//! and a two-channel sigmoid head predicting edge and corner maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{AdamConfig, AdamState};
use super::conv::{conv_equi, conv_equi_backward, conv_standard, conv_standard_backward, ConvGrads, ConvLayer, Padding};
use super::loss::{weighted_bce_slices, TargetMode};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::kernel_offsets::{KernelSpec, OffsetField};
use crate::maps::{MapPair, ProbabilityMap};
use crate::sphere::ImageGeometry;

pub fn relu(x: &Tensor) -> Tensor {
    Tensor::from_parts_unchecked(x.shape().to_vec(), x.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Gradient through ReLU given the pre-activation input.
pub fn relu_backward(pre: &Tensor, grad: &Tensor) -> Tensor {
    let data = pre
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_parts_unchecked(pre.shape().to_vec(), data)
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
    Tensor::from_parts_unchecked(x.shape().to_vec(), data)
}

/// Gradient through the sigmoid given its output.
pub fn sigmoid_backward(out: &Tensor, grad: &Tensor) -> Tensor {
    let data = out
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&y, &g)| g * y * (1.0 - y))
        .collect();
    Tensor::from_parts_unchecked(out.shape().to_vec(), data)
}

/// Inverted dropout: zeroes each element with probability `rate` and scales
/// the survivors by `1 / (1 - rate)`. Returns the output and the scale mask.
pub fn dropout<R: Rng>(x: &Tensor, rate: f64, rng: &mut R) -> (Tensor, Vec<f64>) {
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
    (Tensor::from_parts_unchecked(x.shape().to_vec(), data), mask)
}

/// Nearest-neighbor upsampling of a `[C, H, W]` tensor by an integer factor.
pub fn upsample_nearest(x: &Tensor, factor: usize) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    Ok(Tensor::from_fn3(c, h * factor, w * factor, |ci, y, xx| x.at3(ci, y / factor, xx / factor)))
}

pub fn upsample_nearest_backward(grad: &Tensor, factor: usize) -> Result<Tensor> {
    let (c, h, w) = grad.dims3()?;
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::ShapeMismatch(format!("{h}x{w} is not divisible by {factor}")));
    }
    let mut out = Tensor::zeros(&[c, h / factor, w / factor]);
    for ci in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let v = out.at3(ci, y / factor, xx / factor) + grad.at3(ci, y, xx);
                out.set3(ci, y / factor, xx / factor, v);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Standard,
    Equirect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    /// Channel counts from input to output, e.g. `[3, 8, 8, 2]` for three layers.
    pub channels: Vec<usize>,
    pub resolution: usize,
    pub mode: ConvMode,
    /// Dropout rate applied to hidden activations during training.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            channels: vec![3, 8, 8, 2],
            resolution: 3,
            mode: ConvMode::Equirect,
            dropout: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum LayerOp {
    Standard,
    Equirect(OffsetField),
}

#[derive(Debug, Clone)]
pub struct NetLayer {
    pub conv: ConvLayer,
    op: LayerOp,
}

impl NetLayer {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match &self.op {
            LayerOp::Standard => conv_standard(x, &self.conv, Padding::Same),
            LayerOp::Equirect(f) => conv_equi(x, &self.conv, f),
        }
    }

    fn backward(&self, x: &Tensor, grad: &Tensor) -> Result<ConvGrads> {
        match &self.op {
            LayerOp::Standard => conv_standard_backward(x, &self.conv, Padding::Same, grad),
            LayerOp::Equirect(f) => conv_equi_backward(x, &self.conv, f, grad),
        }
    }
}

/// Stride-1 conv stack: ReLU after every hidden layer, sigmoid at the head.
/// Output channel 0 is the edge map, channel 1 the corner map.
#[derive(Debug, Clone)]
pub struct MicroNet {
    pub layers: Vec<NetLayer>,
    pub dropout: f64,
}

struct ForwardCache {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
    masks: Vec<Option<Vec<f64>>>,
    output: Tensor,
}

impl MicroNet {
    pub fn new(config: &NetConfig, geom: ImageGeometry) -> Result<Self> {
        if config.channels.len() < 2 || *config.channels.last().unwrap() != 2 {
            return Err(Error::ShapeMismatch(
                "channel list needs at least input and a 2-channel output".into(),
            ));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::ShapeMismatch(format!("dropout rate {} not in [0, 1)", config.dropout)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let spec = KernelSpec::matching_standard(config.resolution, &geom)?;
        let field = match config.mode {
            ConvMode::Equirect => Some(OffsetField::new(geom, spec)),
            ConvMode::Standard => None,
        };
        let layers = config
            .channels
            .windows(2)
            .map(|io| NetLayer {
                conv: ConvLayer::init_uniform(io[1], io[0], config.resolution, 1, &mut rng),
                op: match &field {
                    Some(f) => LayerOp::Equirect(f.clone()),
                    None => LayerOp::Standard,
                },
            })
            .collect();
        Ok(Self {
            layers,
            dropout: config.dropout,
        })
    }

    fn forward_cached(&self, x: &Tensor, mut rng: Option<&mut ChaCha8Rng>) -> Result<ForwardCache> {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&cur)?;
            inputs.push(cur);
            if i + 1 == n {
                cur = sigmoid(&z);
                masks.push(None);
            } else {
                let a = relu(&z);
                match rng.as_deref_mut() {
                    Some(r) if self.dropout > 0.0 => {
                        let (d, m) = dropout(&a, self.dropout, r);
                        cur = d;
                        masks.push(Some(m));
                    }
                    _ => {
                        cur = a;
                        masks.push(None);
                    }
                }
            }
            pre.push(z);
        }
        Ok(ForwardCache {
            inputs,
            pre,
            masks,
            output: cur,
        })
    }

    /// Sigmoid output `[2, H, W]` without dropout.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_cached(x, None)?.output)
    }

    pub fn predict(&self, x: &Tensor) -> Result<MapPair> {
        let out = self.forward(x)?;
        Ok(MapPair {
            edge: ProbabilityMap::from_tensor_channel(&out, 0)?,
            corner: ProbabilityMap::from_tensor_channel(&out, 1)?,
        })
    }

    /// Back-propagates `dL/d(output)` and returns per-layer gradients.
    fn backward(&self, cache: &ForwardCache, grad_out: &Tensor) -> Result<Vec<ConvGrads>> {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut g = sigmoid_backward(&cache.output, grad_out);
        for i in (0..n).rev() {
            let cg = self.layers[i].backward(&cache.inputs[i], &g)?;
            if i > 0 {
                let mut gin = cg.input.clone();
                if let Some(mask) = &cache.masks[i - 1] {
                    for (v, m) in gin.data_mut().iter_mut().zip(mask) {
                        *v *= m;
                    }
                }
                g = relu_backward(&cache.pre[i - 1], &gin);
            }
            grads.push(cg);
        }
        grads.reverse();
        Ok(grads)
    }

    fn param_groups(&self) -> Vec<(usize, bool)> {
        self.layers
            .iter()
            .flat_map(|l| [(l.conv.weights.len(), true), (l.conv.bias.len(), false)])
            .collect()
    }

    fn apply_update(&mut self, state: &mut AdamState, grads: &[ConvGrads]) -> Result<()> {
        let mut params: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len());
        for l in self.layers.iter_mut() {
            params.push(l.conv.weights.data_mut());
            params.push(&mut l.conv.bias);
        }
        let g: Vec<&[f64]> = grads
            .iter()
            .flat_map(|cg| [cg.weights.data(), cg.bias.as_slice()])
            .collect();
        state.step(&mut params, &g)
    }

    /// Loss of one sample and its gradient with respect to the sigmoid output.
    fn sample_loss(output: &Tensor, target: &MapPair, mode: TargetMode) -> Result<(f64, Tensor)> {
        let (_, h, w) = output.dims3()?;
        if target.edge.width != w || target.edge.height != h || !target.edge.same_shape(&target.corner) {
            return Err(Error::ShapeMismatch(format!(
                "targets are {}x{}, network output is {w}x{h}",
                target.edge.width, target.edge.height
            )));
        }
        let plane = h * w;
        let e = weighted_bce_slices(&output.data()[..plane], &target.edge.data, mode);
        let c = weighted_bce_slices(&output.data()[plane..2 * plane], &target.corner.data, mode);
        let mut grad = e.grad;
        grad.extend(c.grad);
        Ok((e.loss + c.loss, Tensor::from_parts_unchecked(vec![2, h, w], grad)))
    }

    /// Total weighted BCE of the prediction on `x` against `target`.
    pub fn loss(&self, x: &Tensor, target: &MapPair, mode: TargetMode) -> Result<f64> {
        Ok(Self::sample_loss(&self.forward(x)?, target, mode)?.0)
    }

    /// Analytic gradients of [`MicroNet::loss`] for every layer (no dropout).
    pub fn loss_gradients(&self, x: &Tensor, target: &MapPair, mode: TargetMode) -> Result<Vec<ConvGrads>> {
        let cache = self.forward_cached(x, None)?;
        let (_, g) = Self::sample_loss(&cache.output, target, mode)?;
        self.backward(&cache, &g)
    }
}

/// One training example: image `[C, H, W]` with edge/corner targets at `H x W`.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub image: Tensor,
    pub target: MapPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub target_mode: TargetMode,
    /// Seeds the dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            adam: AdamConfig::default(),
            target_mode: TargetMode::Soft,
            seed: 0,
        }
    }
}

/// Trains with one Adam step per sample and learning-rate decay per epoch.
/// Returns the mean loss of every epoch (measured before each update).
pub fn train_micro(net: &mut MicroNet, data: &[TrainSample], config: &TrainConfig) -> Result<Vec<f64>> {
    let mut state = AdamState::new(config.adam, &net.param_groups());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    if data.is_empty() {
        return Ok(history);
    }
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for sample in data {
            let cache = net.forward_cached(&sample.image, Some(&mut rng))?;
            let (loss, g) = MicroNet::sample_loss(&cache.output, &sample.target, config.target_mode)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss;
            let grads = net.backward(&cache, &g)?;
            net.apply_update(&mut state, &grads)?;
        }
        history.push(total / data.len() as f64);
        state.end_epoch();
    }
    Ok(history)
}
