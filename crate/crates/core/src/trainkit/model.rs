//! The five-block CNN: Conv(3x3, same) -> ReLU -> [BN] -> MaxPool(2x2), five
//! times with 18, 18, 32, 64 and 128 filters and batch norm on the last
//! three blocks, then Flatten -> Dense(1) -> Sigmoid.

use super::{Result, TrainError};
use crate::rng::SplitMix64;
use crate::tensor::{
    batchnorm2d, batchnorm2d_backward, conv2d_backward_with, conv2d_forward, dense_backward, dense_forward, flatten,
    maxpool2d, maxpool2d_backward, maxpool2d_relu_backward, relu_backward_in_place, sigmoid, sigmoid_backward, BatchNormCache, BatchNormState,
    ConvParams, DenseParams, Element, Mode, PoolIndices, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockDef {
    pub filters: usize,
    pub batch_norm: bool,
}

/// Fixed architecture description; serialised into checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDef {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub blocks: Vec<BlockDef>,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

pub const PROPOSED_FILTERS: [usize; 5] = [18, 18, 32, 64, 128];

impl ModelDef {
    /// The proposed network on 3x300x300 inputs.
    pub fn proposed() -> Self {
        Self {
            input_channels: 3,
            input_height: 300,
            input_width: 300,
            blocks: PROPOSED_FILTERS
                .iter()
                .enumerate()
                .map(|(i, &filters)| BlockDef { filters, batch_norm: i >= 2 })
                .collect(),
            bn_epsilon: crate::tensor::DEFAULT_EPSILON,
            bn_momentum: crate::tensor::DEFAULT_MOMENTUM,
        }
    }

    /// Same layer pattern on a different input size.
    pub fn with_input(mut self, height: usize, width: usize) -> Self {
        self.input_height = height;
        self.input_width = width;
        self
    }

    /// Replaces the filter counts, keeping batch norm from the third block on.
    pub fn with_blocks(mut self, filters: &[usize]) -> Self {
        self.blocks = filters
            .iter()
            .enumerate()
            .map(|(i, &filters)| BlockDef { filters, batch_norm: i >= 2 })
            .collect();
        self
    }

    /// (H, W) after each pooling stage.
    pub fn spatial_trace(&self) -> Vec<(usize, usize)> {
        let (mut h, mut w) = (self.input_height, self.input_width);
        self.blocks
            .iter()
            .map(|_| {
                h /= 2;
                w /= 2;
                (h, w)
            })
            .collect()
    }

    pub fn flatten_width(&self) -> usize {
        let (h, w) = self.spatial_trace().last().copied().unwrap_or((self.input_height, self.input_width));
        let c = self.blocks.last().map_or(self.input_channels, |b| b.filters);
        c * h * w
    }

    pub fn input_shape(&self, batch: usize) -> [usize; 4] {
        [batch, self.input_channels, self.input_height, self.input_width]
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.input_channels == 0 {
            return Err(TrainError::InvalidModel("model needs input channels and at least one block".into()));
        }
        if self.blocks.iter().any(|b| b.filters == 0) {
            return Err(TrainError::InvalidModel("every block needs at least one filter".into()));
        }
        let (mut h, mut w) = (self.input_height, self.input_width);
        for (i, _) in self.blocks.iter().enumerate() {
            if h < 2 || w < 2 {
                return Err(TrainError::InvalidModel(format!(
                    "input {}x{} shrinks below 2x2 before pool {}",
                    self.input_height,
                    self.input_width,
                    i + 1
                )));
            }
            h /= 2;
            w /= 2;
        }
        if !(self.bn_epsilon > 0.0) || !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return Err(TrainError::InvalidModel("batch-norm constants out of range".into()));
        }
        Ok(())
    }

    /// Learnable scalar count implied by the architecture.
    pub fn parameter_count(&self) -> usize {
        let mut c_in = self.input_channels;
        let mut total = 0;
        for b in &self.blocks {
            total += b.filters * c_in * 9 + b.filters;
            if b.batch_norm {
                total += 2 * b.filters;
            }
            c_in = b.filters;
        }
        total + self.flatten_width() + 1
    }
}

/// Learnable parameters plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Element> {
    pub convs: Vec<ConvParams<T>>,
    pub norms: Vec<Option<BatchNormState<T>>>,
    pub dense: DenseParams<T>,
}

impl<T: Element> ModelParams<T> {
    /// Learnable tensors in a fixed order: per block kernels, bias, [gamma,
    /// beta]; then dense weights and bias.
    pub fn learnable(&self) -> Vec<Tensor<T>> {
        let mut out = Vec::new();
        for (conv, norm) in self.convs.iter().zip(&self.norms) {
            out.push(conv.kernels.clone());
            out.push(conv.bias.clone());
            if let Some(bn) = norm {
                out.push(bn.gamma.clone());
                out.push(bn.beta.clone());
            }
        }
        out.push(self.dense.weights.clone());
        out.push(self.dense.bias.clone());
        out
    }

    /// Inverse of [`ModelParams::learnable`].
    pub fn set_learnable(&mut self, tensors: Vec<Tensor<T>>) -> Result<()> {
        let expected = self.learnable();
        if tensors.len() != expected.len()
            || tensors.iter().zip(&expected).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(TrainError::InvalidModel("learnable tensor list does not match the model".into()));
        }
        let mut it = tensors.into_iter();
        for (conv, norm) in self.convs.iter_mut().zip(&mut self.norms) {
            conv.kernels = it.next().expect("checked length");
            conv.bias = it.next().expect("checked length");
            if let Some(bn) = norm {
                bn.gamma = it.next().expect("checked length");
                bn.beta = it.next().expect("checked length");
            }
        }
        self.dense.weights = it.next().expect("checked length");
        self.dense.bias = it.next().expect("checked length");
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.learnable().iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Element>(&self) -> ModelParams<U> {
        ModelParams {
            convs: self
                .convs
                .iter()
                .map(|c| ConvParams { kernels: c.kernels.cast(), bias: c.bias.cast() })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| {
                    n.as_ref().map(|bn| BatchNormState {
                        gamma: bn.gamma.cast(),
                        beta: bn.beta.cast(),
                        running_mean: bn.running_mean.cast(),
                        running_var: bn.running_var.cast(),
                        epsilon: bn.epsilon,
                        momentum: bn.momentum,
                        mode: bn.mode,
                    })
                })
                .collect(),
            dense: DenseParams { weights: self.dense.weights.cast(), bias: self.dense.bias.cast() },
        }
    }
}

fn he_uniform<T: Element>(shape: &[usize], fan_in: usize, rng: &mut SplitMix64) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64(rng.uniform(-bound, bound))).expect("valid shape")
}

/// He-uniform weights (bound sqrt(6 / fan_in)) drawn layer by layer in
/// row-major order; zero biases; batch norm at gamma 1, beta 0, stats (0, 1).
pub fn build_model<T: Element>(def: &ModelDef, seed: u64) -> Result<ModelParams<T>> {
    def.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut convs = Vec::new();
    let mut norms = Vec::new();
    let mut c_in = def.input_channels;
    for b in &def.blocks {
        let kernels = he_uniform(&[b.filters, c_in, 3, 3], c_in * 9, &mut rng);
        convs.push(ConvParams::new(kernels, Tensor::zeros(&[b.filters])?)?);
        norms.push(if b.batch_norm {
            let mut bn = BatchNormState::new(b.filters)?;
            bn.epsilon = def.bn_epsilon;
            bn.momentum = def.bn_momentum;
            Some(bn)
        } else {
            None
        });
        c_in = b.filters;
    }
    let f = def.flatten_width();
    let dense = DenseParams::new(he_uniform(&[f, 1], f, &mut rng), Tensor::zeros(&[1])?)?;
    Ok(ModelParams { convs, norms, dense })
}

struct BlockCache<T: Element> {
    input: Tensor<T>,
    activated: Tensor<T>,
    norm: Option<BatchNormCache<T>>,
    pool: PoolIndices,
}

/// Result of a forward pass; holds what backward needs when caching was requested.
pub struct ForwardPass<T: Element> {
    pub probabilities: Tensor<T>,
    /// (H, W) after each pooling stage.
    pub trace: Vec<(usize, usize)>,
    /// Batch-norm states after this pass (running stats advanced in training mode).
    pub norms: Vec<Option<BatchNormState<T>>>,
    /// Per-block (batch mean, batch variance) in training mode.
    pub batch_stats: Vec<Option<(Vec<f64>, Vec<f64>)>>,
    blocks: Vec<BlockCache<T>>,
    flat: Option<Tensor<T>>,
}

fn check_input<T: Element>(def_shape: [usize; 4], batch: &Tensor<T>) -> Result<()> {
    let ok = batch.rank() == 4 && batch.shape()[1..] == def_shape[1..];
    if !ok {
        return Err(TrainError::InputShape {
            expected: def_shape[1..].to_vec(),
            actual: batch.shape().to_vec(),
        });
    }
    Ok(())
}

fn relu_owned<T: Element>(t: Tensor<T>) -> Tensor<T> {
    let mut t = t;
    for v in t.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
    t
}

/// Runs the network. `keep_cache` retains activations for [`backward`].
pub fn forward_pass<T: Element>(
    def: &ModelDef,
    params: &ModelParams<T>,
    batch: &Tensor<T>,
    mode: Mode,
    keep_cache: bool,
) -> Result<ForwardPass<T>> {
    check_input(def.input_shape(1), batch)?;
    let mut x: Option<Tensor<T>> = None;
    let mut blocks = Vec::new();
    let mut trace = Vec::new();
    let mut norms = Vec::new();
    let mut batch_stats = Vec::new();
    for (conv, norm) in params.convs.iter().zip(&params.norms) {
        let activated = relu_owned(conv2d_forward(x.as_ref().unwrap_or(batch), conv)?);
        let (normed, bn_cache) = match norm {
            Some(state) => {
                let state = state.clone().with_mode(mode);
                let (y, next, cache) = batchnorm2d(&activated, &state)?;
                norms.push(Some(next.with_mode(Mode::Training)));
                batch_stats.push((mode == Mode::Training).then(|| (cache.batch_mean().to_vec(), cache.batch_var().to_vec())));
                (Some(y), Some(cache))
            }
            None => {
                norms.push(None);
                batch_stats.push(None);
                (None, None)
            }
        };
        let (pooled, indices) = maxpool2d(normed.as_ref().unwrap_or(&activated))?;
        let (_, _, h, w) = pooled.dims4()?;
        trace.push((h, w));
        let input = x.replace(pooled);
        if keep_cache {
            let input = input.unwrap_or_else(|| batch.clone());
            blocks.push(BlockCache { input, activated, norm: bn_cache, pool: indices });
        }
    }
    let flat = flatten(x.as_ref().expect("at least one block"))?;
    let logits = dense_forward(&flat, &params.dense)?;
    let probabilities = sigmoid(&logits);
    Ok(ForwardPass {
        probabilities,
        trace,
        norms,
        batch_stats,
        blocks,
        flat: keep_cache.then_some(flat),
    })
}

/// Probabilities (N x 1) for a batch.
pub fn forward<T: Element>(def: &ModelDef, params: &ModelParams<T>, batch: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
    Ok(forward_pass(def, params, batch, mode, false)?.probabilities)
}

/// Gradients of the loss w.r.t. every learnable tensor, in
/// [`ModelParams::learnable`] order, given dLoss/dProbabilities.
pub fn backward<T: Element>(
    params: &ModelParams<T>,
    pass: &ForwardPass<T>,
    grad_probs: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let flat = pass
        .flat
        .as_ref()
        .ok_or_else(|| TrainError::InvalidModel("forward pass was run without a cache".into()))?;
    let grad_logits = sigmoid_backward(&pass.probabilities, grad_probs)?;
    let dense = dense_backward(flat, &params.dense, &grad_logits)?;
    let last = pass.blocks.last().expect("at least one block");
    let mut grad = dense.grad_input.reshape(last.pool.output_shape())?;

    let mut per_block: Vec<Vec<Tensor<T>>> = Vec::with_capacity(pass.blocks.len());
    for (i, (cache, (conv, norm))) in pass.blocks.iter().zip(params.convs.iter().zip(&params.norms)).enumerate().rev() {
        let mut bn_grads = Vec::new();
        let g = if let (Some(bn_cache), Some(state)) = (&cache.norm, norm) {
            let pooled = maxpool2d_backward(&cache.pool, &grad)?;
            let bg = batchnorm2d_backward(bn_cache, state, &pooled)?;
            let mut g = bg.grad_input;
            relu_backward_in_place(&cache.activated, &mut g)?;
            bn_grads = vec![bg.grad_gamma, bg.grad_beta];
            g
        } else {
            maxpool2d_relu_backward(&cache.pool, &grad, &cache.activated)?
        };
        let (gin, gk, gb) = conv2d_backward_with(&cache.input, conv, &g, i > 0)?;
        let mut block = vec![gk, gb];
        block.extend(bn_grads);
        per_block.push(block);
        if let Some(gin) = gin {
            grad = gin;
        }
    }
    let mut out: Vec<Tensor<T>> = per_block.into_iter().rev().flatten().collect();
    out.push(dense.grad_weights);
    out.push(dense.grad_bias);
    Ok(out)
}
