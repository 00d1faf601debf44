use rayon::prelude::*;

use super::{Element, Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalise with batch statistics and update the running averages.
    Training,
    /// Normalise with the running averages only.
    Inference,
}

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Per-channel batch-normalisation parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T: Element> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: f64,
    pub momentum: f64,
    pub mode: Mode,
}

impl<T: Element> BatchNormState<T> {
    /// gamma = 1, beta = 0, running statistics (0, 1), default constants.
    pub fn new(channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: Tensor::full(&[channels], T::one())?,
            beta: Tensor::zeros(&[channels])?,
            running_mean: Tensor::zeros(&[channels])?,
            running_var: Tensor::full(&[channels], T::one())?,
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
            mode: Mode::Training,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        for t in [&self.beta, &self.running_mean, &self.running_var] {
            if t.shape() != [c] {
                return Err(TensorError::ShapeMismatch {
                    context: "batch-norm parameter lengths",
                    left: t.shape().to_vec(),
                    right: vec![c],
                });
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(TensorError::Unsupported("batch-norm epsilon must be positive"));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return Err(TensorError::Unsupported("batch-norm momentum must lie in (0, 1)"));
        }
        if self.running_var.data().iter().any(|v| !(*v >= T::zero())) {
            return Err(TensorError::Unsupported("batch-norm running variance must be non-negative"));
        }
        Ok(())
    }
}

/// Values the backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T: Element> {
    mode: Mode,
    shape: Vec<usize>,
    xhat: Vec<T>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

impl<T: Element> BatchNormCache<T> {
    /// Per-channel batch means (training mode only; empty otherwise).
    pub fn batch_mean(&self) -> &[f64] {
        &self.batch_mean
    }

    /// Per-channel biased batch variances (training mode only; empty otherwise).
    pub fn batch_var(&self) -> &[f64] {
        &self.batch_var
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads<T: Element> {
    pub grad_input: Tensor<T>,
    pub grad_gamma: Tensor<T>,
    pub grad_beta: Tensor<T>,
}

/// Folds `f` over every (n, h, w) flat index of channel `ch`, in memory order.
fn channel_fold(n: usize, c: usize, hw: usize, ch: usize, f: impl Fn(f64, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for b in 0..n {
        let base = (b * c + ch) * hw;
        for i in base..base + hw {
            acc = f(acc, i);
        }
    }
    acc
}

/// Batch normalisation over (N, H, W) per channel. Returns the output, the
/// state with updated running statistics (unchanged in inference mode) and
/// the cache for [`batchnorm2d_backward`].
pub fn batchnorm2d<T: Element>(
    input: &Tensor<T>,
    state: &BatchNormState<T>,
) -> Result<(Tensor<T>, BatchNormState<T>, BatchNormCache<T>)> {
    state.validate()?;
    let (n, c, h, w) = input.dims4()?;
    if c != state.channels() {
        return Err(TensorError::ShapeMismatch {
            context: "batch-norm input channels vs parameters",
            left: input.shape().to_vec(),
            right: state.gamma.shape().to_vec(),
        });
    }
    let hw = h * w;
    let count = n * hw;
    let x = input.data();
    let mut next = state.clone();
    let (mean, var) = match state.mode {
        Mode::Training => {
            if count < 2 {
                return Err(TensorError::InvalidShape {
                    shape: input.shape().to_vec(),
                    reason: "training-mode batch norm needs N*H*W >= 2 per channel",
                });
            }
            let stats: Vec<(f64, f64)> = (0..c)
                .into_par_iter()
                .map(|ch| {
                    let sum = channel_fold(n, c, hw, ch, |a, i| a + x[i].as_f64());
                    let mean = sum / count as f64;
                    let sq = channel_fold(n, c, hw, ch, |a, i| {
                        let d = x[i].as_f64() - mean;
                        a + d * d
                    });
                    (mean, sq / count as f64)
                })
                .collect();
            let m = state.momentum;
            for (ch, &(mu, v)) in stats.iter().enumerate() {
                let rm = &mut next.running_mean.data_mut()[ch];
                *rm = T::from_f64((1.0 - m) * rm.as_f64() + m * mu);
                let rv = &mut next.running_var.data_mut()[ch];
                *rv = T::from_f64((1.0 - m) * rv.as_f64() + m * v);
            }
            stats.into_iter().unzip()
        }
        Mode::Inference => (
            state.running_mean.data().iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            state.running_var.data().iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        ),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.epsilon).sqrt()).collect();
    let gamma = state.gamma.data();
    let beta = state.beta.data();
    let mut xhat = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    out.par_chunks_mut(hw)
        .zip(xhat.par_chunks_mut(hw))
        .zip(x.par_chunks(hw))
        .enumerate()
        .for_each(|(plane, ((dst, xh), src))| {
            let ch = plane % c;
            let (mu, is) = (mean[ch], inv_std[ch]);
            let (g, b) = (gamma[ch].as_f64(), beta[ch].as_f64());
            for ((d, xh), &s) in dst.iter_mut().zip(xh.iter_mut()).zip(src) {
                let norm = (s.as_f64() - mu) * is;
                *xh = T::from_f64(norm);
                *d = T::from_f64(g * norm + b);
            }
        });
    let (batch_mean, batch_var) = match state.mode {
        Mode::Training => (mean, var),
        Mode::Inference => (Vec::new(), Vec::new()),
    };
    let cache = BatchNormCache {
        mode: state.mode,
        shape: input.shape().to_vec(),
        xhat,
        inv_std,
        batch_mean,
        batch_var,
    };
    Ok((Tensor::new(input.shape(), out)?, next, cache))
}

/// Exact gradients of [`batchnorm2d`] w.r.t. input, gamma and beta.
pub fn batchnorm2d_backward<T: Element>(
    cache: &BatchNormCache<T>,
    state: &BatchNormState<T>,
    grad_out: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    if grad_out.shape() != cache.shape.as_slice() {
        return Err(TensorError::ShapeMismatch {
            context: "batch-norm grad_out vs forward output",
            left: grad_out.shape().to_vec(),
            right: cache.shape.clone(),
        });
    }
    let (n, c, h, w) = grad_out.dims4()?;
    if c != state.channels() {
        return Err(TensorError::ShapeMismatch {
            context: "batch-norm grad_out channels vs parameters",
            left: grad_out.shape().to_vec(),
            right: state.gamma.shape().to_vec(),
        });
    }
    let hw = h * w;
    let count = (n * hw) as f64;
    let g = grad_out.data();
    let xhat = &cache.xhat;
    let sums: Vec<(f64, f64)> = (0..c)
        .into_par_iter()
        .map(|ch| {
            let sg = channel_fold(n, c, hw, ch, |a, i| a + g[i].as_f64());
            let sgx = channel_fold(n, c, hw, ch, |a, i| a + g[i].as_f64() * xhat[i].as_f64());
            (sg, sgx)
        })
        .collect();
    let gamma = state.gamma.data();
    let mut grad_in = vec![T::zero(); g.len()];
    grad_in
        .par_chunks_mut(hw)
        .zip(g.par_chunks(hw))
        .zip(xhat.par_chunks(hw))
        .enumerate()
        .for_each(|(plane, ((dst, gs), xs))| {
            let ch = plane % c;
            let scale = gamma[ch].as_f64() * cache.inv_std[ch];
            let (sg, sgx) = sums[ch];
            for ((d, &gv), &xv) in dst.iter_mut().zip(gs).zip(xs) {
                let v = match cache.mode {
                    Mode::Training => scale / count * (count * gv.as_f64() - sg - xv.as_f64() * sgx),
                    Mode::Inference => scale * gv.as_f64(),
                };
                *d = T::from_f64(v);
            }
        });
    Ok(BatchNormGrads {
        grad_input: Tensor::new(&cache.shape, grad_in)?,
        grad_gamma: Tensor::new(&[c], sums.iter().map(|s| T::from_f64(s.1)).collect())?,
        grad_beta: Tensor::new(&[c], sums.iter().map(|s| T::from_f64(s.0)).collect())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channel_normalises_to_zero() {
        let input = Tensor::full(&[2, 1, 3, 3], 2.5f64).unwrap();
        let state = BatchNormState::new(1).unwrap();
        let (out, _, _) = batchnorm2d(&input, &state).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));

        let input = Tensor::full(&[3, 1, 5, 5], 0.1f64).unwrap();
        let (out, _, _) = batchnorm2d(&input, &state).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_gamma_yields_beta() {
        let input = Tensor::from_fn(&[2, 2, 3, 3], |i| (i as f64).sin() * 4.0).unwrap();
        let mut state = BatchNormState::new(2).unwrap();
        state.gamma = Tensor::zeros(&[2]).unwrap();
        state.beta = Tensor::new(&[2], vec![0.5, -1.25]).unwrap();
        for mode in [Mode::Training, Mode::Inference] {
            let (out, _, _) = batchnorm2d(&input, &state.clone().with_mode(mode)).unwrap();
            for (i, &v) in out.data().iter().enumerate() {
                let ch = (i / 9) % 2;
                assert_eq!(v, [0.5, -1.25][ch]);
            }
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let input = Tensor::new(&[1, 1, 1, 4], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let state = BatchNormState::new(1).unwrap();
        let (_, next, cache) = batchnorm2d(&input, &state).unwrap();
        assert_eq!(cache.batch_mean(), &[2.5]);
        assert_eq!(cache.batch_var(), &[1.25]);
        assert!((next.running_mean.data()[0] - 0.25).abs() < 1e-15);
        assert!((next.running_var.data()[0] - (0.9 + 0.125)).abs() < 1e-15);
        // The input state is untouched.
        assert_eq!(state.running_mean.data(), &[0.0]);
    }

    #[test]
    fn inference_leaves_state_alone() {
        let input = Tensor::from_fn(&[2, 1, 2, 2], |i| i as f32).unwrap();
        let state = BatchNormState::new(1).unwrap().with_mode(Mode::Inference);
        let (out, next, _) = batchnorm2d(&input, &state).unwrap();
        assert_eq!(next, state);
        let expect = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((out.data()[1] as f64 - expect).abs() < 1e-6);
    }

    #[test]
    fn single_element_training_batch_is_rejected() {
        let input = Tensor::full(&[1, 3, 1, 1], 1.0f32).unwrap();
        let state = BatchNormState::new(3).unwrap();
        assert!(batchnorm2d(&input, &state).is_err());
        assert!(batchnorm2d(&input, &state.with_mode(Mode::Inference)).is_ok());
    }

    #[test]
    fn invalid_state_is_rejected() {
        let mut state = BatchNormState::<f64>::new(2).unwrap();
        state.epsilon = 0.0;
        let input = Tensor::zeros(&[2, 2, 2, 2]).unwrap();
        assert!(batchnorm2d(&input, &state).is_err());
        let mut state = BatchNormState::<f64>::new(2).unwrap();
        state.running_var = Tensor::new(&[2], vec![1.0, -0.5]).unwrap();
        assert!(batchnorm2d(&input, &state).is_err());
    }
}
