use super::OptimError;
use crate::tensor::{Element, Tensor};

/// Adam hyperparameters plus one (m, v) accumulator pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Element> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Element> AdamState<T> {
    /// Zeroed moments shaped like `params`, with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(learning_rate: f64, params: &[Tensor<T>]) -> Self {
        let zeros = |p: &Tensor<T>| Tensor::zeros(p.shape()).expect("parameter shapes are valid");
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    fn check(&self, params: &[Tensor<T>], grads: &[Tensor<T>]) -> Result<(), OptimError> {
        if !(self.learning_rate > 0.0) {
            return Err(OptimError::InvalidConfig("learning rate must be positive"));
        }
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(OptimError::InvalidConfig("betas must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(OptimError::InvalidConfig("epsilon must be positive"));
        }
        if params.len() != grads.len() || params.len() != self.m.len() || params.len() != self.v.len() {
            return Err(OptimError::Misaligned {
                index: params.len().min(grads.len()).min(self.m.len()),
                detail: format!(
                    "{} params, {} grads, {} moment pairs",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            for (what, other) in [("grad", g), ("m", &self.m[i]), ("v", &self.v[i])] {
                if other.shape() != p.shape() {
                    return Err(OptimError::Misaligned {
                        index: i,
                        detail: format!("param {:?} vs {what} {:?}", p.shape(), other.shape()),
                    });
                }
            }
            if let Some(e) = g.data().iter().position(|x| !x.is_finite()) {
                return Err(OptimError::NonFiniteGradient { index: i, element: e });
            }
        }
        Ok(())
    }
}

/// In-place Adam update with bias correction. Validation happens before any
/// tensor is touched, so an error leaves `params` and `state` unchanged.
pub fn adam_update<T: Element>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
) -> Result<(), OptimError> {
    state.check(params, grads)?;
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.learning_rate, state.epsilon);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            let gf = gv.as_f64();
            let m_new = b1 * mv.as_f64() + (1.0 - b1) * gf;
            let v_new = b2 * vv.as_f64() + (1.0 - b2) * gf * gf;
            *mv = T::from_f64(m_new);
            *vv = T::from_f64(v_new);
            let m_hat = m_new / c1;
            let v_hat = v_new / c2;
            *pv = T::from_f64(pv.as_f64() - lr * m_hat / (v_hat.sqrt() + eps));
        }
    }
    Ok(())
}

/// Functional form of [`adam_update`]: returns new parameters and state.
pub fn adam_step<T: Element>(
    params: &[Tensor<T>],
    grads: &[Tensor<T>],
    state: &AdamState<T>,
) -> Result<(Vec<Tensor<T>>, AdamState<T>), OptimError> {
    let mut params = params.to_vec();
    let mut state = state.clone();
    adam_update(&mut params, grads, &mut state)?;
    Ok((params, state))
}
