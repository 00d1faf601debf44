use super::{Element, Result, Tensor, TensorError};

pub fn relu<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Passes the gradient where the forward input was strictly positive.
pub fn relu_backward<T: Element>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(input, grad_out, "relu grad_out vs input")?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

/// [`relu_backward`] applied to `grad` in place.
pub(crate) fn relu_backward_in_place<T: Element>(input: &Tensor<T>, grad: &mut Tensor<T>) -> Result<()> {
    same_shape(input, grad, "relu grad_out vs input")?;
    for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
        if !(x > T::zero()) {
            *g = T::zero();
        }
    }
    Ok(())
}

pub fn sigmoid<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| {
        if x >= T::zero() {
            T::one() / (T::one() + (-x).exp())
        } else {
            let e = x.exp();
            e / (T::one() + e)
        }
    })
}

/// Backward through the sigmoid given its forward *output*.
pub fn sigmoid_backward<T: Element>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(output, grad_out, "sigmoid grad_out vs output")?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::new(output.shape(), data)
}

/// (N, C, H, W) -> (N, C*H*W) without moving any element.
pub fn flatten<T: Element>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let n = input.shape()[0];
    let rest = input.len() / n;
    input.clone().reshape(&[n, rest])
}

/// Inverse of [`flatten`].
pub fn unflatten<T: Element>(input: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    input.clone().reshape(shape)
}

fn same_shape<T: Element>(a: &Tensor<T>, b: &Tensor<T>, context: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            context,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_sigmoid_points() {
        let t = Tensor::new(&[3], vec![-1.0f64, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&t, &Tensor::full(&[3], 1.0).unwrap()).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
        let s = sigmoid(&Tensor::new(&[1], vec![0.0f64]).unwrap());
        assert_eq!(s.data(), &[0.5]);
        // No overflow at the extremes.
        let s = sigmoid(&Tensor::new(&[2], vec![-1000.0f32, 1000.0]).unwrap());
        assert_eq!(s.data(), &[0.0, 1.0]);
    }

    #[test]
    fn flatten_width() {
        let t = Tensor::<f32>::zeros(&[1, 128, 9, 9]).unwrap();
        assert_eq!(flatten(&t).unwrap().shape(), &[1, 10368]);
    }
}
