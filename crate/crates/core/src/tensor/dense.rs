use super::{Element, Result, Tensor, TensorError};

/// Fully connected layer: `weights` is F x K, `bias` is K.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T: Element> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Element> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [_, k] = *weights.shape() else {
            return Err(TensorError::InvalidShape {
                shape: weights.shape().to_vec(),
                reason: "dense weights must be 2-D (F x K)",
            });
        };
        if bias.shape() != [k] {
            return Err(TensorError::ShapeMismatch {
                context: "dense bias vs weight columns",
                left: bias.shape().to_vec(),
                right: weights.shape().to_vec(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T: Element> {
    pub grad_input: Tensor<T>,
    pub grad_weights: Tensor<T>,
    pub grad_bias: Tensor<T>,
}

fn rows<T: Element>(input: &Tensor<T>, params: &DenseParams<T>) -> Result<usize> {
    match *input.shape() {
        [n, f] if f == params.in_features() => Ok(n),
        _ => Err(TensorError::ShapeMismatch {
            context: "dense input features vs weight rows",
            left: input.shape().to_vec(),
            right: params.weights.shape().to_vec(),
        }),
    }
}

/// `input * weights + bias`, one row at a time so a row's result never depends
/// on which batch it travels in.
pub fn dense_forward<T: Element>(input: &Tensor<T>, params: &DenseParams<T>) -> Result<Tensor<T>> {
    let n = rows(input, params)?;
    let (f, k) = (params.in_features(), params.out_features());
    let w = params.weights.data();
    let mut out = Vec::with_capacity(n * k);
    for row in input.data().chunks(f) {
        for j in 0..k {
            let mut acc = params.bias.data()[j];
            for (i, &x) in row.iter().enumerate() {
                acc = acc + x * w[i * k + j];
            }
            out.push(acc);
        }
    }
    Tensor::new(&[n, k], out)
}

pub fn dense_backward<T: Element>(
    input: &Tensor<T>,
    params: &DenseParams<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let n = rows(input, params)?;
    let (f, k) = (params.in_features(), params.out_features());
    if grad_out.shape() != [n, k] {
        return Err(TensorError::ShapeMismatch {
            context: "dense grad_out vs forward output",
            left: grad_out.shape().to_vec(),
            right: vec![n, k],
        });
    }
    let w = params.weights.data();
    let x = input.data();
    let g = grad_out.data();
    let mut gi = vec![T::zero(); n * f];
    let mut gw = vec![T::zero(); f * k];
    let mut gb = vec![T::zero(); k];
    for r in 0..n {
        let grow = &g[r * k..(r + 1) * k];
        let xrow = &x[r * f..(r + 1) * f];
        for (j, &gj) in grow.iter().enumerate() {
            gb[j] = gb[j] + gj;
        }
        for i in 0..f {
            let mut acc = T::zero();
            for j in 0..k {
                acc = acc + grow[j] * w[i * k + j];
                gw[i * k + j] = gw[i * k + j] + xrow[i] * grow[j];
            }
            gi[r * f + i] = acc;
        }
    }
    Ok(DenseGrads {
        grad_input: Tensor::new(&[n, f], gi)?,
        grad_weights: Tensor::new(&[f, k], gw)?,
        grad_bias: Tensor::new(&[k], gb)?,
    })
}
