use rayon::prelude::*;

use super::{Element, Result, Tensor, TensorError};

/// Argmax bookkeeping from [`maxpool2d`], consumed by [`maxpool2d_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    /// Flat index into the input for every output element.
    argmax: Vec<u32>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

/// 2x2 max pooling with stride 2. Odd trailing rows/columns are dropped and
/// ties go to the smallest flat index.
pub fn maxpool2d<T: Element>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let (n, c, h, w) = input.dims4()?;
    if h < 2 || w < 2 {
        return Err(TensorError::InvalidShape {
            shape: input.shape().to_vec(),
            reason: "max pooling needs H >= 2 and W >= 2",
        });
    }
    if input.len() > u32::MAX as usize {
        return Err(TensorError::Unsupported("tensor too large for u32 pool indices"));
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = input.data();
    let mut out = vec![T::zero(); n * c * oh * ow];
    let mut argmax = vec![0u32; out.len()];
    out.par_chunks_mut(oh * ow)
        .zip(argmax.par_chunks_mut(oh * ow))
        .enumerate()
        .for_each(|(plane, (dst, idx))| {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for off in [1, w, w + 1] {
                        let cand = base + 2 * oy * w + 2 * ox + off;
                        if src[cand] > src[best] {
                            best = cand;
                        }
                    }
                    dst[oy * ow + ox] = src[best];
                    idx[oy * ow + ox] = best as u32;
                }
            }
        });
    let output_shape = vec![n, c, oh, ow];
    Ok((
        Tensor::new(&output_shape, out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            output_shape,
            argmax,
        },
    ))
}

/// Routes each upstream gradient to the input position that won its window.
pub fn maxpool2d_backward<T: Element>(indices: &PoolIndices, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    route(indices, grad_out, None)
}

/// Pool backward fused with the backward of a preceding ReLU whose output
/// was `activated`: gradient reaching a non-positive activation is dropped.
pub(crate) fn maxpool2d_relu_backward<T: Element>(
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
    activated: &Tensor<T>,
) -> Result<Tensor<T>> {
    if activated.shape() != indices.input_shape.as_slice() {
        return Err(TensorError::ShapeMismatch {
            context: "relu activation vs pool input",
            left: activated.shape().to_vec(),
            right: indices.input_shape.clone(),
        });
    }
    route(indices, grad_out, Some(activated.data()))
}

fn route<T: Element>(indices: &PoolIndices, grad_out: &Tensor<T>, mask: Option<&[T]>) -> Result<Tensor<T>> {
    if grad_out.shape() != indices.output_shape.as_slice() {
        return Err(TensorError::ShapeMismatch {
            context: "maxpool grad_out vs forward output",
            left: grad_out.shape().to_vec(),
            right: indices.output_shape.clone(),
        });
    }
    let total: usize = indices.input_shape.iter().product();
    let mut grad = vec![T::zero(); total];
    for (&i, &g) in indices.argmax.iter().zip(grad_out.data()) {
        let i = i as usize;
        if i >= total {
            return Err(TensorError::Unsupported("pool index out of range"));
        }
        if mask.map_or(true, |m| m[i] > T::zero()) {
            grad[i] = grad[i] + g;
        }
    }
    Tensor::new(&indices.input_shape, grad)
}
