use rayon::prelude::*;

use super::gemm::{matmul, matmul_strided, MatRef};
use super::{Element, Result, Tensor, TensorError};

const K: usize = 3;
const TAPS: usize = K * K;

/// 3x3 convolution weights, shape (C_out, C_in, 3, 3), plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T: Element> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Element> ConvParams<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (c_out, _, kh, kw) = kernels.dims4()?;
        if kh != K || kw != K {
            return Err(TensorError::InvalidShape {
                shape: kernels.shape().to_vec(),
                reason: "kernels must be 3x3",
            });
        }
        if bias.shape() != [c_out] {
            return Err(TensorError::ShapeMismatch {
                context: "conv bias vs kernel output channels",
                left: bias.shape().to_vec(),
                right: kernels.shape().to_vec(),
            });
        }
        Ok(Self { kernels, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T: Element> {
    pub grad_input: Tensor<T>,
    pub grad_kernels: Tensor<T>,
    pub grad_bias: Tensor<T>,
}

/// Target patch-matrix size per band, in elements; keeps the band in cache.
const BAND_ELEMS: usize = 1 << 17;

fn band_rows(kdim: usize, w: usize) -> usize {
    (BAND_ELEMS / (kdim * w)).max(1)
}

/// Unfolds rows `y0..y1` of one (C, H, W) image into a (C*9) x ((y1-y0)*W)
/// patch matrix, zero padded by one.
fn im2col<T: Element>(img: &[T], c: usize, h: usize, w: usize, y0: usize, y1: usize, col: &mut [T]) {
    let hw = h * w;
    let cols = (y1 - y0) * w;
    for ci in 0..c {
        let plane = &img[ci * hw..(ci + 1) * hw];
        for ky in 0..K {
            for kx in 0..K {
                let row = &mut col[(ci * TAPS + ky * K + kx) * cols..][..cols];
                for y in y0..y1 {
                    let sy = y as isize + ky as isize - 1;
                    let out = &mut row[(y - y0) * w..(y - y0 + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    // x + kx - 1 in range  <=>  x in [lo, hi)
                    let lo = 1usize.saturating_sub(kx);
                    let hi = (w + 1 - kx).min(w);
                    out[..lo].fill(T::zero());
                    out[hi..].fill(T::zero());
                    out[lo..hi].copy_from_slice(&src[lo + kx - 1..hi + kx - 1]);
                }
            }
        }
    }
}

/// Kernels rearranged so that the input gradient is itself a 3x3 "same"
/// convolution of the output gradient: (C_in) x (C_out*9), taps reversed.
fn flipped_kernels<T: Element>(weights: &[T], c_out: usize, c_in: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c_in * c_out * TAPS];
    for co in 0..c_out {
        for ci in 0..c_in {
            for t in 0..TAPS {
                out[ci * c_out * TAPS + co * TAPS + (TAPS - 1 - t)] = weights[(co * c_in + ci) * TAPS + t];
            }
        }
    }
    out
}

/// `dst (rows x HW) [+]= weights (rows x kdim) * im2col(img)`, band by band.
#[allow(clippy::too_many_arguments)]
fn conv_image<T: Element>(
    img: &[T],
    c: usize,
    h: usize,
    w: usize,
    weights: &[T],
    rows: usize,
    dst: &mut [T],
    accumulate: bool,
    col: &mut Vec<T>,
) {
    let kdim = c * TAPS;
    let band = band_rows(kdim, w);
    col.resize(kdim * band * w, T::zero());
    for y0 in (0..h).step_by(band) {
        let y1 = (y0 + band).min(h);
        let cols = (y1 - y0) * w;
        im2col(img, c, h, w, y0, y1, &mut col[..kdim * cols]);
        matmul_strided(
            MatRef::new(weights, rows, kdim),
            MatRef::new(&col[..kdim * cols], kdim, cols),
            &mut dst[y0 * w..],
            h * w,
            accumulate,
        );
    }
}

fn check_input<T: Element>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<(usize, usize, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    if c != params.in_channels() {
        return Err(TensorError::ShapeMismatch {
            context: "conv2d input channels vs kernel C_in",
            left: input.shape().to_vec(),
            right: params.kernels.shape().to_vec(),
        });
    }
    Ok((n, c, h, w))
}

/// Stride-1, zero-padding-1 3x3 convolution. Output spatial size equals the input's.
pub fn conv2d_forward<T: Element>(input: &Tensor<T>, params: &ConvParams<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = check_input(input, params)?;
    let c_out = params.out_channels();
    let hw = h * w;
    let weights = params.kernels.data();
    let bias = params.bias.data();
    let mut out = vec![T::zero(); n * c_out * hw];
    out.par_chunks_mut(c_out * hw)
        .zip(input.data().par_chunks(c * hw))
        .for_each_init(Vec::new, |col, (dst, img)| {
            for (co, plane) in dst.chunks_mut(hw).enumerate() {
                plane.fill(bias[co]);
            }
            conv_image(img, c, h, w, weights, c_out, dst, true, col);
        });
    Tensor::new(&[n, c_out, h, w], out)
}

/// Exact gradients of [`conv2d_forward`] w.r.t. its input, kernels and bias.
pub fn conv2d_backward<T: Element>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (gi, gk, gb) = conv2d_backward_with(input, params, grad_out, true)?;
    Ok(ConvGrads {
        grad_input: gi.expect("requested"),
        grad_kernels: gk,
        grad_bias: gb,
    })
}

/// Backward pass that can skip the input gradient (first layer of a network).
pub(crate) fn conv2d_backward_with<T: Element>(
    input: &Tensor<T>,
    params: &ConvParams<T>,
    grad_out: &Tensor<T>,
    want_input_grad: bool,
) -> Result<(Option<Tensor<T>>, Tensor<T>, Tensor<T>)> {
    let (n, c, h, w) = check_input(input, params)?;
    let c_out = params.out_channels();
    if grad_out.shape() != [n, c_out, h, w] {
        return Err(TensorError::ShapeMismatch {
            context: "conv2d grad_out vs forward output",
            left: grad_out.shape().to_vec(),
            right: vec![n, c_out, h, w],
        });
    }
    let hw = h * w;
    let kdim = c * TAPS;
    let flipped = if want_input_grad {
        flipped_kernels(params.kernels.data(), c_out, c)
    } else {
        Vec::new()
    };
    let mut grad_input = if want_input_grad { vec![T::zero(); n * c * hw] } else { Vec::new() };

    struct Partial<T> {
        kernels: Vec<T>,
        bias: Vec<T>,
    }

    let per_item = |(img, gout): (&[T], &[T]), gin: Option<&mut [T]>, col: &mut Vec<T>| -> Partial<T> {
        let band = band_rows(kdim, w);
        col.resize(kdim * band * w, T::zero());
        let mut gk = vec![T::zero(); c_out * kdim];
        for y0 in (0..h).step_by(band) {
            let y1 = (y0 + band).min(h);
            let cols = (y1 - y0) * w;
            im2col(img, c, h, w, y0, y1, &mut col[..kdim * cols]);
            matmul(
                MatRef::strided(&gout[y0 * w..], c_out, cols, hw),
                MatRef::transposed(&col[..kdim * cols], cols, kdim),
                &mut gk,
                true,
            );
        }
        let gb = gout
            .chunks(hw)
            .map(|plane| plane.iter().fold(T::zero(), |a, &b| a + b))
            .collect();
        if let Some(gin) = gin {
            conv_image(gout, c_out, h, w, &flipped, c, gin, false, col);
        }
        Partial { kernels: gk, bias: gb }
    };

    let pairs = input.data().par_chunks(c * hw).zip(grad_out.data().par_chunks(c_out * hw));
    let partials: Vec<Partial<T>> = if want_input_grad {
        pairs
            .zip(grad_input.par_chunks_mut(c * hw))
            .map_init(Vec::new, |col, (p, gin)| per_item(p, Some(gin), col))
            .collect()
    } else {
        pairs.map_init(Vec::new, |col, p| per_item(p, None, col)).collect()
    };

    // Fixed item order keeps the reduction deterministic.
    let mut gk = vec![T::zero(); c_out * kdim];
    let mut gb = vec![T::zero(); c_out];
    for p in &partials {
        for (a, &b) in gk.iter_mut().zip(&p.kernels) {
            *a = *a + b;
        }
        for (a, &b) in gb.iter_mut().zip(&p.bias) {
            *a = *a + b;
        }
    }
    let grad_input = if want_input_grad {
        Some(Tensor::new(&[n, c, h, w], grad_input)?)
    } else {
        None
    };
    Ok((
        grad_input,
        Tensor::new(params.kernels.shape(), gk)?,
        Tensor::new(&[c_out], gb)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_params(c_in: usize, c_out: usize) -> ConvParams<f64> {
        ConvParams::new(
            Tensor::full(&[c_out, c_in, 3, 3], 1.0).unwrap(),
            Tensor::zeros(&[c_out]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn all_ones_center_and_corner() {
        let input = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        let out = conv2d_forward(&input, &ones_params(1, 1)).unwrap();
        assert_eq!(out.shape(), &[1, 1, 3, 3]);
        let d = out.data();
        assert_eq!(d[4], 9.0);
        for corner in [0, 2, 6, 8] {
            assert_eq!(d[corner], 4.0);
        }
        for edge in [1, 3, 5, 7] {
            assert_eq!(d[edge], 6.0);
        }
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let params = ConvParams::new(Tensor::new(&[1, 1, 3, 3], k).unwrap(), Tensor::zeros(&[1]).unwrap()).unwrap();
        let input = Tensor::from_fn(&[2, 1, 4, 5], |i| (i as f64 * 0.37).sin()).unwrap();
        assert_eq!(conv2d_forward(&input, &params).unwrap(), input);
    }

    #[test]
    fn channel_mismatch_names_both_shapes() {
        let input = Tensor::<f64>::zeros(&[1, 2, 4, 4]).unwrap();
        let err = conv2d_forward(&input, &ones_params(3, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 2, 4, 4]") && msg.contains("[1, 3, 3, 3]"), "{msg}");
    }

    #[test]
    fn rejects_non_3x3_kernels() {
        let k = Tensor::<f32>::zeros(&[1, 1, 5, 5]).unwrap();
        assert!(ConvParams::new(k, Tensor::zeros(&[1]).unwrap()).is_err());
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let input = Tensor::from_fn(&[2, 2, 3, 4], |i| i as f64).unwrap();
        let params = ones_params(2, 3);
        let g = Tensor::zeros(&[2, 3, 3, 4]).unwrap();
        let grads = conv2d_backward(&input, &params, &g).unwrap();
        assert!(grads.grad_input.data().iter().all(|&v| v == 0.0));
        assert!(grads.grad_kernels.data().iter().all(|&v| v == 0.0));
        assert!(grads.grad_bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_out_shape_is_checked() {
        let input = Tensor::<f64>::zeros(&[1, 1, 3, 3]).unwrap();
        let g = Tensor::zeros(&[1, 1, 3, 2]).unwrap();
        assert!(conv2d_backward(&input, &ones_params(1, 1), &g).is_err());
    }
}
