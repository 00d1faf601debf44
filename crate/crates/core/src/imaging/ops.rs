use super::{Image, ImageError, Mask, Result};

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)` with halves rounded up.
pub fn to_grayscale(image: &Image) -> Result<Image> {
    if image.channels() != 3 {
        return Err(ImageError::ChannelCount { expected: 3, actual: image.channels() });
    }
    // Integer weights in thousandths keep the half-up rounding exact.
    let pixels = image
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            let sum = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((sum + 500) / 1000).min(255) as u8
        })
        .collect();
    Image::new(image.width(), image.height(), 1, pixels)
}

/// Sobel gradient magnitude on a replicate-padded image,
/// `min(255, round(sqrt(gx^2 + gy^2)))`.
pub fn detect_edges(gray: &Image) -> Result<Image> {
    if gray.channels() != 1 {
        return Err(ImageError::ChannelCount { expected: 1, actual: gray.channels() });
    }
    let (w, h) = gray.dims();
    if w < 3 || h < 3 {
        return Err(ImageError::InvalidDimensions {
            width: w,
            height: h,
            reason: "edge detection needs at least 3x3 pixels",
        });
    }
    let px = gray.pixels();
    let at = |x: isize, y: isize| -> i32 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        px[cy * w + cx] as i32
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            let mag = ((gx * gx + gy * gy) as f64).sqrt();
            out.push((mag + 0.5).floor().min(255.0) as u8);
        }
    }
    Image::new(w, h, 1, out)
}

/// Zeroes every pixel (all channels) outside the mask.
pub fn apply_mask(image: &Image, mask: &Mask) -> Result<Image> {
    if image.dims() != (mask.width(), mask.height()) {
        return Err(ImageError::DimensionMismatch {
            left: image.dims(),
            right: (mask.width(), mask.height()),
        });
    }
    let c = image.channels();
    let mut out = image.clone();
    for (px, &keep) in out.pixels_mut().chunks_exact_mut(c).zip(mask.bits()) {
        if !keep {
            px.fill(0);
        }
    }
    Ok(out)
}

/// Source coordinate and blend weight for one destination index under
/// half-pixel-centred sampling.
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resize with half-pixel centres; results rounded half-up.
pub fn resize(image: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions {
            width,
            height,
            reason: "resize target must be positive",
        });
    }
    let (sw, sh) = image.dims();
    let c = image.channels();
    let px = image.pixels();
    let cols: Vec<_> = (0..width).map(|x| sample_axis(x, sw, width)).collect();
    let mut out = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let (y0, y1, fy) = sample_axis(y, sh, height);
        for &(x0, x1, fx) in &cols {
            for ch in 0..c {
                let p = |x: usize, y: usize| px[(y * sw + x) * c + ch] as f64;
                let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * fx;
                let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * fx;
                let v = top + (bottom - top) * fy;
                out.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(width, height, c, out)
}
