//! Edge map -> region-of-interest mask: Otsu threshold, 3x3 closing,
//! largest 8-connected component, hole filling.

use std::collections::VecDeque;

use super::{Image, ImageError, Mask, Result};

/// Otsu's threshold over a 256-bin histogram: the level `t` maximising the
/// between-class variance of `{<= t}` vs `{> t}`. Ties resolve to the
/// smallest `t`; `None` when fewer than two levels are populated.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<u8> {
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0u64, 0.0f64);
    let mut best: Option<(u8, f64)> = None;
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let m0 = sum0 / w0 as f64;
        let m1 = (sum_all - sum0) / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (m0 - m1) * (m0 - m1);
        if best.map_or(true, |(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

fn morph(bits: &[bool], w: usize, h: usize, dilate: bool) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = !dilate;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let v = bits[ny * w + nx];
                    if dilate {
                        acc |= v;
                    } else {
                        acc &= v;
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Dilation followed by erosion with a 3x3 square; out-of-image neighbours are ignored.
fn close(bits: &[bool], w: usize, h: usize) -> Vec<bool> {
    morph(&morph(bits, w, h, true), w, h, false)
}

fn neighbours(x: usize, y: usize, w: usize, h: usize, eight: bool) -> impl Iterator<Item = (usize, usize)> {
    const OFFS: [(isize, isize); 8] = [(0, -1), (-1, 0), (1, 0), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];
    let n = if eight { 8 } else { 4 };
    OFFS[..n].iter().filter_map(move |&(dx, dy)| {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then_some((nx as usize, ny as usize))
    })
}

/// Largest 8-connected foreground component; the first one in raster order wins ties.
fn largest_component(bits: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut label = vec![0u32; bits.len()];
    let mut best: (u32, usize) = (0, 0);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..bits.len() {
        if !bits[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for (nx, ny) in neighbours(i % w, i / w, w, h, true) {
                let j = ny * w + nx;
                if bits[j] && label[j] == 0 {
                    label[j] = next;
                    queue.push_back(j);
                }
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    label.iter().map(|&l| l != 0 && l == best.0).collect()
}

/// Background pixels not 4-reachable from the border become foreground.
fn fill_holes(bits: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut outside = vec![false; bits.len()];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let i = y * w + x;
            if border && !bits[i] {
                outside[i] = true;
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        for (nx, ny) in neighbours(i % w, i / w, w, h, false) {
            let j = ny * w + nx;
            if !bits[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        }
    }
    outside.iter().map(|&o| !o).collect()
}

/// Builds the ROI mask from a Sobel magnitude image.
pub fn build_roi_mask(edges: &Image) -> Result<Mask> {
    if edges.channels() != 1 {
        return Err(ImageError::ChannelCount { expected: 1, actual: edges.channels() });
    }
    let (w, h) = edges.dims();
    let px = edges.pixels();
    if px.iter().all(|&v| v == 0) {
        return Err(ImageError::EmptyMask);
    }
    let mut hist = [0u64; 256];
    for &v in px {
        hist[v as usize] += 1;
    }
    // A single populated (non-zero) level has no Otsu split; everything is foreground.
    let threshold = otsu_threshold(&hist).unwrap_or(0);
    let binary: Vec<bool> = px.iter().map(|&v| v > threshold).collect();
    let closed = close(&binary, w, h);
    let largest = largest_component(&closed, w, h);
    if !largest.iter().any(|&b| b) {
        return Err(ImageError::EmptyMask);
    }
    Mask::new(w, h, fill_holes(&largest, w, h))
}
