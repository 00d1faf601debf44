//! 8-bit rasters, the PGM/PPM codec and region-of-interest extraction.

mod ops;
mod pnm;
mod roi;

pub use ops::{apply_mask, detect_edges, resize, to_grayscale};
pub use pnm::{decode_image, encode_image, read_image, write_image};
pub use roi::{build_roi_mask, otsu_threshold};

use thiserror::Error;

/// Output side length of [`preprocess`].
pub const TARGET_SIZE: usize = 300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImageError {
    #[error("bad magic at byte 0: expected P5 or P6")]
    BadMagic,
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("unsupported depth: maxval {maxval} at byte {offset} (only 255 is accepted)")]
    UnsupportedDepth { maxval: u32, offset: usize },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
    #[error("{extra} trailing bytes after payload ending at byte {offset}")]
    TrailingData { offset: usize, extra: usize },
    #[error("expected a {expected}-channel image, got {actual}")]
    ChannelCount { expected: usize, actual: usize },
    #[error("image dimensions {width}x{height} invalid: {reason}")]
    InvalidDimensions { width: usize, height: usize, reason: &'static str },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("no region of interest found")]
    EmptyMask,
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = ImageError> = std::result::Result<T, E>;

/// Row-major 8-bit raster with interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                reason: "width and height must be positive",
            });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::ChannelCount { expected: 3, actual: channels });
        }
        if pixels.len() != width * height * channels {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                reason: "pixel buffer length does not match width*height*channels",
            });
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Channel `c` as a 1-channel image.
    pub fn channel(&self, c: usize) -> Image {
        let pixels = self.pixels.iter().skip(c).step_by(self.channels).copied().collect();
        Image::new(self.width, self.height, 1, pixels).expect("same geometry")
    }
}

/// One boolean per pixel; `true` marks the region of interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                reason: "mask length does not match width*height",
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Intersection over union with another mask of the same size.
    pub fn iou(&self, other: &Mask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Region-of-interest pipeline: grayscale, Sobel edges, ROI mask, masked
/// overlay on the colour original, then a bilinear resize to 300x300.
pub fn preprocess(image: &Image) -> Result<Image> {
    if image.channels() != 3 {
        return Err(ImageError::ChannelCount { expected: 3, actual: image.channels() });
    }
    let gray = to_grayscale(image)?;
    let edges = detect_edges(&gray)?;
    let mask = build_roi_mask(&edges)?;
    let masked = apply_mask(image, &mask)?;
    resize(&masked, TARGET_SIZE, TARGET_SIZE)
}
