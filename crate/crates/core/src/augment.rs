//! Temperature-fluctuation augmentation.
//!
//! Each output pixel is `clamp(pixel + variation, 0, 255)` where the integer
//! variation lies in `[-A, A]`. Variations come from splitmix64 as
//! `(next mod (2A + 1)) - A`, drawn in row-major pixel order and, within a
//! pixel, channel order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{Manifest, SampleRecord, Split};
use crate::imaging::{self, Image, ImageError};
use crate::rng::{splitmix64, SplitMix64};

pub const DEFAULT_AMPLITUDE: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluctuationMode {
    /// Independent variation for every channel of every pixel.
    PerPixel,
    /// One variation shared by the whole image.
    PerImage,
}

impl std::str::FromStr for FluctuationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-pixel" => Ok(Self::PerPixel),
            "per-image" => Ok(Self::PerImage),
            other => Err(format!("unknown fluctuation mode `{other}` (per-pixel | per-image)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FluctuationSpec {
    /// Maximum absolute variation. `u8` keeps it within 0..=255.
    pub amplitude: u8,
    pub mode: FluctuationMode,
    pub seed: u64,
}

impl Default for FluctuationSpec {
    fn default() -> Self {
        Self {
            amplitude: DEFAULT_AMPLITUDE,
            mode: FluctuationMode::PerPixel,
            seed: 0,
        }
    }
}

fn shift(v: u8, delta: i32) -> u8 {
    (v as i32 + delta).clamp(0, 255) as u8
}

pub fn temperature_fluctuate(image: &Image, spec: &FluctuationSpec) -> Image {
    let mut out = image.clone();
    let mut rng = SplitMix64::new(spec.seed);
    let a = spec.amplitude as u32;
    match spec.mode {
        FluctuationMode::PerPixel => {
            for v in out.pixels_mut() {
                *v = shift(*v, rng.symmetric_int(a));
            }
        }
        FluctuationMode::PerImage => {
            let delta = rng.symmetric_int(a);
            for v in out.pixels_mut() {
                *v = shift(*v, delta);
            }
        }
    }
    out
}

/// `|original_c - augmented_c|` for each of the three colour channels.
pub fn channel_abs_diff(original: &Image, augmented: &Image) -> Result<[Image; 3], ImageError> {
    for img in [original, augmented] {
        if img.channels() != 3 {
            return Err(ImageError::ChannelCount { expected: 3, actual: img.channels() });
        }
    }
    if original.dims() != augmented.dims() {
        return Err(ImageError::DimensionMismatch {
            left: original.dims(),
            right: augmented.dims(),
        });
    }
    let (w, h) = original.dims();
    let diff = |c: usize| {
        let px = original
            .pixels()
            .iter()
            .zip(augmented.pixels())
            .skip(c)
            .step_by(3)
            .map(|(&a, &b)| a.abs_diff(b))
            .collect();
        Image::new(w, h, 1, px).expect("same geometry")
    };
    Ok([diff(0), diff(1), diff(2)])
}

/// Seed used for record `index` of a dataset augmented with `base_seed`.
pub fn record_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(base_seed ^ index as u64)
}

/// `dir/stem.ext` -> `dir/stem_aug.ext`.
pub fn augmented_path(path: &str) -> String {
    let p = Path::new(path);
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match p.extension() {
        Some(ext) => format!("{stem}_aug.{}", ext.to_string_lossy()),
        None => format!("{stem}_aug"),
    };
    match p.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => format!("{}/{name}", parent.to_string_lossy()),
        _ => name,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub index: usize,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct AugmentReport {
    pub manifest: Manifest,
    pub errors: Vec<RecordError>,
}

/// Which records receive an augmented copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentScope {
    /// Unassigned and training records; validation records are left alone.
    TrainOnly,
    All,
}

/// Copies every record's image from `src_dir` into `out_dir` and appends one
/// augmented copy (`_aug` suffix) per eligible original. Record paths are
/// resolved against `src_dir` and written relative to `out_dir`.
///
/// Unreadable or unwritable records are reported in [`AugmentReport::errors`]
/// and skipped; the rest of the run continues.
pub fn augment_dataset(
    manifest: &Manifest,
    src_dir: &Path,
    out_dir: &Path,
    spec: &FluctuationSpec,
    scope: AugmentScope,
) -> Result<AugmentReport, ImageError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ImageError::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let eligible = |r: &SampleRecord| !r.augmented && (scope == AugmentScope::All || r.split != Split::Val);

    let outcomes: Vec<Result<Option<SampleRecord>, RecordError>> = manifest
        .records
        .par_iter()
        .enumerate()
        .map(|(index, rec)| {
            let fail = |message: String| RecordError {
                index,
                path: rec.path.clone(),
                message,
            };
            let src = src_dir.join(&rec.path);
            let bytes = std::fs::read(&src).map_err(|e| fail(format!("read {}: {e}", src.display())))?;
            let image = imaging::decode_image(&bytes).map_err(|e| fail(e.to_string()))?;
            write_bytes(&out_dir.join(&rec.path), &bytes).map_err(fail)?;
            if !eligible(rec) {
                return Ok(None);
            }
            let record_spec = FluctuationSpec {
                seed: record_seed(spec.seed, index),
                ..*spec
            };
            let aug = temperature_fluctuate(&image, &record_spec);
            let aug_path = augmented_path(&rec.path);
            write_bytes(&out_dir.join(&aug_path), &imaging::encode_image(&aug)).map_err(fail)?;
            Ok(Some(SampleRecord {
                path: aug_path,
                augmented: true,
                ..rec.clone()
            }))
        })
        .collect();

    let mut originals = Vec::new();
    let mut appended = Vec::new();
    let mut errors = Vec::new();
    for (rec, outcome) in manifest.records.iter().zip(outcomes) {
        match outcome {
            Ok(aug) => {
                originals.push(rec.clone());
                appended.extend(aug);
            }
            Err(e) => errors.push(e),
        }
    }
    originals.extend(appended);
    let mut provenance = manifest.provenance.clone();
    provenance.push(format!(
        "augment amplitude={} mode={} seed={} scope={}",
        spec.amplitude,
        match spec.mode {
            FluctuationMode::PerPixel => "per-pixel",
            FluctuationMode::PerImage => "per-image",
        },
        spec.seed,
        match scope {
            AugmentScope::TrainOnly => "train",
            AugmentScope::All => "all",
        }
    ));
    Ok(AugmentReport {
        manifest: Manifest { records: originals, provenance },
        errors,
    })
}

fn write_bytes(path: &PathBuf, bytes: &[u8]) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| format!("create {}: {e}", parent.display()))?;
    }
    std::fs::write(path, bytes).map_err(|e| format!("write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Image {
        Image::new(16, 16, 3, (0..768).map(|i| (i % 256) as u8).collect()).unwrap()
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let img = ramp();
        for mode in [FluctuationMode::PerPixel, FluctuationMode::PerImage] {
            let spec = FluctuationSpec { amplitude: 0, mode, seed: 11 };
            assert_eq!(temperature_fluctuate(&img, &spec), img);
        }
    }

    #[test]
    fn clipping_saturates_at_both_ends() {
        assert_eq!(shift(253, 5), 255);
        assert_eq!(shift(2, -5), 0);
        assert_eq!(shift(100, -5), 95);
    }

    #[test]
    fn per_image_mode_shifts_uniformly() {
        let img = Image::filled(8, 8, 3, 100).unwrap();
        let spec = FluctuationSpec { amplitude: 5, mode: FluctuationMode::PerImage, seed: 3 };
        let out = temperature_fluctuate(&img, &spec);
        let first = out.pixels()[0];
        assert!(out.pixels().iter().all(|&v| v == first));
        let expected = 100 + SplitMix64::new(3).symmetric_int(5);
        assert_eq!(first as i32, expected);
    }

    #[test]
    fn draw_order_is_pixel_then_channel() {
        let img = Image::filled(2, 1, 3, 128).unwrap();
        let spec = FluctuationSpec { amplitude: 5, mode: FluctuationMode::PerPixel, seed: 77 };
        let out = temperature_fluctuate(&img, &spec);
        let mut rng = SplitMix64::new(77);
        for &v in out.pixels() {
            assert_eq!(v as i32, 128 + rng.symmetric_int(5));
        }
    }

    #[test]
    fn abs_diff_cases() {
        let img = ramp();
        for d in channel_abs_diff(&img, &img).unwrap() {
            assert!(d.pixels().iter().all(|&v| v == 0));
        }
        let a = Image::new(1, 1, 3, vec![0, 0, 0]).unwrap();
        let b = Image::new(1, 1, 3, vec![255, 0, 255]).unwrap();
        let [r, g, bl] = channel_abs_diff(&a, &b).unwrap();
        assert_eq!((r.pixels()[0], g.pixels()[0], bl.pixels()[0]), (255, 0, 255));
        assert!(channel_abs_diff(&a, &Image::filled(2, 1, 3, 0).unwrap()).is_err());
    }

    #[test]
    fn aug_suffix() {
        assert_eq!(augmented_path("img/p01_f00.ppm"), "img/p01_f00_aug.ppm");
        assert_eq!(augmented_path("x.pgm"), "x_aug.pgm");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("per-image".parse::<FluctuationMode>(), Ok(FluctuationMode::PerImage));
        assert!("bogus".parse::<FluctuationMode>().is_err());
    }
}
