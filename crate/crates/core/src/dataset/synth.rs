//! Synthetic stand-in for the thermal recordings.
//!
//! Each image is a warm sample seen from above: a radial profile
//! `B + P * exp(-(r / sigma)^2)` around a jittered centre, fading into a dark
//! field at level `B`, replicated to three channels with independent
//! per-channel noise in `[-8, 8]`. The cuvette itself is the disk of radius
//! [`CUVETTE_RADIUS`]; class statistics are measured over it.
//! Unadulterated samples are hotter and more concentrated (sigma in [70, 85),
//! P in [150, 180)); adulterated ones cooler and more diffuse (sigma in
//! [95, 110), P in [110, 140)).

use std::path::Path;

use rayon::prelude::*;

use super::{AdulterationLevel, DatasetError, Label, Manifest, Result, SampleRecord, Split};
use crate::augment::record_seed;
use crate::imaging::{encode_image, Image};
use crate::rng::SplitMix64;

pub const IMAGE_SIZE: usize = 300;
pub const CUVETTE_RADIUS: f64 = 40.0;
/// Background level `B`, also the base of the interior profile.
pub const FIELD_LEVEL: f64 = 16.0;
pub const NOISE_AMPLITUDE: u32 = 8;
pub const MAX_JITTER: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub sigma: f64,
    pub peak: f64,
    pub center_x: f64,
    pub center_y: f64,
}

impl SyntheticParams {
    /// Draws sigma, peak, then x and y jitter, in that order.
    pub fn draw(label: Label, rng: &mut SplitMix64) -> Self {
        let (sigma, peak) = match label {
            Label::Unadulterated => (rng.uniform(70.0, 85.0), rng.uniform(150.0, 180.0)),
            Label::Adulterated => (rng.uniform(95.0, 110.0), rng.uniform(110.0, 140.0)),
        };
        let centre = IMAGE_SIZE as f64 / 2.0;
        let jx = rng.symmetric_int(MAX_JITTER) as f64;
        let jy = rng.symmetric_int(MAX_JITTER) as f64;
        Self {
            sigma,
            peak,
            center_x: centre + jx,
            center_y: centre + jy,
        }
    }

    /// Noise-free intensity at pixel (x, y).
    pub fn intensity(&self, x: usize, y: usize) -> u8 {
        let r2 = (x as f64 - self.center_x).powi(2) + (y as f64 - self.center_y).powi(2);
        let v = FIELD_LEVEL + self.peak * (-r2 / (self.sigma * self.sigma)).exp();
        (v + 0.5).floor().clamp(0.0, 255.0) as u8
    }

    pub fn inside(&self, x: usize, y: usize) -> bool {
        (x as f64 - self.center_x).powi(2) + (y as f64 - self.center_y).powi(2) <= CUVETTE_RADIUS * CUVETTE_RADIUS
    }
}

/// Renders one image; noise is drawn per pixel, per channel, in row-major order.
pub fn render_synthetic(params: &SyntheticParams, rng: &mut SplitMix64) -> Image {
    let mut px = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE * 3);
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            let base = params.intensity(x, y) as i32;
            for _ in 0..3 {
                px.push((base + rng.symmetric_int(NOISE_AMPLITUDE)).clamp(0, 255) as u8);
            }
        }
    }
    Image::new(IMAGE_SIZE, IMAGE_SIZE, 3, px).expect("fixed geometry")
}

/// Writes `count_per_class` images per class into `out_dir` and returns their
/// manifest (paths relative to `out_dir`, every record unassigned).
pub fn generate_synthetic(count_per_class: usize, seed: u64, out_dir: &Path) -> Result<Manifest> {
    if count_per_class == 0 {
        return Err(DatasetError::InvalidArgument("count_per_class must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| DatasetError::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    const POSITIVE_LEVELS: [AdulterationLevel; 3] =
        [AdulterationLevel::Pct10, AdulterationLevel::Pct25, AdulterationLevel::Pct50];
    let specs: Vec<(usize, Label, usize)> = [Label::Unadulterated, Label::Adulterated]
        .iter()
        .flat_map(|&l| (0..count_per_class).map(move |i| (l, i)))
        .enumerate()
        .map(|(k, (l, i))| (k, l, i))
        .collect();
    let records: Vec<SampleRecord> = specs
        .par_iter()
        .map(|&(k, label, i)| {
            let mut rng = SplitMix64::new(record_seed(seed, k));
            let params = SyntheticParams::draw(label, &mut rng);
            let image = render_synthetic(&params, &mut rng);
            let (tag, level) = match label {
                Label::Unadulterated => ("u", AdulterationLevel::Pure),
                Label::Adulterated => ("a", POSITIVE_LEVELS[i % 3]),
            };
            let name = format!("syn_{tag}_{i:04}.ppm");
            let path = out_dir.join(&name);
            std::fs::write(&path, encode_image(&image)).map_err(|e| DatasetError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Ok(SampleRecord {
                path: name,
                level,
                sample_id: format!("syn-{tag}-{i:04}"),
                split: Split::Unassigned,
                augmented: false,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Manifest {
        records,
        provenance: vec![format!(
            "source=synthetic per_class={count_per_class} seed={seed} tool=honeyscan {}",
            crate::VERSION
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_draw_from_their_ranges() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..200 {
            let u = SyntheticParams::draw(Label::Unadulterated, &mut rng);
            assert!((70.0..85.0).contains(&u.sigma) && (150.0..180.0).contains(&u.peak));
            let a = SyntheticParams::draw(Label::Adulterated, &mut rng);
            assert!((95.0..110.0).contains(&a.sigma) && (110.0..140.0).contains(&a.peak));
            assert!((a.center_x - 150.0).abs() <= 10.0 && (a.center_y - 150.0).abs() <= 10.0);
        }
    }

    #[test]
    fn profile_shape() {
        let p = SyntheticParams { sigma: 80.0, peak: 160.0, center_x: 150.0, center_y: 150.0 };
        assert_eq!(p.intensity(150, 150), 176);
        assert_eq!(p.intensity(0, 0), 16);
        assert!(p.intensity(150, 170) < p.intensity(150, 160));
        assert!(p.inside(150, 190) && !p.inside(150, 191));
    }

    #[test]
    fn rejects_zero_count() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic(0, 1, dir.path()).is_err());
    }
}
