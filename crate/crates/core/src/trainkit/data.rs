use std::path::Path;

use rayon::prelude::*;

use super::{ModelDef, Result, TrainError};
use crate::dataset::Manifest;
use crate::imaging::{read_image, Image};
use crate::tensor::{Element, Tensor};

/// Images held in memory as planar (C, H, W) bytes, with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    channels: usize,
    height: usize,
    width: usize,
    planes: Vec<u8>,
    labels: Vec<f32>,
}

fn check_image(image: &Image, def: &ModelDef) -> Result<()> {
    let actual = [image.channels(), image.height(), image.width()];
    let expected = [def.input_channels, def.input_height, def.input_width];
    if actual != expected {
        return Err(TrainError::InputShape { expected: expected.to_vec(), actual: actual.to_vec() });
    }
    Ok(())
}

fn planar(image: &Image, out: &mut Vec<u8>) {
    let c = image.channels();
    let px = image.pixels();
    for ch in 0..c {
        out.extend(px.iter().skip(ch).step_by(c));
    }
}

impl ImageSet {
    pub fn from_images(images: &[Image], labels: &[f32], def: &ModelDef) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(TrainError::InvalidConfig(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let mut planes = Vec::with_capacity(images.len() * def.input_channels * def.input_height * def.input_width);
        for image in images {
            check_image(image, def)?;
            planar(image, &mut planes);
        }
        Ok(Self {
            channels: def.input_channels,
            height: def.input_height,
            width: def.input_width,
            planes,
            labels: labels.to_vec(),
        })
    }

    /// Reads every record of `manifest`, resolving paths against `root`.
    pub fn load(manifest: &Manifest, root: &Path, def: &ModelDef) -> Result<Self> {
        let images = manifest
            .records
            .par_iter()
            .map(|r| {
                let image = read_image(&root.join(&r.path))
                    .map_err(|source| TrainError::Image { path: r.path.clone(), source })?;
                check_image(&image, def).map_err(|e| match e {
                    TrainError::InputShape { expected, actual } => {
                        TrainError::ImageShape { path: r.path.clone(), expected, actual }
                    }
                    other => other,
                })?;
                Ok(image)
            })
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<f32> = manifest.records.iter().map(|r| r.label().target() as f32).collect();
        Self::from_images(&images, &labels, def)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f32] {
        &self.labels
    }

    fn item_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Stacks the selected images into an (N, C, H, W) tensor scaled to [0, 1].
    pub fn batch<T: Element>(&self, indices: &[usize]) -> Result<Tensor<T>> {
        let n = self.item_len();
        let scale = 1.0 / 255.0;
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            let item = &self.planes[i * n..(i + 1) * n];
            data.extend(item.iter().map(|&b| T::from_f64(f64::from(b) * scale)));
        }
        Ok(Tensor::new(&[indices.len(), self.channels, self.height, self.width], data)?)
    }
}

/// A single image as a 1-item batch.
pub fn image_tensor<T: Element>(image: &Image, def: &ModelDef) -> Result<Tensor<T>> {
    ImageSet::from_images(std::slice::from_ref(image), &[0.0], def)?.batch(&[0])
}
