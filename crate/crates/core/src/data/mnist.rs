use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let chunk = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            needed: offset + 4,
            available: bytes.len(),
        })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4-byte slice")))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Reads an IDX3 image file into an `N × (rows·cols)` matrix of raw pixel values.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    check_magic(&bytes, IMAGE_MAGIC, path)?;
    let count = read_u32(&bytes, 4, path)? as usize;
    let rows = read_u32(&bytes, 8, path)? as usize;
    let cols = read_u32(&bytes, 12, path)? as usize;
    let pixels = rows * cols;
    let needed = 16 + count * pixels;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    let data = bytes[16..needed].iter().map(|&b| f64::from(b)).collect();
    Matrix::from_vec(count, pixels, data)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    check_magic(&bytes, LABEL_MAGIC, path)?;
    let count = read_u32(&bytes, 4, path)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    Ok(bytes[8..needed].iter().map(|&b| usize::from(b)).collect())
}

/// Unnormalized pixels (0..=255) with labels, K = 10.
pub fn load_mnist_raw(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let features = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if features.rows() != labels.len() {
        return Err(Error::CountMismatch {
            images: features.rows(),
            labels: labels.len(),
        });
    }
    Dataset::new(features, labels, 10)
}

/// Loads an IDX image/label pair and standardizes it to zero mean, unit variance.
///
/// Statistics are global scalars over all pixels of this file. Use
/// [`Standardizer`] to apply training-set statistics to a test set.
pub fn load_mnist(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let mut ds = load_mnist_raw(images, labels)?;
    Standardizer::fit(&ds.features).apply(&mut ds.features);
    Ok(ds)
}

/// Global scalar mean/std normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(features: &Matrix) -> Self {
        let values = features.as_slice();
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn apply(&self, features: &mut Matrix) {
        let (mean, std) = (self.mean, self.std);
        features.map_inplace(|v| (v - mean) / std);
    }
}
