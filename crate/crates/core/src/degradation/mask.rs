use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{RestoreError, Result};
use crate::imaging::{load_image, Image};

/// Pixel selection operator: `true` marks an observed pixel.
///
/// Holds either one mask shared by every channel or one mask per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskOperator {
    masks: Vec<Array2<bool>>,
}

impl MaskOperator {
    pub fn new(mask: Array2<bool>) -> Self {
        Self { masks: vec![mask] }
    }

    pub fn per_channel(masks: Vec<Array2<bool>>) -> Result<Self> {
        let dim = masks
            .first()
            .ok_or_else(|| RestoreError::InvalidParameter("mask operator needs at least one mask".into()))?
            .dim();
        if masks.iter().any(|m| m.dim() != dim) {
            return Err(RestoreError::InvalidParameter("channel masks differ in size".into()));
        }
        Ok(Self { masks })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.masks[0].dim()
    }

    /// Mask applied to `channel`.
    pub fn mask(&self, channel: usize) -> &Array2<bool> {
        &self.masks[channel.min(self.masks.len() - 1)]
    }

    pub fn masks(&self) -> &[Array2<bool>] {
        &self.masks
    }

    pub fn observed_count(&self, channel: usize) -> usize {
        self.mask(channel).iter().filter(|&&m| m).count()
    }

    pub fn apply_plane(&self, channel: usize, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mask = self.mask(channel);
        if x.dim() != mask.dim() {
            return Err(RestoreError::ShapeMismatch {
                expected: (mask.nrows(), mask.ncols(), 1),
                actual: (x.nrows(), x.ncols(), 1),
            });
        }
        let mut y = x.clone();
        ndarray::Zip::from(&mut y).and(mask).for_each(|v, &m| {
            if !m {
                *v = 0.0;
            }
        });
        Ok(y)
    }

    pub fn as_image(&self) -> Image {
        let planes = self
            .masks
            .iter()
            .map(|m| m.mapv(|b| if b { 255.0 } else { 0.0 }))
            .collect();
        Image::from_planes(planes).expect("masks share a shape")
    }
}

/// Random mask with exactly `round(missing_fraction * H * W)` missing pixels.
pub fn make_random_mask(height: usize, width: usize, missing_fraction: f64, seed: u64) -> Result<Array2<bool>> {
    if !(0.0..1.0).contains(&missing_fraction) {
        return Err(RestoreError::InvalidParameter(format!(
            "missing fraction {} is outside [0, 1)",
            missing_fraction
        )));
    }
    let n = height * width;
    let missing = (missing_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = Array2::from_elem((height, width), true);
    for idx in rand::seq::index::sample(&mut rng, n, missing) {
        mask[(idx / width, idx % width)] = false;
    }
    Ok(mask)
}

/// Mask from an image file: dark pixels (below mid-gray) are missing.
pub fn load_mask(path: &Path) -> Result<Array2<bool>> {
    let img = load_image(path)?.to_gray();
    Ok(img.plane(0).mapv(|v| v >= 128.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_mask_counts() {
        let m = make_random_mask(256, 256, 0.8, 3).unwrap();
        assert_eq!(m.iter().filter(|&&b| !b).count(), 52429);
        assert!(make_random_mask(10, 10, 0.0, 1).unwrap().iter().all(|&b| b));
        assert_eq!(make_random_mask(64, 64, 0.5, 9).unwrap(), make_random_mask(64, 64, 0.5, 9).unwrap());
        assert_ne!(make_random_mask(64, 64, 0.5, 9).unwrap(), make_random_mask(64, 64, 0.5, 10).unwrap());
        assert!(make_random_mask(4, 4, 1.0, 0).is_err());
    }

    #[test]
    fn apply_is_idempotent() {
        let mask = make_random_mask(16, 16, 0.4, 1).unwrap();
        let op = MaskOperator::new(mask.clone());
        let x = Array2::from_shape_fn((16, 16), |(i, j)| (i * 16 + j) as f64 + 1.0);
        let once = op.apply_plane(0, &x).unwrap();
        assert_eq!(op.apply_plane(0, &once).unwrap(), once);
        for ((i, j), &v) in once.indexed_iter() {
            assert_eq!(v == 0.0, !mask[(i, j)]);
        }
    }

    #[test]
    fn mask_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let mask = make_random_mask(12, 9, 0.3, 5).unwrap();
        crate::imaging::save_image(&MaskOperator::new(mask.clone()).as_image(), &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }
}
