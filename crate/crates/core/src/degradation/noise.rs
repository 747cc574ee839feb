use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{RestoreError, Result};
use crate::imaging::Image;

/// Additive noise models used to synthesize degraded observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    SaltPepper { density: f64 },
}

impl NoiseModel {
    pub fn apply(&self, image: &Image, seed: u64) -> Result<Image> {
        match *self {
            Self::Gaussian { sigma } => add_gaussian_noise(image, sigma, seed),
            Self::SaltPepper { density } => add_salt_pepper(image, density, seed),
        }
    }
}

/// i.i.d. zero-mean Gaussian noise with standard deviation `sigma`. No
/// clamping is applied.
pub fn add_gaussian_noise(image: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(RestoreError::InvalidParameter(format!("noise sigma {} must be nonnegative", sigma)));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| RestoreError::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(image.map_planes(|p| p.mapv(|v| v + normal.sample(&mut rng))))
}

/// Sets `round(density * H * W)` distinct pixels of each channel to 0 or 255
/// with a fair coin.
pub fn add_salt_pepper(image: &Image, density: f64, seed: u64) -> Result<Image> {
    if !(0.0..=1.0).contains(&density) {
        return Err(RestoreError::InvalidParameter(format!("density {} is outside [0, 1]", density)));
    }
    let (h, w) = (image.height(), image.width());
    let n = h * w;
    let count = (density * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for c in 0..image.channels() {
        let plane = out.plane_mut(c);
        for idx in rand::seq::index::sample(&mut rng, n, count) {
            plane[(idx / w, idx % w)] = if rng.random_bool(0.5) { 255.0 } else { 0.0 };
        }
    }
    Ok(out)
}
