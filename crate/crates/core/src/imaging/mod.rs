//! Image container, file I/O, PSNR and the test-image manifest.
//!
//! An [`Image`] is a stack of equally sized real-valued planes (one per
//! channel). Intensities are nominally in `[0, 255]` but the solver is free to
//! leave that range; clamping happens only when an image is emitted.

mod io;
mod manifest;
mod metrics;

pub use io::{load_image, save_image};
pub use manifest::{Manifest, ManifestEntry, TEST_IMAGES_ENV};
pub use metrics::{mse, psnr, PEAK};

use ndarray::Array2;

use crate::error::{RestoreError, Result};

/// A single- or multi-channel grid of real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    planes: Vec<Array2<f64>>,
}

impl Image {
    pub fn from_planes(planes: Vec<Array2<f64>>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| RestoreError::InvalidParameter("image needs at least one channel".into()))?;
        let dim = first.dim();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(RestoreError::InvalidParameter("image dimensions must be positive".into()));
        }
        for p in &planes[1..] {
            if p.dim() != dim {
                return Err(RestoreError::ShapeMismatch {
                    expected: (dim.0, dim.1, 1),
                    actual: (p.dim().0, p.dim().1, 1),
                });
            }
        }
        Ok(Self { planes })
    }

    pub fn gray(plane: Array2<f64>) -> Self {
        assert!(plane.nrows() > 0 && plane.ncols() > 0, "empty image");
        Self { planes: vec![plane] }
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            planes: vec![Array2::from_elem((height, width), value); channels],
        }
    }

    pub fn height(&self) -> usize {
        self.planes[0].nrows()
    }

    pub fn width(&self) -> usize {
        self.planes[0].ncols()
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    /// `(height, width, channels)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), self.channels())
    }

    pub fn pixel_count(&self) -> usize {
        self.height() * self.width()
    }

    pub fn plane(&self, channel: usize) -> &Array2<f64> {
        &self.planes[channel]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut Array2<f64> {
        &mut self.planes[channel]
    }

    pub fn planes(&self) -> &[Array2<f64>] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Array2<f64>> {
        self.planes
    }

    pub fn is_finite(&self) -> bool {
        self.planes.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn map_planes<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&Array2<f64>) -> Array2<f64>,
    {
        Self {
            planes: self.planes.iter().map(&mut f).collect(),
        }
    }

    /// Clamp to `[0, 255]` and round half-to-even, i.e. what an 8-bit file
    /// would hold.
    pub fn quantized(&self) -> Self {
        self.map_planes(|p| p.mapv(quantize_value))
    }

    pub fn clamped(&self) -> Self {
        self.map_planes(|p| p.mapv(|v| v.clamp(0.0, 255.0)))
    }

    /// ITU-R BT.601 luma for 3-channel images; single-channel images are
    /// returned unchanged.
    pub fn to_gray(&self) -> Self {
        match self.channels() {
            3 => {
                let (r, g, b) = (&self.planes[0], &self.planes[1], &self.planes[2]);
                let mut y = Array2::zeros(r.dim());
                ndarray::Zip::from(&mut y)
                    .and(r)
                    .and(g)
                    .and(b)
                    .for_each(|y, &r, &g, &b| *y = 0.299 * r + 0.587 * g + 0.114 * b);
                Self::gray(y)
            }
            _ => Self::gray(self.planes[0].clone()),
        }
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(RestoreError::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }
}

pub(crate) fn quantize_value(v: f64) -> f64 {
    v.clamp(0.0, 255.0).round_ties_even()
}
