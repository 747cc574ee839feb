//! Forward operators and their adjoints, blur kernels, noise synthesis and
//! the adaptive median filter that turns impulse noise into a pixel mask.

mod blur;
mod cs;
mod fft;
mod kernels;
mod mask;
mod median;
mod noise;

pub use blur::{psf_to_otf, BlurOperator};
pub use cs::{orthonormal_gaussian_rows, BlockCsOperator};
pub use fft::Fft2;
pub use kernels::{make_gaussian_kernel, make_motion_kernel, make_uniform_kernel, parse_kernel_spec};
pub use mask::{load_mask, make_random_mask, MaskOperator};
pub use median::adaptive_median_filter;
pub use noise::{add_gaussian_noise, add_salt_pepper, NoiseModel};

use ndarray::Array2;

use crate::error::{RestoreError, Result};
use crate::imaging::Image;

/// Side of the measurement blocks used by the compressive sensing task.
pub const DEFAULT_CS_BLOCK: usize = 32;

/// The linear degradation `A` in `b = A x + n`.
#[derive(Debug, Clone)]
pub enum DegradationOp {
    Mask(MaskOperator),
    Blur(BlurOperator),
    BlockCs(BlockCsOperator),
}

impl DegradationOp {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mask(_) => "mask",
            Self::Blur(_) => "blur",
            Self::BlockCs(_) => "block-cs",
        }
    }

    /// `(height, width)` of the images the operator acts on.
    pub fn image_dim(&self) -> (usize, usize) {
        match self {
            Self::Mask(m) => m.dim(),
            Self::Blur(b) => b.dim(),
            Self::BlockCs(c) => c.dim(),
        }
    }

    pub fn apply_plane(&self, channel: usize, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Self::Mask(m) => m.apply_plane(channel, x),
            Self::Blur(b) => b.apply_plane(x),
            Self::BlockCs(c) => c.apply_plane(x),
        }
    }

    pub fn adjoint_plane(&self, channel: usize, y: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Self::Mask(m) => m.apply_plane(channel, y),
            Self::Blur(b) => b.adjoint_plane(y),
            Self::BlockCs(c) => c.adjoint_plane(y),
        }
    }

    /// Applies `A` channel by channel. For block CS the result holds one
    /// `M x n_blocks` measurement plane per channel.
    pub fn apply(&self, x: &Image) -> Result<Image> {
        self.map(x, |c, p| self.apply_plane(c, p))
    }

    pub fn adjoint(&self, y: &Image) -> Result<Image> {
        self.map(y, |c, p| self.adjoint_plane(c, p))
    }

    fn map<F>(&self, img: &Image, f: F) -> Result<Image>
    where
        F: Fn(usize, &Array2<f64>) -> Result<Array2<f64>>,
    {
        let planes = img
            .planes()
            .iter()
            .enumerate()
            .map(|(c, p)| f(c, p))
            .collect::<Result<Vec<_>>>()?;
        Image::from_planes(planes)
    }

    /// Check that an image has the operator's spatial size.
    pub fn check_image(&self, x: &Image) -> Result<()> {
        let (h, w) = self.image_dim();
        if (x.height(), x.width()) != (h, w) {
            return Err(RestoreError::ShapeMismatch {
                expected: (h, w, x.channels()),
                actual: x.shape(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_plane(dim: (usize, usize), seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn(dim, || StandardNormal.sample(&mut rng))
    }

    fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
    }

    fn check_adjoint(op: &DegradationOp, out_dim: (usize, usize)) {
        let x = random_plane(op.image_dim(), 1);
        let y = random_plane(out_dim, 2);
        let lhs = dot(&op.apply_plane(0, &x).unwrap(), &y);
        let rhs = dot(&x, &op.adjoint_plane(0, &y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()), "{}: {} vs {}", op.name(), lhs, rhs);
    }

    #[test]
    fn adjoints() {
        let mask = DegradationOp::Mask(MaskOperator::new(make_random_mask(20, 30, 0.5, 3).unwrap()));
        check_adjoint(&mask, (20, 30));
        let blur = DegradationOp::Blur(BlurOperator::new(make_motion_kernel(7.0, 30.0).unwrap(), 20, 30).unwrap());
        check_adjoint(&blur, (20, 30));
        let cs = BlockCsOperator::new(20, 30, 8, 0.25, 4).unwrap();
        let dim = cs.measurement_dim();
        check_adjoint(&DegradationOp::BlockCs(cs), dim);
    }

    #[test]
    fn image_level_shapes() {
        let cs = BlockCsOperator::new(16, 16, 8, 0.5, 0).unwrap();
        let op = DegradationOp::BlockCs(cs);
        let x = Image::filled(16, 16, 3, 1.0);
        let b = op.apply(&x).unwrap();
        assert_eq!(b.shape(), (32, 4, 3));
        assert_eq!(op.adjoint(&b).unwrap().shape(), (16, 16, 3));
        assert!(op.check_image(&Image::filled(8, 16, 1, 0.0)).is_err());
    }
}
