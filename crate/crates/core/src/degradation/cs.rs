use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{RestoreError, Result};

/// Block compressive sensing: the image is zero-padded to a multiple of
/// `block_side`, cut into row-major blocks, each block is vectorized
/// column-major and projected by one shared `M x B` matrix with orthonormal
/// rows. Measurements for a plane are stored as an `M x n_blocks` array.
#[derive(Debug, Clone)]
pub struct BlockCsOperator {
    height: usize,
    width: usize,
    block_side: usize,
    subrate: f64,
    seed: u64,
    phi: Array2<f64>,
}

/// Seeded Gaussian `rows x cols` matrix with orthonormalized rows.
pub fn orthonormal_gaussian_rows(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // g = Phi^T, filled so that Phi is drawn row by row.
    let mut g = nalgebra::DMatrix::<f64>::zeros(cols, rows);
    for i in 0..rows {
        for j in 0..cols {
            g[(j, i)] = StandardNormal.sample(&mut rng);
        }
    }
    let q = g.qr().q();
    Array2::from_shape_fn((rows, cols), |(i, j)| q[(j, i)])
}

impl BlockCsOperator {
    pub fn new(height: usize, width: usize, block_side: usize, subrate: f64, seed: u64) -> Result<Self> {
        if block_side == 0 {
            return Err(RestoreError::InvalidParameter("block side must be positive".into()));
        }
        if !(subrate > 0.0 && subrate <= 1.0) {
            return Err(RestoreError::InvalidParameter(format!("subrate {} is outside (0, 1]", subrate)));
        }
        if height == 0 || width == 0 {
            return Err(RestoreError::InvalidParameter("image dimensions must be positive".into()));
        }
        let b = block_side * block_side;
        let m = (subrate * b as f64).round() as usize;
        if m == 0 {
            return Err(RestoreError::InvalidParameter(format!(
                "subrate {} gives no measurements for {}x{} blocks",
                subrate, block_side, block_side
            )));
        }
        Ok(Self {
            height,
            width,
            block_side,
            subrate,
            seed,
            phi: orthonormal_gaussian_rows(m, b, seed),
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn block_side(&self) -> usize {
        self.block_side
    }

    pub fn subrate(&self) -> f64 {
        self.subrate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The shared measurement matrix.
    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn rows(&self) -> usize {
        self.phi.nrows()
    }

    fn blocks_per_axis(&self) -> (usize, usize) {
        (self.height.div_ceil(self.block_side), self.width.div_ceil(self.block_side))
    }

    pub fn n_blocks(&self) -> usize {
        let (a, b) = self.blocks_per_axis();
        a * b
    }

    /// Shape of one measurement plane.
    pub fn measurement_dim(&self) -> (usize, usize) {
        (self.rows(), self.n_blocks())
    }

    fn to_blocks(&self, x: &Array2<f64>) -> Array2<f64> {
        let bs = self.block_side;
        let (_, nbw) = self.blocks_per_axis();
        let mut cols = Array2::zeros((bs * bs, self.n_blocks()));
        for k in 0..self.n_blocks() {
            let (r0, c0) = ((k / nbw) * bs, (k % nbw) * bs);
            for dc in 0..bs {
                let c = c0 + dc;
                if c >= self.width {
                    break;
                }
                for dr in 0..bs {
                    let r = r0 + dr;
                    if r >= self.height {
                        break;
                    }
                    cols[(dc * bs + dr, k)] = x[(r, c)];
                }
            }
        }
        cols
    }

    fn from_blocks(&self, cols: &Array2<f64>) -> Array2<f64> {
        let bs = self.block_side;
        let (_, nbw) = self.blocks_per_axis();
        let mut x = Array2::zeros((self.height, self.width));
        for k in 0..self.n_blocks() {
            let (r0, c0) = ((k / nbw) * bs, (k % nbw) * bs);
            for dc in 0..bs.min(self.width - c0) {
                for dr in 0..bs.min(self.height - r0) {
                    x[(r0 + dr, c0 + dc)] = cols[(dc * bs + dr, k)];
                }
            }
        }
        x
    }

    pub fn apply_plane(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.dim() != self.dim() {
            return Err(RestoreError::ShapeMismatch {
                expected: (self.height, self.width, 1),
                actual: (x.nrows(), x.ncols(), 1),
            });
        }
        Ok(self.phi.dot(&self.to_blocks(x)))
    }

    pub fn adjoint_plane(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        if y.dim() != self.measurement_dim() {
            let (m, n) = self.measurement_dim();
            return Err(RestoreError::ShapeMismatch {
                expected: (m, n, 1),
                actual: (y.nrows(), y.ncols(), 1),
            });
        }
        Ok(self.from_blocks(&self.phi.t().dot(y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_orthonormal() {
        let op = BlockCsOperator::new(64, 64, 32, 0.3, 7).unwrap();
        assert_eq!(op.rows(), 307);
        let gram = op.phi().dot(&op.phi().t());
        for ((i, j), &v) in gram.indexed_iter() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn full_rate_round_trip() {
        let op = BlockCsOperator::new(16, 24, 8, 1.0, 1).unwrap();
        let x = Array2::from_shape_fn((16, 24), |(i, j)| (i * 24 + j) as f64);
        let back = op.adjoint_plane(&op.apply_plane(&x).unwrap()).unwrap();
        assert!(back.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn padding_blocks_are_cropped() {
        let op = BlockCsOperator::new(10, 13, 4, 1.0, 2).unwrap();
        assert_eq!(op.n_blocks(), 3 * 4);
        let x = Array2::from_shape_fn((10, 13), |(i, j)| (i + 2 * j) as f64);
        let back = op.adjoint_plane(&op.apply_plane(&x).unwrap()).unwrap();
        assert!(back.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn seeded_and_validated() {
        let a = BlockCsOperator::new(32, 32, 32, 0.1, 5).unwrap();
        let b = BlockCsOperator::new(32, 32, 32, 0.1, 5).unwrap();
        assert_eq!(a.phi(), b.phi());
        assert!(BlockCsOperator::new(32, 32, 4, 0.01, 0).is_err());
        assert!(BlockCsOperator::new(32, 32, 4, 1.5, 0).is_err());
    }

    #[test]
    fn single_block_vectorization_is_column_major() {
        let op = BlockCsOperator::new(2, 2, 2, 1.0, 3).unwrap();
        let x = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = op.apply_plane(&x).unwrap();
        let v = ndarray::arr1(&[1.0, 3.0, 2.0, 4.0]);
        let expected = op.phi().dot(&v);
        assert!((0..4).all(|i| (y[(i, 0)] - expected[i]).abs() < 1e-12));
    }
}
