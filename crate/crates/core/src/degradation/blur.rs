use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::fft::Fft2;
use crate::error::{RestoreError, Result};

/// Circular 2-D convolution with a centered kernel, evaluated in the
/// frequency domain.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    kernel: Array2<f64>,
    otf: Array2<Complex64>,
    fft: Fft2,
}

/// Transfer function of `kernel` on an `height x width` periodic grid, with
/// the kernel center moved to the origin.
pub fn psf_to_otf(kernel: &Array2<f64>, height: usize, width: usize, fft: &Fft2) -> Result<Array2<Complex64>> {
    let (kh, kw) = kernel.dim();
    if kh > height || kw > width {
        return Err(RestoreError::Geometry(format!(
            "{}x{} kernel does not fit a {}x{} image",
            kh, kw, height, width
        )));
    }
    let (ch, cw) = (kh / 2, kw / 2);
    let mut padded = Array2::<f64>::zeros((height, width));
    for ((i, j), &v) in kernel.indexed_iter() {
        let r = (i + height - ch) % height;
        let c = (j + width - cw) % width;
        padded[(r, c)] = v;
    }
    Ok(fft.forward_real(&padded))
}

impl BlurOperator {
    pub fn new(kernel: Array2<f64>, height: usize, width: usize) -> Result<Self> {
        if kernel.is_empty() || kernel.iter().any(|v| !v.is_finite()) {
            return Err(RestoreError::InvalidParameter("blur kernel must be nonempty and finite".into()));
        }
        let sum = kernel.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RestoreError::InvalidParameter(format!("blur kernel sums to {}, not 1", sum)));
        }
        let fft = Fft2::new(height, width);
        let otf = psf_to_otf(&kernel, height, width, &fft)?;
        Ok(Self { kernel, otf, fft })
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn dim(&self) -> (usize, usize) {
        self.otf.dim()
    }

    pub fn otf(&self) -> &Array2<Complex64> {
        &self.otf
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        if x.dim() != self.dim() {
            let (h, w) = self.dim();
            return Err(RestoreError::ShapeMismatch {
                expected: (h, w, 1),
                actual: (x.nrows(), x.ncols(), 1),
            });
        }
        Ok(())
    }

    fn filter(&self, x: &Array2<f64>, conjugate: bool) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut f = self.fft.forward_real(x);
        ndarray::Zip::from(&mut f).and(&self.otf).for_each(|v, &k| {
            *v *= if conjugate { k.conj() } else { k };
        });
        Ok(self.fft.inverse_real(f))
    }

    pub fn apply_plane(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.filter(x, false)
    }

    /// Correlation with the kernel (multiplication by the conjugate OTF).
    pub fn adjoint_plane(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        self.filter(y, true)
    }

    /// Exact minimizer of `1/2 ||b - A z||^2 + mu/2 ||z - q||^2`.
    pub fn solve_regularized(&self, b: &Array2<f64>, q: &Array2<f64>, mu: f64) -> Result<Array2<f64>> {
        self.check(b)?;
        self.check(q)?;
        let fb = self.fft.forward_real(b);
        let mut fq = self.fft.forward_real(q);
        ndarray::Zip::from(&mut fq).and(&fb).and(&self.otf).for_each(|z, &b, &k| {
            *z = (k.conj() * b + *z * mu) / (k.norm_sqr() + mu);
        });
        Ok(self.fft.inverse_real(fq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degradation::kernels::make_uniform_kernel;

    #[test]
    fn matches_direct_circular_convolution() {
        let kernel = Array2::from_shape_vec((3, 3), vec![0.0, 0.1, 0.0, 0.2, 0.3, 0.1, 0.05, 0.05, 0.2]).unwrap();
        let (h, w) = (5, 7);
        let x = Array2::from_shape_fn((h, w), |(i, j)| ((i * 31 + j * 17) % 11) as f64);
        let op = BlurOperator::new(kernel.clone(), h, w).unwrap();
        let y = op.apply_plane(&x).unwrap();
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let rr = (r + h + 1 - a) % h;
                        let cc = (c + w + 1 - b) % w;
                        acc += kernel[(a, b)] * x[(rr, cc)];
                    }
                }
                assert!((acc - y[(r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn preserves_mean() {
        let op = BlurOperator::new(make_uniform_kernel(9).unwrap(), 32, 32).unwrap();
        let x = Array2::from_shape_fn((32, 32), |(i, j)| ((i * i + 3 * j) % 256) as f64);
        let y = op.apply_plane(&x).unwrap();
        assert!((x.mean().unwrap() - y.mean().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn rejects_unnormalized_or_oversized_kernels() {
        assert!(BlurOperator::new(Array2::from_elem((3, 3), 1.0), 8, 8).is_err());
        assert!(BlurOperator::new(make_uniform_kernel(9).unwrap(), 8, 8).is_err());
    }

    #[test]
    fn identity_kernel_solve_is_elementwise() {
        let op = BlurOperator::new(Array2::from_elem((1, 1), 1.0), 4, 4).unwrap();
        let b = Array2::from_shape_fn((4, 4), |(i, j)| (i + j) as f64);
        let q = Array2::from_shape_fn((4, 4), |(i, j)| (i * j) as f64);
        let z = op.solve_regularized(&b, &q, 0.5).unwrap();
        for ((i, j), &v) in z.indexed_iter() {
            assert!((v - (b[(i, j)] + 0.5 * q[(i, j)]) / 1.5).abs() < 1e-12);
        }
    }
}
