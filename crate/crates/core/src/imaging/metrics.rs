use super::Image;
use crate::error::Result;

/// Peak intensity of 8-bit images.
pub const PEAK: f64 = 255.0;

/// Mean squared error over all pixels and channels.
pub fn mse(x: &Image, reference: &Image) -> Result<f64> {
    x.check_same_shape(reference)?;
    let mut sum = 0.0;
    for (a, b) in x.planes().iter().zip(reference.planes()) {
        sum += a
            .iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>();
    }
    Ok(sum / (x.pixel_count() * x.channels()) as f64)
}

/// Peak signal-to-noise ratio in dB with peak 255.
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    let e = mse(x, reference)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / e).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn identical_is_infinite() {
        let a = Image::filled(4, 4, 1, 7.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn black_vs_white_is_zero_db() {
        let a = Image::filled(3, 5, 1, 0.0);
        let b = Image::filled(3, 5, 1, 255.0);
        assert!(psnr(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unit_mse() {
        let a = Image::filled(4, 4, 3, 10.0);
        let b = Image::filled(4, 4, 3, 11.0);
        let expected = 10.0 * 65025f64.log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn symmetric() {
        let a = Image::gray(Array2::from_shape_fn((8, 8), |(i, j)| (i * 8 + j) as f64));
        let b = Image::gray(Array2::from_shape_fn((8, 8), |(i, j)| (i * j) as f64 * 0.5));
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Image::filled(4, 4, 1, 0.0);
        let b = Image::filled(4, 5, 1, 0.0);
        assert!(psnr(&a, &b).is_err());
    }
}
