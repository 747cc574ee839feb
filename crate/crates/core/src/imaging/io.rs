use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use ndarray::Array2;

use super::{quantize_value, Image};
use crate::error::{RestoreError, Result};

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        other => Err(RestoreError::UnsupportedFormat(format!(
            "'{}' (expected .png, .pgm or .ppm)",
            other
        ))),
    }
}

/// Read an 8-bit PNG or binary PGM/PPM. Alpha channels are dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    let reader = if reader.format().is_none() {
        let mut r = reader;
        r.set_format(format);
        r
    } else {
        reader
    };
    let decoded = reader.decode().map_err(|e| RestoreError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let plane = Array2::from_shape_fn((h, w), |(r, c)| buf.get_pixel(c as u32, r as u32)[0] as f64);
            Ok(Image::gray(plane))
        }
        DynamicImage::ImageLumaA8(buf) => {
            let plane = Array2::from_shape_fn((h, w), |(r, c)| buf.get_pixel(c as u32, r as u32)[0] as f64);
            Ok(Image::gray(plane))
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let rgb = decoded.to_rgb8();
            let planes = (0..3)
                .map(|ch| Array2::from_shape_fn((h, w), |(r, c)| rgb.get_pixel(c as u32, r as u32)[ch] as f64))
                .collect();
            Image::from_planes(planes)
        }
        other => Err(RestoreError::UnsupportedFormat(format!(
            "{:?} in {} (only 8-bit gray or RGB is supported)",
            other.color(),
            path.display()
        ))),
    }
}

/// Write an image as 8-bit PNG or binary PGM/PPM, chosen by extension.
/// Values are clamped to `[0, 255]` and rounded half-to-even.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let (h, w, ch) = image.shape();
    let color = match ch {
        1 => ExtendedColorType::L8,
        3 => ExtendedColorType::Rgb8,
        n => {
            return Err(RestoreError::UnsupportedFormat(format!(
                "{} channels (only 1 or 3 can be saved)",
                n
            )))
        }
    };
    let mut bytes = Vec::with_capacity(h * w * ch);
    for r in 0..h {
        for c in 0..w {
            for p in image.planes() {
                bytes.push(quantize_value(p[[r, c]]) as u8);
            }
        }
    }
    let writer = BufWriter::new(File::create(path)?);
    let res = match format {
        ImageFormat::Png => {
            image::codecs::png::PngEncoder::new(writer).write_image(&bytes, w as u32, h as u32, color)
        }
        _ => {
            let subtype = if ch == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(writer)
                .with_subtype(subtype)
                .write_image(&bytes, w as u32, h as u32, color)
        }
    };
    res.map_err(|e| RestoreError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Image {
        Image::gray(Array2::from_shape_fn((h, w), |(r, c)| ((r * 31 + c * 7) % 256) as f64))
    }

    #[test]
    fn png_and_pgm_round_trip_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let img = ramp(13, 17);
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn color_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let planes = (0..3)
            .map(|k| Array2::from_shape_fn((5, 6), |(r, c)| ((r * 40 + c * 3 + k * 50) % 256) as f64))
            .collect();
        let img = Image::from_planes(planes).unwrap();
        for name in ["c.png", "c.ppm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            assert_eq!(load_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn pgm_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.pgm");
        let mut data = b"P5\n3 2\n255\n".to_vec();
        data.extend_from_slice(&[0, 1, 2, 128, 254, 255]);
        std::fs::write(&p, data).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.shape(), (2, 3, 1));
        assert_eq!(img.plane(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 2.0, 128.0, 254.0, 255.0]);
    }

    #[test]
    fn saving_clamps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clamp.png");
        let img = Image::gray(ndarray::array![[300.0, -20.0, 12.5]]);
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.plane(0), &ndarray::array![[255.0, 0.0, 12.0]]);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let img = ramp(2, 2);
        assert!(matches!(
            save_image(&img, "/tmp/x.tiff"),
            Err(RestoreError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn corrupt_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        std::fs::write(&p, b"definitely not a png").unwrap();
        assert!(load_image(&p).is_err());
    }
}
