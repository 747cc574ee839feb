use ndarray::Array2;

use crate::error::{RestoreError, Result};
use crate::imaging::Image;

fn is_extremal(v: f64) -> bool {
    v == 0.0 || v == 255.0
}

/// Adaptive median filter for impulse noise.
///
/// For each pixel the window grows through odd sizes `3, 5, ...` (clipped at
/// the image border) until the window median lies strictly between the
/// window minimum and maximum, or `max_window` is reached. The pixel is
/// rejected when its value is not strictly inside `(min, max)` of the final
/// window, or when no window with a usable median was found. A rejected pixel
/// is flagged as an impulse only if its value is 0 or 255; flagged pixels are
/// replaced by the final window median.
///
/// Returns the filtered image and the observation mask (`true` = kept).
pub fn adaptive_median_filter(image: &Image, max_window: usize) -> Result<(Image, Vec<Array2<bool>>)> {
    if max_window < 3 || max_window % 2 == 0 {
        return Err(RestoreError::InvalidParameter(format!(
            "max window must be odd and at least 3, got {}",
            max_window
        )));
    }
    let mut planes = Vec::with_capacity(image.channels());
    let mut masks = Vec::with_capacity(image.channels());
    for plane in image.planes() {
        let (p, m) = filter_plane(plane, max_window);
        planes.push(p);
        masks.push(m);
    }
    Ok((Image::from_planes(planes)?, masks))
}

fn filter_plane(x: &Array2<f64>, max_window: usize) -> (Array2<f64>, Array2<bool>) {
    let (h, w) = x.dim();
    let mut out = x.clone();
    let mut mask = Array2::from_elem((h, w), true);
    let mut buf = Vec::with_capacity(max_window * max_window);
    for r in 0..h {
        for c in 0..w {
            let z = x[(r, c)];
            let mut side = 3;
            let (median, rejected) = loop {
                let half = side / 2;
                buf.clear();
                for rr in r.saturating_sub(half)..(r + half + 1).min(h) {
                    for cc in c.saturating_sub(half)..(c + half + 1).min(w) {
                        buf.push(x[(rr, cc)]);
                    }
                }
                let (lo, hi) = buf.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                let mid = (buf.len() - 1) / 2;
                let (_, &mut med, _) = buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
                if lo < med && med < hi {
                    break (med, !(lo < z && z < hi));
                }
                if side >= max_window {
                    break (med, true);
                }
                side += 2;
            };
            if rejected && is_extremal(z) {
                mask[(r, c)] = false;
                out[(r, c)] = median;
            }
        }
    }
    (out, mask)
}
