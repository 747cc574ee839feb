//! Blur kernel generators with the usual `fspecial` semantics.

use ndarray::Array2;

use crate::error::{RestoreError, Result};

/// Box kernel, every entry `1 / side^2`.
pub fn make_uniform_kernel(side: usize) -> Result<Array2<f64>> {
    if side == 0 || side % 2 == 0 {
        return Err(RestoreError::InvalidParameter(format!(
            "uniform kernel side must be odd, got {}",
            side
        )));
    }
    Ok(Array2::from_elem((side, side), 1.0 / (side * side) as f64))
}

/// Sampled isotropic Gaussian on a centered `side x side` grid, normalized
/// to unit sum. Entries below `eps * max` are zeroed first.
pub fn make_gaussian_kernel(side: usize, sigma: f64) -> Result<Array2<f64>> {
    if side == 0 || side % 2 == 0 {
        return Err(RestoreError::InvalidParameter(format!(
            "gaussian kernel side must be odd, got {}",
            side
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(RestoreError::InvalidParameter(format!("gaussian sigma must be positive, got {}", sigma)));
    }
    let c = (side / 2) as f64;
    let mut h = Array2::from_shape_fn((side, side), |(i, j)| {
        let (y, x) = (i as f64 - c, j as f64 - c);
        (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    });
    let max = h.iter().cloned().fold(0.0, f64::max);
    h.mapv_inplace(|v| if v < f64::EPSILON * max { 0.0 } else { v });
    let sum = h.sum();
    h.mapv_inplace(|v| v / sum);
    Ok(h)
}

/// Linear motion blur of `length` pixels at `angle_degrees` (counterclockwise
/// from horizontal), anti-aliased by perpendicular distance to the segment.
pub fn make_motion_kernel(length: f64, angle_degrees: f64) -> Result<Array2<f64>> {
    if !length.is_finite() || !angle_degrees.is_finite() {
        return Err(RestoreError::InvalidParameter("motion kernel parameters must be finite".into()));
    }
    let eps = f64::EPSILON;
    let len = length.max(1.0);
    let half = (len - 1.0) / 2.0;
    let phi = angle_degrees.rem_euclid(180.0) / 180.0 * std::f64::consts::PI;
    let (sinphi, cosphi) = phi.sin_cos();
    let xsign = if cosphi > 0.0 {
        1.0
    } else if cosphi < 0.0 {
        -1.0
    } else {
        0.0
    };
    let linewdt = 1.0;

    let sx = (half * cosphi + linewdt * xsign - len * eps).trunc();
    let sy = (half * sinphi + linewdt - len * eps).trunc();
    let xs: Vec<f64> = if xsign == 0.0 {
        Vec::new()
    } else {
        (0..=(sx / xsign) as i64).map(|k| k as f64 * xsign).collect()
    };
    let ys: Vec<f64> = (0..=sy.max(-1.0) as i64).map(|k| k as f64).collect();
    if xs.is_empty() || ys.is_empty() {
        return Ok(Array2::from_elem((1, 1), 1.0));
    }

    let quarter = Array2::from_shape_fn((ys.len(), xs.len()), |(i, j)| {
        let (x, y) = (xs[j], ys[i]);
        let mut dist = y * cosphi - x * sinphi;
        let rad = (x * x + y * y).sqrt();
        if rad >= half && dist.abs() <= linewdt {
            let x2last = half - ((x + dist * sinphi) / cosphi).abs();
            dist = (dist * dist + x2last * x2last).sqrt();
        }
        (linewdt + eps - dist.abs()).max(0.0)
    });

    // Unfold: the quarter rotated by 180 degrees in the top-left block and
    // the quarter itself in the bottom-right, sharing the center element.
    let (r, c) = quarter.dim();
    let mut h = Array2::zeros((2 * r - 1, 2 * c - 1));
    for i in 0..r {
        for j in 0..c {
            h[(i, j)] = quarter[(r - 1 - i, c - 1 - j)];
        }
    }
    for i in 0..r {
        for j in 0..c {
            h[(r - 1 + i, c - 1 + j)] = quarter[(i, j)];
        }
    }
    if cosphi > 0.0 {
        h.invert_axis(ndarray::Axis(0));
        h = h.as_standard_layout().into_owned();
    }
    let sum = h.sum();
    h.mapv_inplace(|v| v / sum);
    Ok(h)
}

/// Parse `uniform9`, `gaussian25:1.6`, `motion20:45` style kernel specs.
pub fn parse_kernel_spec(spec: &str) -> Result<Array2<f64>> {
    let bad = || RestoreError::InvalidParameter(format!("unrecognized kernel spec '{}'", spec));
    let lower = spec.trim().to_ascii_lowercase();
    let (name, rest) = lower
        .find(|c: char| c.is_ascii_digit())
        .map(|i| lower.split_at(i))
        .unwrap_or((lower.as_str(), ""));
    let mut nums = rest.split(':').filter(|s| !s.is_empty());
    let mut next = |default: f64| -> Result<f64> {
        match nums.next() {
            Some(s) => s.parse::<f64>().map_err(|_| bad()),
            None => Ok(default),
        }
    };
    match name {
        "uniform" | "box" => make_uniform_kernel(next(9.0)? as usize),
        "gaussian" => {
            let side = next(25.0)? as usize;
            make_gaussian_kernel(side, next(1.6)?)
        }
        "motion" => {
            let len = next(20.0)?;
            make_motion_kernel(len, next(45.0)?)
        }
        _ => Err(bad()),
    }
}
