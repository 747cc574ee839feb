//! Whole-image low-rank denoiser: group similar patches of each channel,
//! shrink every group's spectrum and average the groups back.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{RestoreError, Result};
use crate::imaging::Image;
use crate::patch_groups::{extract_reference_positions, Accumulator, GroupGeometry, PatchIndex};
use crate::shrinkage::{denoise_group_fast, RelaxationSpec, SingularSpectrum};

/// Groups are denoised in parallel batches of this many references and
/// aggregated in reference order, so the result does not depend on the
/// thread count.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserParams {
    pub geom: GroupGeometry,
    pub spec: RelaxationSpec,
    /// Per-group regularization strength.
    pub tau: f64,
    /// Shrink/reweight passes per group.
    pub inner_iters: usize,
}

pub const DEFAULT_INNER_ITERS: usize = 2;

/// `tau = lambda * K / (mu * N)` with `K = n_groups * c * B_s`.
pub fn compute_tau(lambda: f64, mu: f64, n_groups: usize, geom: &GroupGeometry, n_pixels: usize) -> Result<f64> {
    if mu == 0.0 || n_pixels == 0 {
        return Err(RestoreError::InvalidParameter("mu and the pixel count must be nonzero".into()));
    }
    if !(lambda >= 0.0 && mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(RestoreError::InvalidParameter(format!(
            "lambda = {} and mu = {} must be nonnegative and positive",
            lambda, mu
        )));
    }
    let k = n_groups as f64 * geom.group_size as f64 * geom.patch_dim() as f64;
    Ok(lambda * k / (mu * n_pixels as f64))
}

/// Number of groups built for an image of this size.
pub fn group_count(height: usize, width: usize, geom: &GroupGeometry) -> Result<usize> {
    Ok(extract_reference_positions(height, width, geom)?.len())
}

/// Denoise one channel. Returns the estimate and the shrunken spectrum of
/// every group, in reference order.
pub fn denoise_plane(r: &Array2<f64>, params: &DenoiserParams) -> Result<(Array2<f64>, Vec<SingularSpectrum>)> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(RestoreError::InvalidParameter("denoiser input has non-finite values".into()));
    }
    let (h, w) = r.dim();
    let geom = &params.geom;
    let positions = extract_reference_positions(h, w, geom)?;
    let index = PatchIndex::new(r, geom.patch_side)?;
    let mut acc = Accumulator::new(h, w);
    let mut spectra = Vec::with_capacity(positions.len());
    for batch in positions.chunks(BATCH) {
        let done = batch
            .par_iter()
            .map(|&pos| {
                let group = index.block_match(pos, geom)?;
                let (x, spectrum) = denoise_group_fast(&group.data, params.tau, &params.spec, params.inner_iters)?;
                Ok((x, group.origins, spectrum))
            })
            .collect::<Result<Vec<_>>>()?;
        for (x, origins, spectrum) in done {
            acc.add_group(&x, &origins)?;
            spectra.push(spectrum);
        }
    }
    Ok((acc.finish()?, spectra))
}

/// Denoise every channel independently with the same parameters.
pub fn denoise_image(r: &Image, params: &DenoiserParams) -> Result<(Image, Vec<Vec<SingularSpectrum>>)> {
    let mut planes = Vec::with_capacity(r.channels());
    let mut spectra = Vec::with_capacity(r.channels());
    for plane in r.planes() {
        let (x, s) = denoise_plane(plane, params)?;
        planes.push(x);
        spectra.push(s);
    }
    Ok((Image::from_planes(planes)?, spectra))
}
