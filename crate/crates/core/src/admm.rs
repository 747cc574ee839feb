//! ADMM restoration loop.
//!
//! Splits `min_x 1/2 ||b - A x||^2 + lambda * prior(x)` with the constraint
//! `z = x` and a scaled multiplier `u`:
//!
//! ```text
//! z <- argmin_z 1/2 ||b - A z||^2 + mu/2 ||z - (x + u)||^2
//! x <- denoise(z - u)
//! u <- u - (z - x)
//! ```

use ndarray::{Array2, Zip};

use crate::degradation::{BlockCsOperator, BlurOperator, DegradationOp};
use crate::denoiser::{compute_tau, denoise_image, group_count, DenoiserParams, DEFAULT_INNER_ITERS};
use crate::error::{RestoreError, Result};
use crate::imaging::{psnr, Image};
use crate::patch_groups::GroupGeometry;
use crate::shrinkage::RelaxationSpec;

pub const DEFAULT_TOL: f64 = 5e-4;
pub const DEFAULT_GRAD_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub mu: f64,
    pub lambda: f64,
    pub max_outer_iters: usize,
    /// Stop once `||x_t+1 - x_t|| / ||x_t||` falls below this.
    pub tol: f64,
    pub geom: GroupGeometry,
    pub spec: RelaxationSpec,
    pub inner_iters: usize,
    /// Gradient steps per z-update (block CS only).
    pub grad_steps_per_outer: usize,
}

impl AdmmConfig {
    pub fn new(mu: f64, lambda: f64, max_outer_iters: usize, geom: GroupGeometry, spec: RelaxationSpec) -> Self {
        Self {
            mu,
            lambda,
            max_outer_iters,
            tol: DEFAULT_TOL,
            geom,
            spec,
            inner_iters: DEFAULT_INNER_ITERS,
            grad_steps_per_outer: DEFAULT_GRAD_STEPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(RestoreError::InvalidParameter(format!("mu = {} must be positive", self.mu)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(RestoreError::InvalidParameter(format!(
                "lambda = {} must be nonnegative",
                self.lambda
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(RestoreError::InvalidParameter("max_outer_iters must be at least 1".into()));
        }
        if self.grad_steps_per_outer == 0 {
            return Err(RestoreError::InvalidParameter("grad_steps_per_outer must be at least 1".into()));
        }
        if self.inner_iters == 0 {
            return Err(RestoreError::InvalidParameter("inner_iters must be at least 1".into()));
        }
        self.geom.validate()?;
        self.spec.validate()
    }

    /// Denoiser settings for an `height x width` image, with `tau` derived
    /// from `lambda`, `mu` and the group count.
    pub fn denoiser_params(&self, height: usize, width: usize) -> Result<DenoiserParams> {
        let n = group_count(height, width, &self.geom)?;
        Ok(DenoiserParams {
            geom: self.geom,
            spec: self.spec,
            tau: compute_tau(self.lambda, self.mu, n, &self.geom, height * width)?,
            inner_iters: self.inner_iters,
        })
    }
}

/// Iterates of the splitting.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub z: Image,
    pub u: Image,
    pub x: Image,
    pub iteration: usize,
    pub trace: Vec<TraceRecord>,
}

/// One record per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub relative_change: f64,
    /// `1/2 ||b - A x||^2`
    pub objective: f64,
    /// PSNR of the quantized iterate against the reference, if one was given.
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RestoreOutput {
    /// Final iterate clamped to `[0, 255]`.
    pub image: Image,
    /// Final iterate before clamping.
    pub raw: Image,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
}

/// `z_i = (a_i b_i + mu q_i) / (a_i + mu)` with `a_i` the 0/1 mask.
pub fn z_update_mask(b: &Array2<f64>, mask: &Array2<bool>, q: &Array2<f64>, mu: f64) -> Array2<f64> {
    let mut z = q.clone();
    Zip::from(&mut z).and(b).and(mask).for_each(|z, &b, &m| {
        if m {
            *z = (b + mu * *z) / (1.0 + mu);
        }
    });
    z
}

/// Frequency-domain solve of the blur z-subproblem.
pub fn z_update_blur(b: &Array2<f64>, op: &BlurOperator, q: &Array2<f64>, mu: f64) -> Result<Array2<f64>> {
    op.solve_regularized(b, q, mu)
}

fn sum_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Steepest descent on `1/2 ||b - A z||^2 + mu/2 ||z - q||^2` from `z_init`
/// with exact line search. `A^T A z` is carried along the iterates so each
/// step costs one forward and one adjoint application.
pub fn z_update_cs(
    b: &Array2<f64>,
    op: &BlockCsOperator,
    q: &Array2<f64>,
    mu: f64,
    steps: usize,
    z_init: &Array2<f64>,
) -> Result<Array2<f64>> {
    if steps == 0 {
        return Err(RestoreError::InvalidParameter("steps must be at least 1".into()));
    }
    let atb = op.adjoint_plane(b)?;
    let mut z = z_init.clone();
    let mut ataz = op.adjoint_plane(&op.apply_plane(&z)?)?;
    for _ in 0..steps {
        let mut d = &ataz - &atb;
        Zip::from(&mut d).and(&z).and(q).for_each(|d, &z, &q| *d += mu * (z - q));
        let dd = sum_sq(&d);
        if dd == 0.0 {
            break;
        }
        let ad = op.apply_plane(&d)?;
        let denom = sum_sq(&ad) + mu * dd;
        if denom == 0.0 {
            break;
        }
        let eta = dd / denom;
        z.scaled_add(-eta, &d);
        ataz.scaled_add(-eta, &op.adjoint_plane(&ad)?);
    }
    Ok(z)
}

fn median_of(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Starting point: masked pixels filled with the median of the observed
/// ones, `b` for blur, `A^T b` for block CS.
pub fn initial_z(b: &Image, op: &DegradationOp) -> Result<Image> {
    match op {
        DegradationOp::Mask(m) => {
            let planes = b
                .planes()
                .iter()
                .enumerate()
                .map(|(c, p)| {
                    let mask = m.mask(c);
                    let mut observed: Vec<f64> = p.iter().zip(mask.iter()).filter(|(_, &o)| o).map(|(&v, _)| v).collect();
                    let fill = median_of(&mut observed);
                    let mut z = p.clone();
                    Zip::from(&mut z).and(mask).for_each(|z, &o| {
                        if !o {
                            *z = fill;
                        }
                    });
                    z
                })
                .collect();
            Image::from_planes(planes)
        }
        DegradationOp::Blur(_) => Ok(b.clone()),
        DegradationOp::BlockCs(_) => op.adjoint(b),
    }
}

/// `1/2 ||b - A x||^2`
pub fn data_misfit(b: &Image, op: &DegradationOp, x: &Image) -> Result<f64> {
    let ax = op.apply(x)?;
    Ok(0.5
        * ax.planes()
            .iter()
            .zip(b.planes())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>())
}

fn norm(img: &Image) -> f64 {
    img.planes().iter().map(sum_sq).sum::<f64>().sqrt()
}

fn diff_norm(a: &Image, b: &Image) -> f64 {
    a.planes()
        .iter()
        .zip(b.planes())
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

fn check_shapes(b: &Image, op: &DegradationOp, reference: Option<&Image>) -> Result<(usize, usize, usize)> {
    let (h, w) = op.image_dim();
    let c = b.channels();
    let expected_b = match op {
        DegradationOp::BlockCs(cs) => cs.measurement_dim(),
        _ => (h, w),
    };
    if (b.height(), b.width()) != expected_b {
        return Err(RestoreError::ShapeMismatch {
            expected: (expected_b.0, expected_b.1, c),
            actual: b.shape(),
        });
    }
    if let Some(r) = reference {
        if r.shape() != (h, w, c) {
            return Err(RestoreError::ShapeMismatch {
                expected: (h, w, c),
                actual: r.shape(),
            });
        }
    }
    Ok((h, w, c))
}

impl AdmmState {
    pub fn new(b: &Image, op: &DegradationOp) -> Result<Self> {
        let z = initial_z(b, op)?;
        let u = z.map_planes(|p| Array2::zeros(p.dim()));
        Ok(Self {
            x: z.clone(),
            z,
            u,
            iteration: 0,
            trace: Vec::new(),
        })
    }

    /// One outer iteration. Returns the relative change of `x`.
    pub fn step(
        &mut self,
        b: &Image,
        op: &DegradationOp,
        config: &AdmmConfig,
        denoiser: &DenoiserParams,
        reference: Option<&Image>,
    ) -> Result<f64> {
        let t = self.iteration + 1;
        let mu = config.mu;
        let mut z_planes = Vec::with_capacity(b.channels());
        for c in 0..b.channels() {
            let q = self.x.plane(c) + self.u.plane(c);
            let z = match op {
                DegradationOp::Mask(m) => z_update_mask(b.plane(c), m.mask(c), &q, mu),
                DegradationOp::Blur(blur) => z_update_blur(b.plane(c), blur, &q, mu)?,
                DegradationOp::BlockCs(cs) => {
                    z_update_cs(b.plane(c), cs, &q, mu, config.grad_steps_per_outer, self.z.plane(c))?
                }
            };
            z_planes.push(z);
        }
        let z = Image::from_planes(z_planes)?;
        if !z.is_finite() {
            return Err(RestoreError::NonFinite {
                iteration: t,
                what: "z-update".into(),
            });
        }
        let r = Image::from_planes(z.planes().iter().zip(self.u.planes()).map(|(z, u)| z - u).collect())?;
        let (x, _) = denoise_image(&r, denoiser)?;
        if !x.is_finite() {
            return Err(RestoreError::NonFinite {
                iteration: t,
                what: "denoiser output".into(),
            });
        }
        let u = Image::from_planes(
            self.u
                .planes()
                .iter()
                .zip(z.planes())
                .zip(x.planes())
                .map(|((u, z), x)| u - &(z - x))
                .collect(),
        )?;
        let prev = norm(&self.x);
        let change = diff_norm(&x, &self.x) / if prev > 0.0 { prev } else { 1.0 };
        let objective = data_misfit(b, op, &x)?;
        let psnr = reference.map(|r| psnr(&x.quantized(), r)).transpose()?;
        self.trace.push(TraceRecord {
            iteration: t,
            relative_change: change,
            objective,
            psnr,
        });
        self.x = x;
        self.z = z;
        self.u = u;
        self.iteration = t;
        Ok(change)
    }
}

/// Run the ADMM loop until the relative change drops below `tol` or
/// `max_outer_iters` is reached.
pub fn restore(b: &Image, op: &DegradationOp, config: &AdmmConfig, reference: Option<&Image>) -> Result<RestoreOutput> {
    restore_with(b, op, config, reference, |_| {})
}

/// [`restore`] with a callback invoked after every outer iteration.
pub fn restore_with<F>(
    b: &Image,
    op: &DegradationOp,
    config: &AdmmConfig,
    reference: Option<&Image>,
    mut on_iteration: F,
) -> Result<RestoreOutput>
where
    F: FnMut(&TraceRecord),
{
    config.validate()?;
    if !b.is_finite() {
        return Err(RestoreError::NonFinite {
            iteration: 0,
            what: "observation".into(),
        });
    }
    let (h, w, _) = check_shapes(b, op, reference)?;
    let denoiser = config.denoiser_params(h, w)?;
    let mut state = AdmmState::new(b, op)?;
    let mut converged = false;
    while state.iteration < config.max_outer_iters {
        let change = state.step(b, op, config, &denoiser, reference)?;
        on_iteration(state.trace.last().expect("step records a trace entry"));
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(RestoreOutput {
        image: state.x.clamped(),
        raw: state.x,
        trace: state.trace,
        iterations: state.iteration,
        converged,
    })
}
