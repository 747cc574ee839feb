use nalgebra::DMatrix;

use super::prox::scalar_prox;
use super::relaxation::{double_rho_penalty, update_weights, RelaxationSpec};
use crate::error::{RestoreError, Result};

/// Singular values of a group (nonincreasing) with the weights that
/// produced them (nondecreasing).
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Thin SVD of a group matrix, sorted by nonincreasing singular value.
#[derive(Debug, Clone)]
pub struct GroupSvd {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v_t: DMatrix<f64>,
}

impl GroupSvd {
    pub fn new(y: &DMatrix<f64>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(RestoreError::Svd("matrix has non-finite entries".into()));
        }
        let svd = nalgebra::linalg::SVD::try_new(y.clone(), true, true, f64::EPSILON, 0)
            .ok_or_else(|| RestoreError::Svd("SVD did not converge".into()))?;
        let u = svd.u.ok_or_else(|| RestoreError::Svd("missing U".into()))?;
        let v_t = svd.v_t.ok_or_else(|| RestoreError::Svd("missing V^T".into()))?;
        Ok(Self {
            u,
            singular_values: svd.singular_values.iter().copied().collect(),
            v_t,
        })
    }

    /// Singular values `delta_i(Y)`, nonincreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Apply the scalar prox with `xi_i = lambda * w_i` to each singular value.
    pub fn shrink(&self, weights: &[f64], spec: &RelaxationSpec, lambda: f64) -> Vec<f64> {
        shrink_values(&self.singular_values, weights, spec, lambda)
    }

    /// `U diag(values) V^T`, skipping zero values.
    pub fn reconstruct(&self, values: &[f64]) -> DMatrix<f64> {
        let (m, n) = (self.u.nrows(), self.v_t.ncols());
        let k = values.iter().rposition(|&s| s != 0.0).map_or(0, |i| i + 1);
        if k == 0 {
            return DMatrix::zeros(m, n);
        }
        let mut us = self.u.columns(0, k).into_owned();
        for (j, &s) in values[..k].iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.v_t.rows(0, k)
    }
}

/// Singular value decomposition obtained from the eigenvectors of the
/// smaller Gram matrix. The Gram matrix is reduced to tridiagonal form once;
/// all eigenvalues come from that form, and eigenvectors are computed only
/// for the leading values that survive shrinkage. Image groups usually keep
/// a handful of values out of sixty, so this is several times cheaper than
/// a full decomposition. Small singular values lose relative accuracy,
/// which does not matter once they are thresholded.
#[derive(Debug, Clone)]
pub struct GramSvd {
    /// The group, oriented so that it has no more columns than rows.
    a: DMatrix<f64>,
    /// Householder reflectors left in place by the tridiagonal reduction,
    /// column-major n x n followed by padding.
    reflectors: Vec<f64>,
    tau: Vec<f64>,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    /// Eigenvalues of the Gram matrix, ascending.
    eigenvalues: Vec<f64>,
    /// True when the tridiagonal form has a negligible off-diagonal entry.
    splits: bool,
    singular_values: Vec<f64>,
    transposed: bool,
}

/// Slack after every array handed to OpenBLAS. Some of its small-matrix
/// kernels (dsymv on older x86 code paths) read a few elements past the end
/// of the operands, which faults when an allocation ends on a page boundary.
const OVERREAD_PAD: usize = 512;

fn padded(data: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(data.len() + OVERREAD_PAD);
    v.extend_from_slice(data);
    v.resize(data.len() + OVERREAD_PAD, 0.0);
    v
}

fn lapack_check(info: i32, routine: &str) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(RestoreError::Svd(format!("{} failed with info = {}", routine, info)))
    }
}

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Parallelism lives in the group loop; keep BLAS itself single-threaded so
/// results do not depend on its thread pool.
fn single_threaded_blas() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    // SAFETY: plain setter with no preconditions, called once.
    ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
}

impl GramSvd {
    pub fn new(y: &DMatrix<f64>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(RestoreError::Svd("matrix has non-finite entries".into()));
        }
        single_threaded_blas();
        let transposed = y.ncols() > y.nrows();
        let a = if transposed { y.transpose() } else { y.clone() };
        let n = a.ncols();
        let mut reflectors = padded((a.transpose() * &a).as_slice());
        let mut diag = vec![0.0; n + OVERREAD_PAD];
        let mut offdiag = vec![0.0; n + OVERREAD_PAD];
        let mut tau = vec![0.0; n + OVERREAD_PAD];
        if n > 0 {
            let ni = n as i32;
            let mut work = vec![0.0; 32 * n + OVERREAD_PAD];
            let lwork = (32 * n) as i32;
            let mut info = 0;
            // SAFETY: every buffer has the length LAPACK documents for order n.
            unsafe {
                lapack::dsytrd(
                    b'L',
                    ni,
                    &mut reflectors,
                    ni,
                    &mut diag,
                    &mut offdiag,
                    &mut tau,
                    &mut work,
                    lwork,
                    &mut info,
                )
            };
            lapack_check(info, "dsytrd")?;
        }
        diag.truncate(n);
        offdiag.truncate(n.saturating_sub(1));
        tau.truncate(n.saturating_sub(1));
        let mut eig = diag.clone();
        let mut e = offdiag.clone();
        if n > 0 {
            let mut info = 0;
            // SAFETY: eig has length n and e length n - 1.
            unsafe { lapack::dsterf(n as i32, &mut eig, &mut e, &mut info) };
            lapack_check(info, "dsterf")?;
        }
        let singular_values = eig.iter().rev().map(|&l| l.max(0.0).sqrt()).collect();
        let splits = offdiag
            .iter()
            .enumerate()
            .any(|(i, &e)| e.abs() <= f64::EPSILON * (diag[i].abs() + diag[i + 1].abs()));
        Ok(Self {
            a,
            reflectors,
            tau,
            diag,
            offdiag,
            eigenvalues: eig,
            splits,
            singular_values,
            transposed,
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Orthonormal eigenvectors of the Gram matrix for its `k` largest
    /// eigenvalues, largest first.
    fn leading_vectors(&self, k: usize) -> Result<DMatrix<f64>> {
        let n = self.diag.len();
        let ni = n as i32;
        let mut work = vec![0.0; 5 * n + OVERREAD_PAD];
        let mut iwork = vec![0i32; 3 * n + OVERREAD_PAD];
        let mut info = 0;
        let (w, iblock, isplit) = if self.splits {
            // Bisection also reports how the matrix splits into blocks.
            let (mut m, mut nsplit) = (0i32, [0i32]);
            let mut w = vec![0.0; n];
            let mut iblock = vec![0i32; n];
            let mut isplit = vec![0i32; n];
            // SAFETY: buffers sized for order n as documented.
            unsafe {
                lapack::dstebz(
                    b'I',
                    b'B',
                    ni,
                    0.0,
                    0.0,
                    ni - k as i32 + 1,
                    ni,
                    0.0,
                    &self.diag,
                    &self.offdiag,
                    &mut m,
                    &mut nsplit,
                    &mut w,
                    &mut iblock,
                    &mut isplit,
                    &mut work,
                    &mut iwork,
                    &mut info,
                )
            };
            lapack_check(info, "dstebz")?;
            if m as usize != k {
                return Err(RestoreError::Svd(format!("dstebz returned {} of {} eigenvalues", m, k)));
            }
            (w, iblock, isplit)
        } else {
            (self.eigenvalues[n - k..].to_vec(), vec![1i32; k], vec![ni])
        };
        let mut z = vec![0.0; n * k + OVERREAD_PAD];
        let mut ifail = vec![0i32; k];
        // SAFETY: z is n x k column-major, w/iblock/isplit come from dstebz.
        unsafe {
            lapack::dstein(
                ni,
                &self.diag,
                &self.offdiag,
                k as i32,
                &w,
                &iblock,
                &isplit,
                &mut z,
                ni,
                &mut work,
                &mut iwork,
                &mut ifail,
                &mut info,
            )
        };
        lapack_check(info, "dstein")?;
        if n > 1 {
            let mut work = vec![0.0; 32 * k.max(1) + OVERREAD_PAD];
            let lwork = (32 * k.max(1)) as i32;
            // SAFETY: reflectors/tau are the dsytrd output for order n.
            unsafe {
                lapack::dormtr(
                    b'L',
                    b'L',
                    b'N',
                    ni,
                    k as i32,
                    &self.reflectors,
                    ni,
                    &self.tau,
                    &mut z,
                    ni,
                    &mut work,
                    lwork,
                    &mut info,
                )
            };
            lapack_check(info, "dormtr")?;
        }
        // Ascending within each block; put the largest first.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| w[j].total_cmp(&w[i]).then(i.cmp(&j)));
        Ok(DMatrix::from_fn(n, k, |r, c| z[order[c] * n + r]))
    }

    /// Rebuild with the singular values replaced by `values`.
    pub fn reconstruct(&self, values: &[f64]) -> Result<DMatrix<f64>> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        let factors: Vec<f64> = values
            .iter()
            .zip(&self.singular_values)
            .map(|(&s, &sigma)| {
                if s == sigma {
                    1.0
                } else if sigma > 0.0 {
                    s / sigma
                } else {
                    0.0
                }
            })
            .collect();
        let k = factors.iter().rposition(|&f| f != 0.0).map_or(0, |i| i + 1);
        let x = if k == 0 {
            DMatrix::zeros(m, n)
        } else {
            let v = self.leading_vectors(k)?;
            let mut scaled = &self.a * &v;
            for (j, &f) in factors[..k].iter().enumerate() {
                scaled.column_mut(j).scale_mut(f);
            }
            scaled * v.transpose()
        };
        Ok(if self.transposed { x.transpose() } else { x })
    }
}

/// `scalar_prox` with `xi_i = lambda * w_i` over a spectrum.
pub fn shrink_values(singular_values: &[f64], weights: &[f64], spec: &RelaxationSpec, lambda: f64) -> Vec<f64> {
    singular_values
        .iter()
        .zip(weights)
        .map(|(&d, &w)| scalar_prox(spec, lambda * w, d))
        .collect()
}

fn check_weights(weights: &[f64], rank: usize) -> Result<()> {
    if weights.len() != rank {
        return Err(RestoreError::InvalidParameter(format!(
            "expected {} weights, got {}",
            rank,
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(RestoreError::InvalidParameter("weights must be nonnegative".into()));
    }
    if weights.windows(2).any(|p| p[0] > p[1]) {
        return Err(RestoreError::InvalidParameter("weights must be nondecreasing".into()));
    }
    Ok(())
}

/// Weighted singular-value proximal step: shrink each singular value of `y`
/// with penalty `lambda * w_i` and rebuild on the same singular vectors.
pub fn weighted_sv_prox(
    y: &DMatrix<f64>,
    weights: &[f64],
    spec: &RelaxationSpec,
    lambda: f64,
) -> Result<(DMatrix<f64>, SingularSpectrum)> {
    check_weights(weights, y.nrows().min(y.ncols()))?;
    let svd = GroupSvd::new(y)?;
    let values = svd.shrink(weights, spec, lambda);
    let x = svd.reconstruct(&values);
    Ok((
        x,
        SingularSpectrum {
            values,
            weights: weights.to_vec(),
        },
    ))
}

/// Iteratively reweighted low-rank denoising of one group.
///
/// Starts from unit weights; each pass shrinks the singular values of `y`
/// and recomputes the weights from the shrunken spectrum. Because every pass
/// works on the same singular vectors of `y`, the SVD is computed once.
pub fn denoise_group(
    y: &DMatrix<f64>,
    lambda: f64,
    spec: &RelaxationSpec,
    inner_iters: usize,
) -> Result<(DMatrix<f64>, SingularSpectrum)> {
    if inner_iters == 0 {
        return Err(RestoreError::InvalidParameter("inner_iters must be at least 1".into()));
    }
    let svd = GroupSvd::new(y)?;
    let (values, weights) = reweighted_shrink(svd.singular_values(), lambda, spec, inner_iters);
    Ok((svd.reconstruct(&values), SingularSpectrum { values, weights }))
}

/// Same as [`denoise_group`] but decomposes through the Gram matrix.
pub fn denoise_group_fast(
    y: &DMatrix<f64>,
    lambda: f64,
    spec: &RelaxationSpec,
    inner_iters: usize,
) -> Result<(DMatrix<f64>, SingularSpectrum)> {
    if inner_iters == 0 {
        return Err(RestoreError::InvalidParameter("inner_iters must be at least 1".into()));
    }
    let svd = GramSvd::new(y)?;
    let (values, weights) = reweighted_shrink(svd.singular_values(), lambda, spec, inner_iters);
    Ok((svd.reconstruct(&values)?, SingularSpectrum { values, weights }))
}

/// The shrink/reweight loop on fixed singular values. Returns the final
/// values and the weights used to produce them.
pub fn reweighted_shrink(
    singular_values: &[f64],
    lambda: f64,
    spec: &RelaxationSpec,
    inner_iters: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut weights = vec![1.0; singular_values.len()];
    let mut values = shrink_values(singular_values, &weights, spec, lambda);
    for _ in 1..inner_iters {
        weights = update_weights(spec, &values);
        values = shrink_values(singular_values, &weights, spec, lambda);
    }
    (values, weights)
}

/// `1/2 ||Y - X||_F^2 + lambda * sum rho(rho(s_i))` for `X` sharing the
/// singular vectors of `Y`, evaluated from the two spectra.
pub fn surrogate_objective(y_values: &[f64], x_values: &[f64], spec: &RelaxationSpec, lambda: f64) -> f64 {
    let fit: f64 = y_values.iter().zip(x_values).map(|(d, s)| (d - s) * (d - s)).sum();
    0.5 * fit + lambda * double_rho_penalty(spec, x_values)
}

/// Surrogate objective after each shrink/reweight pass of
/// [`denoise_group`].
pub fn inner_objectives(y: &DMatrix<f64>, lambda: f64, spec: &RelaxationSpec, inner_iters: usize) -> Result<Vec<f64>> {
    let svd = GroupSvd::new(y)?;
    let sv = svd.singular_values();
    let mut out = Vec::with_capacity(inner_iters);
    let mut weights = vec![1.0; sv.len()];
    for _ in 0..inner_iters {
        let values = shrink_values(sv, &weights, spec, lambda);
        out.push(surrogate_objective(sv, &values, spec, lambda));
        weights = update_weights(spec, &values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shrinkage::relaxation::RelaxationFamily;

    fn lcg_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(m, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn zero_matrix_stays_zero() {
        let y = DMatrix::zeros(4, 6);
        let (x, _) = weighted_sv_prox(&y, &[1.0; 4], &RelaxationSpec::schatten(0.5).unwrap(), 1.0).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_weights_are_identity() {
        let y = lcg_matrix(5, 7, 3);
        let (x, _) = weighted_sv_prox(&y, &[0.0; 5], &RelaxationSpec::schatten(0.5).unwrap(), 3.0).unwrap();
        assert!((x - y).norm() < 1e-12);
    }

    #[test]
    fn diagonal_nuclear_example() {
        let y = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 1.0]);
        let (x, spec) = weighted_sv_prox(&y, &[1.0, 1.0], &RelaxationSpec::nuclear(), 1.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[9.0, 0.0, 0.0, 0.0]);
        assert!((x - expected).norm() < 1e-12);
        assert!((spec.values[0] - 9.0).abs() < 1e-12 && spec.values[1] == 0.0);
    }

    #[test]
    fn weights_are_validated() {
        let y = lcg_matrix(3, 4, 1);
        let spec = RelaxationSpec::nuclear();
        assert!(weighted_sv_prox(&y, &[1.0, 1.0], &spec, 1.0).is_err());
        assert!(weighted_sv_prox(&y, &[2.0, 1.0, 1.0], &spec, 1.0).is_err());
    }

    #[test]
    fn non_finite_input_is_an_svd_error() {
        let mut y = lcg_matrix(3, 4, 1);
        y[(1, 2)] = f64::NAN;
        assert!(matches!(
            weighted_sv_prox(&y, &[1.0; 3], &RelaxationSpec::nuclear(), 1.0),
            Err(RestoreError::Svd(_))
        ));
    }

    #[test]
    fn one_pass_is_unweighted_prox() {
        let y = lcg_matrix(6, 9, 11) * 10.0;
        let spec = RelaxationSpec::schatten(0.5).unwrap();
        let (a, _) = denoise_group(&y, 0.7, &spec, 1).unwrap();
        let (b, _) = weighted_sv_prox(&y, &[1.0; 6], &spec, 0.7).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn reweighting_matches_manual_composition() {
        let y = lcg_matrix(8, 12, 5) * 20.0;
        let spec = RelaxationSpec::schatten(2.0 / 3.0).unwrap();
        let (x3, s3) = denoise_group(&y, 1.3, &spec, 3).unwrap();

        let (_, s1) = weighted_sv_prox(&y, &[1.0; 8], &spec, 1.3).unwrap();
        let w1 = update_weights(&spec, &s1.values);
        let (_, s2) = weighted_sv_prox(&y, &w1, &spec, 1.3).unwrap();
        let w2 = update_weights(&spec, &s2.values);
        let (x, s) = weighted_sv_prox(&y, &w2, &spec, 1.3).unwrap();
        assert!((x3 - x).norm() < 1e-10);
        assert_eq!(s3.weights, s.weights);
    }

    #[test]
    fn rank_one_survives_small_penalty() {
        let u = DMatrix::from_fn(36, 1, |i, _| 1.0 + (i % 5) as f64);
        let v = DMatrix::from_fn(1, 60, |_, j| 2.0 + (j % 3) as f64);
        let y = &u * &v;
        let spec = RelaxationSpec::schatten(0.5).unwrap();
        let (x, s) = denoise_group(&y, 1e-3, &spec, 2).unwrap();
        assert!(s.values[1..].iter().all(|&v| v == 0.0));
        // The leading value loses only ~xi * p * sigma^(p-1).
        assert!((x - &y).norm() / y.norm() < 1e-6);
    }

    #[test]
    fn huge_penalty_zeroes_everything() {
        let y = lcg_matrix(6, 9, 2) * 5.0;
        let spec = RelaxationSpec::schatten(0.5).unwrap();
        let (x, _) = denoise_group(&y, 1e6, &spec, 2).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gram_path_matches_svd_path() {
        let spec = RelaxationSpec::schatten(0.5).unwrap();
        for (m, n) in [(64, 60), (36, 60), (16, 16)] {
            let low = lcg_matrix(m, 3, 1) * lcg_matrix(3, n, 2) * 80.0;
            let y = low + lcg_matrix(m, n, 3) * 5.0;
            let (a, sa) = denoise_group(&y, 20.0, &spec, 2).unwrap();
            let (b, sb) = denoise_group_fast(&y, 20.0, &spec, 2).unwrap();
            assert!((&a - &b).norm() <= 1e-8 * a.norm(), "{}x{}", m, n);
            for (x, y) in sa.values.iter().zip(&sb.values) {
                assert!((x - y).abs() < 1e-8 * (1.0 + x));
            }
        }
    }

    #[test]
    fn gram_path_identity_at_zero_penalty() {
        let y = lcg_matrix(64, 60, 9) * 100.0;
        let (x, _) = denoise_group_fast(&y, 0.0, &RelaxationSpec::schatten(0.5).unwrap(), 2).unwrap();
        assert!((x - &y).amax() < 1e-10);
    }

    #[test]
    fn truncated_family_keeps_leading_values() {
        let y = DMatrix::from_row_slice(3, 3, &[9.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 1.0]);
        let spec = RelaxationSpec::new(RelaxationFamily::Truncated, 1.0, 1, 0.1).unwrap();
        let (_, s) = denoise_group(&y, 2.0, &spec, 2).unwrap();
        assert!((s.values[0] - 9.0).abs() < 1e-12);
        assert!((s.values[1] - 2.0).abs() < 1e-12);
        assert_eq!(s.values[2], 0.0);
    }
}
