use crate::error::{RestoreError, Result};

/// Rank surrogate applied to the singular values of a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelaxationFamily {
    /// `sum sigma_i`, unit weights.
    Nuclear,
    /// `sum w_i sigma_i` with inverse-magnitude weights.
    WeightedNuclear,
    /// Nuclear norm without the `truncation_rank` largest values.
    Truncated,
    /// Weighted nuclear norm without the `truncation_rank` largest values.
    WeightedTruncated,
    /// `sum sigma_i^p`, reweighted through the supergradient of `rho(rho(.))`.
    SchattenP,
    /// `sum w_i sigma_i^p` with inverse-magnitude weights.
    WeightedSchattenP,
}

impl RelaxationFamily {
    pub fn is_schatten(self) -> bool {
        matches!(self, Self::SchattenP | Self::WeightedSchattenP)
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, Self::Truncated | Self::WeightedTruncated)
    }

    pub fn is_inverse_weighted(self) -> bool {
        matches!(
            self,
            Self::WeightedNuclear | Self::WeightedTruncated | Self::WeightedSchattenP
        )
    }
}

/// Which surrogate is active and its constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationSpec {
    pub family: RelaxationFamily,
    /// Exponent in `(0, 1]`; only read by the Schatten families.
    pub p: f64,
    /// Number of leading singular values left unpenalized (truncated
    /// families only).
    pub truncation_rank: usize,
    /// Floor used where a weight would blow up at zero.
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.1;

impl RelaxationSpec {
    pub fn new(family: RelaxationFamily, p: f64, truncation_rank: usize, epsilon: f64) -> Result<Self> {
        let spec = Self {
            family,
            p,
            truncation_rank,
            epsilon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn nuclear() -> Self {
        Self {
            family: RelaxationFamily::Nuclear,
            p: 1.0,
            truncation_rank: 0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Reweighted Schatten-p surrogate, the default restoration prior.
    pub fn schatten(p: f64) -> Result<Self> {
        Self::new(RelaxationFamily::SchattenP, p, 0, DEFAULT_EPSILON)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(RestoreError::InvalidParameter(format!("p = {} is outside (0, 1]", self.p)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(RestoreError::InvalidParameter(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Exponent actually used by `rho`: `p` for Schatten families, 1 for the
    /// nuclear ones.
    pub fn exponent(&self) -> f64 {
        if self.family.is_schatten() {
            self.p
        } else {
            1.0
        }
    }
}

/// `rho(sigma)`: identity for nuclear families, `sigma^p` for Schatten ones.
pub fn rho_eval(spec: &RelaxationSpec, sigma: f64) -> f64 {
    let p = spec.exponent();
    if p == 1.0 {
        sigma
    } else {
        sigma.powf(p)
    }
}

/// `rho` at index `i`, zero on the truncated leading indices.
pub fn rho_at(spec: &RelaxationSpec, index: usize, sigma: f64) -> f64 {
    if spec.family.is_truncated() && index < spec.truncation_rank {
        0.0
    } else {
        rho_eval(spec, sigma)
    }
}

/// Supergradient of `rho`: `p * s^(p-1)`, evaluated at `max(s, epsilon)` so
/// that it stays finite at zero and nonincreasing in `s`.
pub fn rho_supergradient(spec: &RelaxationSpec, sigma: f64) -> f64 {
    let p = spec.exponent();
    if p == 1.0 {
        1.0
    } else {
        p * sigma.max(spec.epsilon).powf(p - 1.0)
    }
}

/// Reweighting step: weights for the next proximal pass computed from the
/// current singular values (nonincreasing in, nondecreasing out).
///
/// Nuclear and Schatten families use `d rho(rho(sigma_i))`; the weighted
/// families use `1 / (rho(sigma_i) + epsilon)`; truncated families zero the
/// `truncation_rank` leading weights.
pub fn update_weights(spec: &RelaxationSpec, values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if spec.family.is_truncated() && i < spec.truncation_rank {
                0.0
            } else if spec.family.is_inverse_weighted() {
                1.0 / (rho_eval(spec, s) + spec.epsilon)
            } else {
                rho_supergradient(spec, rho_eval(spec, s))
            }
        })
        .collect()
}

/// `rho(rho(sigma))` summed over a spectrum, the penalty minimized by the
/// reweighted group denoiser.
pub fn double_rho_penalty(spec: &RelaxationSpec, values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let inner = rho_at(spec, i, s);
            rho_at(spec, i, inner)
        })
        .sum()
}
