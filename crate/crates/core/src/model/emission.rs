//! Count emission densities.

use super::data::PanelData;
use super::params::CountParams;
use super::spec::ModelSpec;
use super::state::Block;
use crate::num::{ln_gamma, Scalar};
use crate::{Error, Result};

/// Below this count `ln Γ(y + r) - ln Γ(r)` is summed term by term, which
/// avoids cancellation when `r` is large.
const RISING_FACTORIAL_MAX: u32 = 64;

/// Negative binomial log-pmf in mean/overdispersion form
/// (`Var = λ (1 + λ / r)`).
pub fn nb_logpmf<F: Scalar>(y: u32, mean: F, r: F) -> Result<F> {
    if !mean.is_finite() || !r.is_finite() {
        return Err(Error::Domain(format!("non-finite NB parameters (mean={mean}, r={r})")));
    }
    if !(mean > F::zero()) || !(r > F::zero()) {
        return Err(Error::Domain(format!("NB parameters must be positive (mean={mean}, r={r})")));
    }
    Ok(nb_logpmf_unchecked(y, mean, r))
}

/// [`nb_logpmf`] without argument checks, for hot loops.
#[inline]
pub fn nb_logpmf_unchecked<F: Scalar>(y: u32, mean: F, r: F) -> F {
    nb_log_normalizer(y, r) + nb_log_kernel(y, mean, r)
}

/// `ln Γ(y + r) - ln Γ(r) - ln y!`, the part that does not depend on the mean.
#[inline]
pub fn nb_log_normalizer<F: Scalar>(y: u32, r: F) -> F {
    if y == 0 {
        return F::zero();
    }
    let yf = F::from_u32(y).unwrap();
    let rising = if y <= RISING_FACTORIAL_MAX {
        let mut acc = F::zero();
        for k in 0..y {
            acc = acc + (r + F::from_u32(k).unwrap()).ln();
        }
        acc
    } else {
        ln_gamma(yf + r) - ln_gamma(r)
    };
    rising - ln_gamma(yf + F::one())
}

/// `r ln(r / (r + λ)) + y ln(λ / (r + λ))`.
#[inline]
pub fn nb_log_kernel<F: Scalar>(y: u32, mean: F, r: F) -> F {
    let head = -r * (mean / r).ln_1p();
    if y == 0 {
        head
    } else {
        let yf = F::from_u32(y).unwrap();
        head + yf * (mean.ln() - (r + mean).ln())
    }
}

/// Log density of the absence regime: a point mass at zero.
#[inline]
pub fn absence_logdensity<F: Scalar>(y: u32) -> F {
    if y == 0 {
        F::zero()
    } else {
        F::neg_infinity()
    }
}

/// NB log-density of `y_it` under one count regime.
#[inline]
pub fn block_logdensity<F: Scalar>(
    i: usize,
    t: usize,
    block: Block,
    params: &CountParams<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
) -> F {
    let p = params.block(block);
    let mean = p.mean(i, t, data.count(i, t - 1), data, spec);
    nb_logpmf_unchecked(data.count(i, t), mean, p.r)
}

/// `log p(y_it | S*_it = s, y_i(t-1), β)` for `t ≥ 1` (0-based).
///
/// Every clone of a block shares the same density.
pub fn emission_logdensity<F: Scalar>(
    i: usize,
    t: usize,
    s: usize,
    params: &CountParams<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
) -> Result<F> {
    if t == 0 {
        return Err(Error::Contract(
            "the first time point has no emission term".into(),
        ));
    }
    if t >= data.n_times() || i >= data.n_areas() {
        return Err(Error::Contract(format!("cell ({i}, {t}) out of range")));
    }
    if s >= spec.states.len() {
        return Err(Error::Contract(format!("state {s} out of range")));
    }
    Ok(match spec.states.block(s) {
        None => absence_logdensity(data.count(i, t)),
        Some(b) => block_logdensity(i, t, b, params, data, spec),
    })
}
