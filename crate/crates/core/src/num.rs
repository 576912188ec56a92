//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model, filtering and summary code is written against [`Scalar`], which
//! is implemented for `f32` and `f64`. Random draws are produced in `f64` and
//! converted, so a single RNG stream gives the same structural decisions for
//! either precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the model.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + std::str::FromStr
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 literal representable")
}

/// Converts a scalar back to `f64` (used at RNG and IO boundaries).
#[inline]
pub fn to_f64<F: Scalar>(x: F) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<F: Scalar>(x: F) -> F {
    let half = lit::<F>(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = F::PI();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(F::one() - x);
    }
    let x = x - F::one();
    let mut acc = lit::<F>(LANCZOS[0]);
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + lit::<F>(*c) / (x + lit::<F>(k as f64));
    }
    let t = x + lit::<F>(LANCZOS_G) + half;
    lit::<F>(0.918_938_533_204_672_8) + (x + half) * t.ln() - t + acc.ln()
}

/// `ln(Σ exp(v))` with max subtraction; `-inf` for empty or all `-inf` input.
pub fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let max = values
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == F::neg_infinity() {
        return max;
    }
    if max == F::infinity() {
        return max;
    }
    let sum: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Softmax of `scores` written into `out`, using max subtraction.
pub fn softmax_into<F: Scalar>(scores: &[F], out: &mut [F]) {
    let max = scores
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut total = F::zero();
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

/// Running mean and sample variance (Welford), mergeable across chains.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford<F> {
    pub n: u64,
    pub mean: F,
    pub m2: F,
}

impl<F: Scalar> Welford<F> {
    pub fn new() -> Self {
        Self {
            n: 0,
            mean: F::zero(),
            m2: F::zero(),
        }
    }

    pub fn push(&mut self, x: F) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / lit::<F>(self.n as f64);
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let nf = lit::<F>(n as f64);
        let na = lit::<F>(self.n as f64);
        let nb = lit::<F>(other.n as f64);
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * nb / nf,
            m2: self.m2 + other.m2 + delta * delta * na * nb / nf,
        }
    }

    /// Sample variance (n - 1 denominator); zero with fewer than two points.
    pub fn sample_variance(&self) -> F {
        if self.n < 2 {
            F::zero()
        } else {
            self.m2 / lit::<F>((self.n - 1) as f64)
        }
    }
}

/// Empirical quantile with linear interpolation (type 7).
pub fn quantile<F: Scalar>(sorted: &[F], p: f64) -> F {
    if sorted.is_empty() {
        return F::nan();
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = lit::<F>(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Γ(1) = Γ(2) = 1, Γ(5) = 24, Γ(0.5) = √π
        assert!(ln_gamma(1.0f64).abs() < 1e-14);
        assert!(ln_gamma(2.0f64).abs() < 1e-14);
        assert!((ln_gamma(5.0f64) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5f64) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
        // ln Γ(100.5) from mpmath
        assert!((ln_gamma(100.5f64) - 361.435_540_467_777_6).abs() < 1e-10);
        assert!((ln_gamma(3.0f32) - 2f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        let v = log_sum_exp(&[1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs = [1.0f64, 4.0, -2.0, 7.5, 3.25, 0.0];
        let mut all = Welford::new();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Welford::new();
        let mut b = Welford::new();
        xs[..2].iter().for_each(|&x| a.push(x));
        xs[2..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.sample_variance() - all.sample_variance()).abs() < 1e-12);
    }

    #[test]
    fn softmax_equal_scores() {
        let mut out = [0.0f64; 3];
        softmax_into(&[0.0, 0.0, 0.0], &mut out);
        for p in out {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
