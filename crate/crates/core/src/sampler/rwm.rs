//! Adaptive random-walk Metropolis on one scalar coordinate.
//!
//! The proposal log-sd is nudged toward a target acceptance rate once per
//! adaptation window, with a step size that decays in the number of windows
//! seen so far. Adaptation stops for good once [`AdaptState::freeze`] is called.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptConfig {
    pub target: f64,
    /// Iterations per adaptation window.
    pub interval: usize,
    /// Step size at window `k` is `scale * k^-decay`.
    pub decay: f64,
    pub scale: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            target: 0.44,
            interval: 50,
            decay: 0.5,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptState {
    pub log_sd: f64,
    window_accepts: usize,
    window_len: usize,
    windows: usize,
    frozen: bool,
    pub total_accepts: u64,
    pub total_steps: u64,
}

impl AdaptState {
    pub fn new(initial_sd: f64) -> Self {
        Self {
            log_sd: initial_sd.ln(),
            window_accepts: 0,
            window_len: 0,
            windows: 0,
            frozen: false,
            total_accepts: 0,
            total_steps: 0,
        }
    }

    pub fn sd(&self) -> f64 {
        self.log_sd.exp()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.total_accepts as f64 / self.total_steps as f64
        }
    }

    /// Records one step and adapts at the end of a window.
    pub fn record(&mut self, accepted: bool, cfg: &AdaptConfig) {
        self.total_steps += 1;
        if accepted {
            self.total_accepts += 1;
        }
        if self.frozen {
            return;
        }
        self.window_len += 1;
        if accepted {
            self.window_accepts += 1;
        }
        if self.window_len >= cfg.interval {
            self.windows += 1;
            let rate = self.window_accepts as f64 / self.window_len as f64;
            let step = cfg.scale * (self.windows as f64).powf(-cfg.decay);
            self.log_sd += step * (rate - cfg.target);
            self.window_accepts = 0;
            self.window_len = 0;
        }
    }
}

/// One Metropolis step. `log_ratio(x')` returns `log π(x') - log π(x)`
/// (`-inf` to reject outright). Returns the new value and whether the move
/// was accepted.
pub fn adaptive_rwm_step<F, R, T>(
    current: F,
    mut log_ratio: T,
    adapt: &mut AdaptState,
    cfg: &AdaptConfig,
    rng: &mut R,
) -> (F, bool)
where
    F: Scalar,
    R: Rng + ?Sized,
    T: FnMut(F) -> F,
{
    let z: f64 = StandardNormal.sample(rng);
    let proposal = current + F::from_f64(adapt.sd() * z).unwrap();
    let u: f64 = rng.random();
    let lr = log_ratio(proposal);
    let accepted = lr.is_finite() && u.ln() < lr.to_f64().unwrap()
        || lr == F::infinity();
    adapt.record(accepted, cfg);
    if accepted {
        (proposal, true)
    } else {
        (current, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejection_keeps_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = AdaptState::new(1.0);
        let (x, acc) = adaptive_rwm_step(0.3f64, |_| f64::NEG_INFINITY, &mut a, &AdaptConfig::default(), &mut rng);
        assert_eq!(x, 0.3);
        assert!(!acc);
    }

    #[test]
    fn full_acceptance_grows_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = AdaptConfig::default();
        let mut a = AdaptState::new(0.5);
        let before = a.sd();
        let mut x = 0.0f64;
        for _ in 0..cfg.interval {
            x = adaptive_rwm_step(x, |_| 0.0, &mut a, &cfg, &mut rng).0;
        }
        assert!(a.sd() > before);
    }

    #[test]
    fn frozen_scale_does_not_move() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = AdaptConfig::default();
        let mut a = AdaptState::new(0.5);
        a.freeze();
        for _ in 0..200 {
            adaptive_rwm_step(0.0f64, |_| 0.0, &mut a, &cfg, &mut rng);
        }
        assert_eq!(a.sd(), 0.5);
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cfg = AdaptConfig::default();
        let mut a = AdaptState::new(0.1);
        let mut x = 3.0f64;
        for _ in 0..5_000 {
            x = adaptive_rwm_step(x, |y| 0.5 * (x * x - y * y), &mut a, &cfg, &mut rng).0;
        }
        a.freeze();
        let n = 100_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            x = adaptive_rwm_step(x, |y| 0.5 * (x * x - y * y), &mut a, &cfg, &mut rng).0;
            draws.push(x);
        }
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // autocorrelated draws: effective size is roughly n/4 for RWM at 0.44
        let se = (4.0 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }
}
