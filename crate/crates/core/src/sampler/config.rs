use super::rwm::AdaptConfig;
use crate::{Error, Result};

/// How each area's latent sequence is refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSampler {
    /// Whole-sequence draws (iFFBS, or FFBS for areas nobody listens to).
    Block,
    /// One state at a time. Only sensible without clone states; kept as a
    /// cross-check for the block sampler.
    SingleSite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Total iterations per chain, burn-in included.
    pub n_iterations: usize,
    pub burn_in: usize,
    /// Keep latent states every `state_thin` kept iterations.
    pub state_thin: usize,
    pub seed: u64,
    pub adapt: AdaptConfig,
    pub max_init_tries: usize,
    pub state_sampler: StateSampler,
    /// Clamp `v` at this flat vector (layout order) and sample states only.
    pub fixed_params: Option<Vec<f64>>,
    /// Accumulate WAIC ingredients after every kept iteration.
    pub online_waic: bool,
    /// Run chains on the rayon pool.
    pub parallel: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 3,
            n_iterations: 200_000,
            burn_in: 50_000,
            state_thin: 10,
            seed: 1,
            adapt: AdaptConfig::default(),
            max_init_tries: 10_000,
            state_sampler: StateSampler::Block,
            fixed_params: None,
            online_waic: false,
            parallel: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if self.burn_in >= self.n_iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if self.state_thin == 0 {
            return Err(Error::Config("state thinning must be at least 1".into()));
        }
        if self.n_iterations > u32::MAX as usize {
            return Err(Error::Config("too many iterations".into()));
        }
        if self.adapt.interval == 0 {
            return Err(Error::Config("adaptation interval must be positive".into()));
        }
        Ok(())
    }

    pub fn n_kept(&self) -> usize {
        self.n_iterations - self.burn_in
    }
}
