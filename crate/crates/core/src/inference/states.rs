//! Posterior probabilities of the collapsed regimes.

use std::ops::Range;

use super::draws::PosteriorDraws;
use crate::model::{ModelSpec, PanelData, Regime, StateSpace};
use crate::num::Scalar;
use crate::priors::PriorSpec;
use crate::sampler::{gibbs_run, SamplerConfig};
use crate::{Error, Result};

/// `P(regime | y)` per area and time, estimated from stored latent draws.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProbSeries {
    pub n_areas: usize,
    /// First time index covered (0-based).
    pub t0: usize,
    pub n_times: usize,
    /// `[absence, endemic, outbreak]` per cell, area-major.
    probs: Vec<[f64; 3]>,
}

impl StateProbSeries {
    pub fn new(n_areas: usize, t0: usize, n_times: usize, probs: Vec<[f64; 3]>) -> Result<Self> {
        if probs.len() != n_areas * n_times {
            return Err(Error::Contract("state probability table has the wrong size".into()));
        }
        Ok(Self { n_areas, t0, n_times, probs })
    }

    /// Probabilities at absolute time `t`.
    pub fn get(&self, i: usize, t: usize) -> [f64; 3] {
        self.probs[i * self.n_times + (t - self.t0)]
    }

    pub fn outbreak(&self, i: usize, t: usize) -> f64 {
        self.get(i, t)[Regime::Outbreak.index()]
    }

    pub fn times(&self) -> Range<usize> {
        self.t0..self.t0 + self.n_times
    }

    /// Outbreak probabilities as an area-major matrix.
    pub fn outbreak_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n_areas)
            .map(|i| self.times().map(|t| self.outbreak(i, t)).collect())
            .collect()
    }
}

/// Empirical frequency of each regime at every `(i, t)` in `range`, over all
/// stored latent draws of all chains.
pub fn state_probabilities<F: Scalar>(
    draws: &PosteriorDraws<F>,
    range: Range<usize>,
    space: &StateSpace,
) -> Result<StateProbSeries> {
    let n = draws.n_state_draws();
    if n == 0 {
        return Err(Error::Draws("no latent state draws stored".into()));
    }
    if range.end > draws.n_times || range.is_empty() {
        return Err(Error::Contract(format!(
            "time range {range:?} outside 0..{}",
            draws.n_times
        )));
    }
    let len = range.len();
    let mut counts = vec![[0u64; 3]; draws.n_areas * len];
    for ch in &draws.chains {
        for sd in &ch.states {
            for i in 0..draws.n_areas {
                for t in range.clone() {
                    let r = space.regime(sd.states.get(i, t)).index();
                    counts[i * len + t - range.start][r] += 1;
                }
            }
        }
    }
    let probs = counts
        .into_iter()
        .map(|c| {
            let a = c[0] as f64 / n as f64;
            let o = c[2] as f64 / n as f64;
            // endemic as the complement keeps each triple summing to one
            [a, 1.0 - a - o, o]
        })
        .collect();
    StateProbSeries::new(draws.n_areas, range.start, len, probs)
}

/// Real-time regime probabilities: for each `t` in `times`, refit on the
/// counts up to and including `t` and keep only the posterior at `t`, as a
/// surveillance system would have seen it that week. Refit `t` uses seed
/// `cfg.seed + t`; `make_priors` builds priors on each truncated panel.
pub fn realtime_state_probabilities<P>(
    data: &PanelData<f64>,
    spec: &ModelSpec,
    make_priors: P,
    cfg: &SamplerConfig,
    times: Range<usize>,
) -> Result<StateProbSeries>
where
    P: Fn(&PanelData<f64>) -> Result<PriorSpec>,
{
    if times.is_empty() || times.start < 2 || times.end > data.n_times() {
        return Err(Error::Contract(format!(
            "real-time window {times:?} must lie within 2..{}",
            data.n_times()
        )));
    }
    let n = data.n_areas();
    let mut by_time = Vec::with_capacity(times.len());
    for t in times.clone() {
        let past = data.truncated(t + 1)?;
        let priors = make_priors(&past)?;
        let run_cfg = SamplerConfig {
            seed: cfg.seed.wrapping_add(t as u64),
            online_waic: false,
            ..cfg.clone()
        };
        let out = gibbs_run(&past, spec, &priors, &run_cfg)?;
        by_time.push(state_probabilities(&out.draws, t..t + 1, &spec.states)?);
    }
    let probs = (0..n)
        .flat_map(|i| by_time.iter().map(move |s| s.get(i, s.t0)))
        .collect();
    StateProbSeries::new(n, times.start, times.len(), probs)
}
