//! Stored posterior draws.

use crate::model::{LatentStates, ModelSpec, ParamLayout, ParamVector};
use crate::num::Scalar;
use crate::{Error, Result};

/// Latent states kept at one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDraw {
    /// 1-based sampler iteration.
    pub iteration: u32,
    pub states: LatentStates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws<F> {
    /// One row per kept iteration, columns in layout order.
    pub params: Vec<Vec<F>>,
    pub states: Vec<StateDraw>,
}

/// Draws of every chain plus the run settings needed to interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws<F> {
    pub names: Vec<String>,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub state_thin: usize,
    pub n_areas: usize,
    pub n_times: usize,
    pub n_states: usize,
    pub chains: Vec<ChainDraws<F>>,
}

impl<F: Scalar> PosteriorDraws<F> {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Kept parameter rows per chain.
    pub fn n_kept(&self) -> usize {
        self.chains.first().map_or(0, |c| c.params.len())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Draws of parameter `k`, one vector per chain.
    pub fn param_chains(&self, k: usize) -> Vec<Vec<F>> {
        self.chains
            .iter()
            .map(|c| c.params.iter().map(|row| row[k]).collect())
            .collect()
    }

    /// Every chain's draws of parameter `k`, concatenated.
    pub fn pooled(&self, k: usize) -> Vec<F> {
        self.chains
            .iter()
            .flat_map(|c| c.params.iter().map(move |row| row[k]))
            .collect()
    }

    /// Parameter row belonging to a stored state draw.
    pub fn params_at_iteration(&self, chain: usize, iteration: u32) -> Option<&[F]> {
        let it = iteration as usize;
        if it <= self.burn_in {
            return None;
        }
        self.chains[chain].params.get(it - self.burn_in - 1).map(|r| r.as_slice())
    }

    /// Rebuilds a structured parameter vector from a flat row.
    pub fn param_vector(&self, spec: &ModelSpec, layout: &ParamLayout, row: &[F]) -> Result<ParamVector<F>> {
        if layout.names() != self.names.as_slice() {
            return Err(Error::Draws("draw columns do not match the model layout".into()));
        }
        let mut p = ParamVector::zeros(spec, self.n_areas);
        p.assign_flat(layout, row);
        Ok(p)
    }

    /// `(chain, params, states)` for every stored state draw.
    pub fn state_draws(&self) -> impl Iterator<Item = (usize, &[F], &StateDraw)> + '_ {
        self.chains.iter().enumerate().flat_map(move |(c, ch)| {
            ch.states.iter().filter_map(move |sd| {
                self.params_at_iteration(c, sd.iteration).map(|p| (c, p, sd))
            })
        })
    }

    pub fn n_state_draws(&self) -> usize {
        self.chains.iter().map(|c| c.states.len()).sum()
    }

    /// Drops the first `n` kept rows of every chain (extra burn-in).
    pub fn discard(&mut self, n: usize) {
        self.burn_in += n;
        let cutoff = self.burn_in as u32;
        for c in &mut self.chains {
            c.params.drain(..n.min(c.params.len()));
            c.states.retain(|s| s.iteration > cutoff);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_lookup() {
        let d = PosteriorDraws::<f64> {
            names: vec!["a".into()],
            n_iterations: 5,
            burn_in: 2,
            seed: 0,
            state_thin: 1,
            n_areas: 1,
            n_times: 1,
            n_states: 7,
            chains: vec![ChainDraws {
                params: vec![vec![1.0], vec![2.0], vec![3.0]],
                states: vec![StateDraw {
                    iteration: 4,
                    states: LatentStates::filled(1, 1, 1),
                }],
            }],
        };
        assert_eq!(d.params_at_iteration(0, 3), Some(&[1.0][..]));
        assert_eq!(d.params_at_iteration(0, 2), None);
        let found: Vec<_> = d.state_draws().map(|(_, p, _)| p[0]).collect();
        assert_eq!(found, vec![2.0]);
    }
}
