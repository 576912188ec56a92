//! WAIC from pointwise predictive log densities.

use crate::num::Welford;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaicReport {
    pub lpdd: f64,
    pub pwaic: f64,
    pub waic: f64,
}

/// WAIC from a draws × cells matrix of log densities.
pub fn waic(per_draw: &[Vec<f64>]) -> Result<WaicReport> {
    if per_draw.len() < 2 {
        return Err(Error::Draws("WAIC needs at least two draws".into()));
    }
    let n_cells = per_draw[0].len();
    if per_draw.iter().any(|r| r.len() != n_cells) {
        return Err(Error::Contract("ragged log-density matrix".into()));
    }
    let mut acc = WaicAccumulator::new(n_cells);
    for row in per_draw {
        acc.push_row(row);
    }
    acc.report()
}

/// Column of cell `(i, t)`, `t ≥ 1`, in a pointwise matrix over a panel
/// with `n_times` time points (the first time point has no density).
#[inline]
pub fn cell_index(i: usize, t: usize, n_times: usize) -> usize {
    i * (n_times - 1) + t - 1
}

/// Online per-cell accumulator: running log-sum-exp and Welford variance.
/// Accumulators of independent chains merge exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct WaicAccumulator {
    log_sum: Vec<f64>,
    moments: Vec<Welford<f64>>,
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl WaicAccumulator {
    pub fn new(n_cells: usize) -> Self {
        Self {
            log_sum: vec![f64::NEG_INFINITY; n_cells],
            moments: vec![Welford::new(); n_cells],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.log_sum.len()
    }

    pub fn n_draws(&self) -> u64 {
        self.moments.first().map_or(0, |w| w.n)
    }

    #[inline]
    pub fn push(&mut self, cell: usize, value: f64) {
        self.log_sum[cell] = log_add_exp(self.log_sum[cell], value);
        self.moments[cell].push(value);
    }

    pub fn push_row(&mut self, row: &[f64]) {
        for (c, &v) in row.iter().enumerate() {
            self.push(c, v);
        }
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.n_cells() != other.n_cells() {
            return Err(Error::Contract("WAIC accumulators cover different cells".into()));
        }
        Ok(Self {
            log_sum: self
                .log_sum
                .iter()
                .zip(&other.log_sum)
                .map(|(&a, &b)| log_add_exp(a, b))
                .collect(),
            moments: self
                .moments
                .iter()
                .zip(&other.moments)
                .map(|(a, b)| a.merge(b))
                .collect(),
        })
    }

    /// Per-cell `(lpdd_c, pwaic_c)`.
    pub fn pointwise(&self) -> Vec<(f64, f64)> {
        self.log_sum
            .iter()
            .zip(&self.moments)
            .map(|(&ls, w)| (ls - (w.n as f64).ln(), w.sample_variance()))
            .collect()
    }

    pub fn report(&self) -> Result<WaicReport> {
        if self.n_draws() < 2 {
            return Err(Error::Draws("WAIC needs at least two draws".into()));
        }
        let (lpdd, pwaic) = self
            .pointwise()
            .into_iter()
            .fold((0.0, 0.0), |(a, b), (l, p)| (a + l, b + p));
        Ok(WaicReport {
            lpdd,
            pwaic,
            waic: -2.0 * (lpdd - pwaic),
        })
    }
}
