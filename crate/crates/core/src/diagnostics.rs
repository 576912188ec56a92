//! Convergence diagnostics: split-chain potential scale reduction, effective
//! sample size, and the pass/fail gate applied before anything is reported.

use rayon::prelude::*;

use crate::inference::PosteriorDraws;
use crate::num::{to_f64, Scalar};
use crate::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_chains(chains: &[Vec<f64>]) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::Draws("at least two chains are needed".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Draws("chains have different lengths".into()));
    }
    if n < 10 {
        return Err(Error::Draws("chains need at least 10 draws".into()));
    }
    Ok(n)
}

/// Split-chain R-hat: every chain is halved and the halves are compared as
/// separate chains. Zero within- and between-chain variance gives 1.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains)?;
    let half = n / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..]])
        .collect();
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = mean(&halves.iter().map(|h| variance(h)).collect::<Vec<_>>());
    let b = half as f64 * variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let nf = half as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// Effective sample size with a flag for constant input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ess {
    pub ess: f64,
    pub degenerate: bool,
}

/// Autocovariance of `x` at `lag` (denominator `n`).
fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for t in 0..n - lag {
        acc += (x[t] - m) * (x[t + lag] - m);
    }
    acc / n as f64
}

/// Multi-chain ESS from combined autocorrelations, truncated with Geyer's
/// initial positive (monotone) sequence. Works with one chain too.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> Result<Ess> {
    if chains.is_empty() || chains[0].len() < 4 {
        return Err(Error::Draws("need at least one chain of 4 draws".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Draws("chains have different lengths".into()));
    }
    let m = chains.len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    if !(w > 0.0) {
        return Ok(Ess {
            ess: 0.0,
            degenerate: true,
        });
    }
    let nf = n as f64;
    let b_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    let rho = |lag: usize| {
        let ac = chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocov(c, mu, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - ac) / var_plus
    };
    // Geyer: sum pairs Γ_k = ρ_2k + ρ_2k+1 while positive, forcing them
    // to be non-increasing.
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        k += 1;
    }
    let total = (m * n) as f64;
    let tau = tau.max(1.0 / total.log10().max(1.0));
    Ok(Ess {
        ess: total / tau,
        degenerate: false,
    })
}

/// Diagnostics of one monitored parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDiagnostic {
    pub name: String,
    pub ess: f64,
    pub rhat: f64,
    pub degenerate: bool,
}

/// Thresholds of the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateRule {
    /// Pass requires every ESS strictly above this.
    pub min_ess: f64,
    /// Pass requires every R-hat strictly below this.
    pub max_rhat: f64,
}

impl Default for GateRule {
    fn default() -> Self {
        Self {
            min_ess: 1000.0,
            max_rhat: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub pass: bool,
    pub min_ess: f64,
    pub max_rhat: f64,
    /// Parameters failing either threshold.
    pub offending: Vec<ParamDiagnostic>,
}

/// R-hat and ESS of every parameter column.
pub fn diagnose<F: Scalar>(draws: &PosteriorDraws<F>) -> Result<Vec<ParamDiagnostic>> {
    (0..draws.names.len())
        .into_par_iter()
        .map(|k| {
            let chains: Vec<Vec<f64>> = draws
                .param_chains(k)
                .into_iter()
                .map(|c| c.into_iter().map(to_f64).collect())
                .collect();
            let ess = effective_sample_size(&chains)?;
            Ok(ParamDiagnostic {
                name: draws.names[k].clone(),
                ess: ess.ess,
                rhat: gelman_rubin(&chains)?,
                degenerate: ess.degenerate,
            })
        })
        .collect()
}

/// Applies the gate to precomputed diagnostics.
pub fn gate(diags: &[ParamDiagnostic], rule: &GateRule) -> GateReport {
    let offending: Vec<ParamDiagnostic> = diags
        .iter()
        .filter(|d| d.degenerate || !(d.ess > rule.min_ess) || !(d.rhat < rule.max_rhat))
        .cloned()
        .collect();
    GateReport {
        pass: offending.is_empty(),
        min_ess: diags.iter().map(|d| d.ess).fold(f64::INFINITY, f64::min),
        max_rhat: diags.iter().map(|d| d.rhat).fold(f64::NEG_INFINITY, f64::max),
        offending,
    }
}

/// Pass iff every parameter has ESS above 1000 and R-hat below 1.05.
pub fn convergence_gate<F: Scalar>(draws: &PosteriorDraws<F>) -> Result<GateReport> {
    Ok(gate(&diagnose(draws)?, &GateRule::default()))
}
