//! Multivariate log score of one-step-ahead forecasts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::predictive::{joint_emission_logdensity, posterior_predictive, Forecast};
use crate::model::{ModelSpec, PanelData, ParamLayout, ParamVector};
use crate::num::{log_sum_exp, to_f64, Scalar};
use crate::priors::PriorSpec;
use crate::sampler::{gibbs_run, SamplerConfig};
use crate::{Error, Result};

/// `-log p(y_t | y_(1:t-1)) / N`, approximating the joint predictive density
/// by averaging the product of emission densities over forecast draws.
///
/// `forecast` must start at `t - 1` (its first step is time `t`), and `data`
/// must contain the observed counts at `t`.
pub fn multivariate_log_score<F: Scalar>(
    forecast: &Forecast<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    layout: &ParamLayout,
    t: usize,
) -> Result<f64> {
    if forecast.n_draws == 0 {
        return Err(Error::Draws("empty forecast".into()));
    }
    if t != forecast.t_last + 1 || t >= data.n_times() {
        return Err(Error::Contract(format!(
            "forecast from time {} cannot score time {t}",
            forecast.t_last
        )));
    }
    let mut p = ParamVector::zeros(spec, data.n_areas());
    let terms: Vec<f64> = (0..forecast.n_draws)
        .map(|m| {
            p.assign_flat(layout, &forecast.params[m]);
            to_f64(joint_emission_logdensity(forecast, m, &p, data, spec, t))
        })
        .collect();
    let lse = log_sum_exp(&terms);
    Ok(-(lse - (forecast.n_draws as f64).ln()) / forecast.n_areas as f64)
}

/// Mean of a per-time score series.
pub fn mean_score(series: &[(usize, f64)]) -> f64 {
    series.iter().map(|&(_, s)| s).sum::<f64>() / series.len() as f64
}

/// Real-time scoring over the last `n_weeks` times: for each scored time
/// `t`, refit on the counts before `t`, forecast one step ahead and score
/// the observed counts at `t`. Each refit uses seed `cfg.seed + t`.
///
/// `make_priors` builds priors on each truncated panel.
pub fn realtime_scores<P>(
    data: &PanelData<f64>,
    spec: &ModelSpec,
    make_priors: P,
    cfg: &SamplerConfig,
    n_weeks: usize,
) -> Result<Vec<(usize, f64)>>
where
    P: Fn(&PanelData<f64>) -> Result<PriorSpec>,
{
    let nt = data.n_times();
    if n_weeks == 0 || n_weeks + 2 > nt {
        return Err(Error::Contract(format!("cannot score the last {n_weeks} of {nt} times")));
    }
    let layout = ParamLayout::new(spec, data);
    (nt - n_weeks..nt)
        .map(|t| {
            let past = data.truncated(t)?;
            let priors = make_priors(&past)?;
            let run_cfg = SamplerConfig {
                seed: cfg.seed.wrapping_add(t as u64),
                online_waic: false,
                ..cfg.clone()
            };
            let out = gibbs_run(&past, spec, &priors, &run_cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(run_cfg.seed ^ 0x5c0e);
            let fc = posterior_predictive(&out.draws, &past, spec, &layout, 1, &mut rng)?;
            Ok((t, multivariate_log_score(&fc, data, spec, &layout, t)?))
        })
        .collect()
}
