//! Predictive densities: the plain HMM forward recursion, the marginal and
//! partially marginalized one-step-ahead densities used by WAIC, and
//! posterior-predictive forecasting.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use super::draws::PosteriorDraws;
use super::waic::cell_index;
use crate::model::{
    emission_logdensity, neighbor_outbreak_sum, transition_probs, LatentStates, ModelSpec,
    PanelData, ParamLayout, ParamVector, Regime, StateSpace,
};
use crate::num::{quantile, to_f64, Scalar};
use crate::sampler::filter::{both_blocks, draw_index, run_filter, FilterWork};
use crate::{Error, Result};

/// Output of a forward pass: normalized filtered rows and one-step-ahead
/// predictive log densities (zero at the first time point).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass<F> {
    pub n_states: usize,
    pub filtered: Vec<F>,
    pub log_pred: Vec<F>,
}

impl<F: Scalar> ForwardPass<F> {
    pub fn row(&self, t: usize) -> &[F] {
        &self.filtered[t * self.n_states..(t + 1) * self.n_states]
    }
}

/// Textbook normalized forward recursion for a `k`-state HMM.
///
/// `trans(t, m)` fills the dense row-major matrix of moves into `t`;
/// `log_emis(t, e)` fills the state log densities at `t` (`t ≥ 1`).
/// Emissions are rescaled by their maximum before exponentiation.
pub fn hmm_forward<F, T, E>(init: &[F], n_times: usize, mut trans: T, mut log_emis: E) -> Result<ForwardPass<F>>
where
    F: Scalar,
    T: FnMut(usize, &mut [F]),
    E: FnMut(usize, &mut [F]),
{
    let k = init.len();
    let mut filtered = vec![F::zero(); n_times * k];
    let mut log_pred = vec![F::zero(); n_times];
    let mut m = vec![F::zero(); k * k];
    let mut le = vec![F::zero(); k];
    let mut pred = vec![F::zero(); k];
    let mut w = init.to_vec();
    for t in 0..n_times {
        if t > 0 {
            trans(t, &mut m);
            let prev = &filtered[(t - 1) * k..t * k];
            for s in 0..k {
                let mut acc = F::zero();
                for j in 0..k {
                    acc = acc + prev[j] * m[j * k + s];
                }
                pred[s] = acc;
            }
            log_emis(t, &mut le);
            let mx = le.iter().fold(F::neg_infinity(), |a, &b| if b > a { b } else { a });
            if mx == F::neg_infinity() || mx.is_nan() {
                return Err(Error::Degenerate { area: 0, time: t });
            }
            let mut c = F::zero();
            for s in 0..k {
                let v = (le[s] - mx).exp() * pred[s];
                w[s] = v;
                c = c + v;
            }
            log_pred[t] = mx + c.ln();
        }
        let total = w.iter().fold(F::zero(), |a, &b| a + b);
        if !(total > F::zero()) || !total.is_finite() {
            return Err(Error::Degenerate { area: 0, time: t });
        }
        for s in 0..k {
            filtered[t * k + s] = w[s] / total;
        }
    }
    Ok(ForwardPass {
        n_states: k,
        filtered,
        log_pred,
    })
}

/// Dense forward pass of area `i` with its neighbours' outbreak sums taken
/// from `states` (any sequence when the model is not coupled).
pub fn area_forward<F: Scalar>(
    i: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    params: &ParamVector<F>,
    states: Option<&LatentStates>,
) -> Result<ForwardPass<F>> {
    let ss = &spec.states;
    let k = ss.len();
    hmm_forward(
        &spec.initial_probs::<F>(i),
        data.n_times(),
        |t, m| {
            let nsum = states.map_or(F::zero(), |st| neighbor_outbreak_sum(i, t - 1, st, data, ss));
            let tp = transition_probs(i, t, &params.chain, spec, data, nsum);
            for from in 0..k {
                m[from * k..(from + 1) * k].copy_from_slice(&ss.row(from, &tp));
            }
        },
        |t, e| {
            for (s, slot) in e.iter_mut().enumerate() {
                *slot = emission_logdensity(i, t, s, &params.count, data, spec).expect("t ≥ 1");
            }
        },
    )
    .map_err(|err| match err {
        Error::Degenerate { time, .. } => Error::Degenerate { area: i, time },
        other => other,
    })
}

/// `log p(y_it | y_(1:t-1), v)` per area (rows) and time (columns, zero at
/// `t = 0`), marginalizing each area's chain exactly.
///
/// Only valid when no transition depends on neighbouring outbreaks: a
/// nonzero coupling coefficient is a contract violation.
pub fn marginal_loglik_forward<F: Scalar>(
    data: &PanelData<F>,
    spec: &ModelSpec,
    params: &ParamVector<F>,
) -> Result<Vec<Vec<F>>> {
    for tr in spec.active_transitions() {
        if spec.terms(tr).spatial && params.chain.get(tr).spatial != F::zero() {
            return Err(Error::Contract(format!(
                "transition {} is coupled to neighbours; use the partially marginalized density",
                tr.code()
            )));
        }
    }
    (0..data.n_areas())
        .map(|i| area_forward(i, data, spec, params, None).map(|f| f.log_pred))
        .collect()
}

/// `log p(y_it | S*_(-i)(1:t), y_i(1:t-1), v)` per area and time for one
/// joint draw of parameters and latent states.
pub fn partial_marginal_loglik<F: Scalar>(
    data: &PanelData<F>,
    spec: &ModelSpec,
    params: &ParamVector<F>,
    states: &LatentStates,
) -> Result<Vec<Vec<F>>> {
    let mut work = FilterWork::new();
    (0..data.n_areas())
        .map(|i| {
            run_filter(
                i,
                data,
                spec,
                states,
                params,
                |t| neighbor_outbreak_sum(i, t, states, data, &spec.states),
                |t| both_blocks(i, t, params, data, spec),
                &mut work,
            )?;
            Ok(work.log_pred.clone())
        })
        .collect()
}

/// `log p(y_it | S*_it, y_i(t-1), β)` at the drawn states (the conditional
/// variant; biased, kept for comparison only).
pub fn conditional_loglik<F: Scalar>(
    data: &PanelData<F>,
    spec: &ModelSpec,
    params: &ParamVector<F>,
    states: &LatentStates,
) -> Vec<Vec<F>> {
    (0..data.n_areas())
        .map(|i| {
            let mut row = vec![F::zero(); data.n_times()];
            for (t, slot) in row.iter_mut().enumerate().skip(1) {
                *slot = emission_logdensity(i, t, states.get(i, t), &params.count, data, spec)
                    .expect("t ≥ 1");
            }
            row
        })
        .collect()
}

/// Which pointwise density to build a WAIC matrix from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaicKind {
    /// Marginal forward for non-coupled models, partially marginalized otherwise.
    Marginalized,
    Conditional,
}

/// Draws × cells matrix of pointwise log densities from stored draws.
///
/// Each stored latent draw contributes one row together with the parameters
/// of the same iteration. Cells are ordered as in [`cell_index`].
pub fn pointwise_loglik<F: Scalar>(
    draws: &PosteriorDraws<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    layout: &ParamLayout,
    kind: WaicKind,
) -> Result<Vec<Vec<f64>>> {
    if draws.n_state_draws() == 0 {
        return Err(Error::Draws("no latent state draws stored".into()));
    }
    let nt = data.n_times();
    let mut rows = Vec::with_capacity(draws.n_state_draws());
    for (_, row, sd) in draws.state_draws() {
        let p = draws.param_vector(spec, layout, row)?;
        let m = match kind {
            WaicKind::Marginalized if spec.is_coupled() => {
                partial_marginal_loglik(data, spec, &p, &sd.states)?
            }
            WaicKind::Marginalized => marginal_loglik_forward(data, spec, &p)?,
            WaicKind::Conditional => conditional_loglik(data, spec, &p, &sd.states),
        };
        let mut flat = vec![0.0; data.n_areas() * (nt - 1)];
        for (i, area) in m.iter().enumerate() {
            for t in 1..nt {
                flat[cell_index(i, t, nt)] = to_f64(area[t]);
            }
        }
        rows.push(flat);
    }
    Ok(rows)
}

/// Negative binomial draw with mean `mean` and overdispersion `r`, as a
/// gamma-Poisson mixture.
pub fn sample_nb<R: Rng + ?Sized>(mean: f64, r: f64, rng: &mut R) -> u32 {
    if !(mean > 0.0) {
        return 0;
    }
    let lambda = match Gamma::new(r, mean / r) {
        Ok(g) => g.sample(rng),
        Err(_) => mean,
    };
    match Poisson::new(lambda) {
        Ok(p) => p.sample(rng) as u32,
        Err(_) => 0,
    }
}

/// Draws `y_it` given the state and the previous count.
pub fn sample_count<F: Scalar, R: Rng + ?Sized>(
    i: usize,
    t: usize,
    s: usize,
    y_prev: u32,
    params: &ParamVector<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    rng: &mut R,
) -> u32 {
    match spec.states.block(s) {
        None => 0,
        Some(b) => {
            let ep = params.count.block(b);
            let mean = to_f64(ep.mean(i, t, y_prev, data, spec));
            sample_nb(mean, to_f64(ep.r), rng)
        }
    }
}

/// Draws the next state of every area given the current slice.
pub fn step_states<F: Scalar, R: Rng + ?Sized>(
    t_cov: usize,
    current: &LatentStates,
    params: &ParamVector<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    rng: &mut R,
    out: &mut [u8],
) {
    let ss = &spec.states;
    let mut w = vec![0.0f64; ss.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let nsum = neighbor_outbreak_sum(i, 0, current, data, ss);
        let tp = transition_probs(i, t_cov, &params.chain, spec, data, nsum);
        let from = current.get(i, 0);
        for (s, v) in w.iter_mut().enumerate() {
            *v = to_f64(ss.prob(from, s, &tp));
        }
        *slot = draw_index(&w, rng) as u8;
    }
}

/// Simulated continuations of the fitted panel, one trajectory per stored
/// latent draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast<F> {
    pub n_draws: usize,
    pub n_areas: usize,
    pub horizon: usize,
    /// Last fitted time index (0-based).
    pub t_last: usize,
    /// Parameter row of each trajectory.
    pub params: Vec<Vec<F>>,
    states: Vec<u8>,
    counts: Vec<u32>,
}

/// Per-area, per-step forecast summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastSummary {
    pub area: usize,
    /// Steps ahead, starting at 1.
    pub step: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_outbreak: f64,
}

impl<F: Scalar> Forecast<F> {
    #[inline]
    fn at(&self, m: usize, step: usize, i: usize) -> usize {
        (m * self.horizon + step - 1) * self.n_areas + i
    }

    /// State of area `i` `step` steps ahead (1-based) in trajectory `m`.
    pub fn state(&self, m: usize, step: usize, i: usize) -> usize {
        self.states[self.at(m, step, i)] as usize
    }

    pub fn count(&self, m: usize, step: usize, i: usize) -> u32 {
        self.counts[self.at(m, step, i)]
    }

    /// Monte Carlo regime probabilities `[absence, endemic, outbreak]`.
    pub fn regime_probabilities(&self, space: &StateSpace, step: usize, i: usize) -> [f64; 3] {
        let mut c = [0usize; 3];
        for m in 0..self.n_draws {
            c[space.regime(self.state(m, step, i)).index()] += 1;
        }
        let n = self.n_draws as f64;
        let a = c[0] as f64 / n;
        let o = c[2] as f64 / n;
        [a, 1.0 - a - o, o]
    }

    /// Mean, central 95% interval and outbreak probability per area and step.
    pub fn summarize(&self, space: &StateSpace) -> Vec<ForecastSummary> {
        let mut out = Vec::with_capacity(self.n_areas * self.horizon);
        for i in 0..self.n_areas {
            for step in 1..=self.horizon {
                let mut ys: Vec<f64> = (0..self.n_draws).map(|m| self.count(m, step, i) as f64).collect();
                ys.sort_by(|a, b| a.total_cmp(b));
                let mean = ys.iter().sum::<f64>() / ys.len() as f64;
                out.push(ForecastSummary {
                    area: i,
                    step,
                    mean,
                    lower: quantile(&ys, 0.025),
                    upper: quantile(&ys, 0.975),
                    p_outbreak: self.regime_probabilities(space, step, i)[Regime::Outbreak.index()],
                });
            }
        }
        out
    }
}

/// Posterior-predictive simulation `horizon` steps past the fitted panel.
///
/// For every stored latent draw, all areas' states move jointly using the
/// simulated previous slice for the neighbour terms, then counts are drawn
/// given the new states and the previous (observed, then simulated) count.
/// `data` must share areas with the fit. Covariates are read at the
/// forecast time when the covariate table reaches it and held at their last
/// available value otherwise.
pub fn posterior_predictive<F: Scalar, R: Rng + ?Sized>(
    draws: &PosteriorDraws<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    layout: &ParamLayout,
    horizon: usize,
    rng: &mut R,
) -> Result<Forecast<F>> {
    if draws.n_state_draws() == 0 {
        return Err(Error::Draws("no latent state draws stored".into()));
    }
    if data.n_areas() != draws.n_areas || data.n_times() < draws.n_times {
        return Err(Error::Contract("panel does not cover the fitted data".into()));
    }
    let n = draws.n_areas;
    let t_last = draws.n_times - 1;
    let n_draws = draws.n_state_draws();
    let mut states = vec![0u8; n_draws * horizon * n];
    let mut counts = vec![0u32; n_draws * horizon * n];
    let mut rows = Vec::with_capacity(n_draws);
    let mut slice = LatentStates::filled(n, 1, 0);
    let mut next = vec![0u8; n];
    let mut y_prev = vec![0u32; n];
    for (m, (_, row, sd)) in draws.state_draws().enumerate() {
        let p = draws.param_vector(spec, layout, row)?;
        for i in 0..n {
            slice.set(i, 0, sd.states.get(i, t_last));
            y_prev[i] = data.count(i, t_last);
        }
        for step in 1..=horizon {
            let t_cov = (t_last + step).min(data.covariates().n_times() - 1);
            step_states(t_cov, &slice, &p, data, spec, rng, &mut next);
            for i in 0..n {
                let s = next[i] as usize;
                let y = sample_count(i, t_cov, s, y_prev[i], &p, data, spec, rng);
                let at = (m * horizon + step - 1) * n + i;
                states[at] = next[i];
                counts[at] = y;
                y_prev[i] = y;
                slice.set(i, 0, s);
            }
        }
        rows.push(row.to_vec());
    }
    Ok(Forecast {
        n_draws,
        n_areas: n,
        horizon,
        t_last,
        params: rows,
        states,
        counts,
    })
}

/// Log density of the observed counts at `t` under one forecast trajectory's
/// one-step states, summed over areas.
pub fn joint_emission_logdensity<F: Scalar>(
    forecast: &Forecast<F>,
    m: usize,
    p: &ParamVector<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    t: usize,
) -> F {
    (0..forecast.n_areas).fold(F::zero(), |acc, i| {
        acc + emission_logdensity(i, t, forecast.state(m, 1, i), &p.count, data, spec)
            .expect("t ≥ 1")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariates, Neighbor, Transition};

    fn panel(counts: Vec<u32>, n: usize, t: usize) -> PanelData<f64> {
        let ne = if n == 2 {
            vec![
                vec![Neighbor { area: 1, weight: 0.7 }],
                vec![Neighbor { area: 0, weight: 0.4 }],
            ]
        } else {
            vec![Vec::new(); n]
        };
        PanelData::new(
            (0..n).map(|i| format!("a{i}")).collect(),
            t,
            counts,
            Covariates::empty(n, t),
            ne,
        )
        .unwrap()
    }

    fn params(spec: &ModelSpec, n: usize) -> ParamVector<f64> {
        let mut p = ParamVector::zeros(spec, n);
        p.count.endemic.intercepts = vec![0.4; n];
        p.count.endemic.rho = 0.3;
        p.count.endemic.r = 5.0;
        p.count.outbreak.intercepts = vec![1.2; n];
        p.count.outbreak.rho = 0.6;
        p.count.outbreak.r = 15.0;
        for (k, tr) in Transition::ALL.into_iter().enumerate() {
            p.chain.get_mut(tr).intercept = -0.8 + 0.4 * k as f64;
        }
        p
    }

    #[test]
    fn single_count_state_reduces_to_the_emission() {
        let spec = ModelSpec::coupled().with_variant(crate::model::Variant::NoAbsenceClone);
        let d = panel(vec![3, 5, 2, 7], 1, 4);
        let mut p = params(&spec, 1);
        // make the outbreak regime unreachable and the endemic one absorbing
        p.chain.get_mut(Transition::OutbreakEmergence).intercept = -1e4;
        let mut init = vec![1.0, 0.0];
        let lp = hmm_forward(
            &init,
            4,
            |_, m| m.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]),
            |t, e| {
                e[0] = emission_logdensity(0, t, 0, &p.count, &d, &spec).unwrap();
                e[1] = emission_logdensity(0, t, 1, &p.count, &d, &spec).unwrap();
            },
        )
        .unwrap();
        for t in 1..4 {
            let direct = crate::model::nb_logpmf(d.count(0, t), p.count.endemic.mean(0, t, d.count(0, t - 1), &d, &spec), 5.0).unwrap();
            assert!((lp.log_pred[t] - direct).abs() < 1e-12);
        }
        init[0] = 0.5;
        assert!(hmm_forward(&init, 1, |_, _| {}, |_, _| {}).is_ok());
    }

    #[test]
    fn coupled_parameters_are_rejected() {
        let spec = ModelSpec::coupled();
        let d = panel(vec![1; 6], 2, 3);
        let mut p = params(&spec, 2);
        p.chain.get_mut(Transition::Persistence).spatial = 0.3;
        assert!(matches!(marginal_loglik_forward(&d, &spec, &p), Err(Error::Contract(_))));
    }

    #[test]
    fn nb_sampler_mean() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let (mean, r) = (6.5, 3.0);
        let xs: Vec<f64> = (0..n).map(|_| sample_nb(mean, r, &mut rng) as f64).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = mean + mean * mean / r;
        assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt());
        assert_eq!(sample_nb(0.0, r, &mut rng), 0);
    }
}
