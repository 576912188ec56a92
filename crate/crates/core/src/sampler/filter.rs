//! Individual forward filtering / backward sampling of one area's chain.
//!
//! The filter conditions on every other area's current sequence. Besides the
//! usual emission and one-step prediction it multiplies in a forward product:
//! the probability of each dependent area's next move given whether this
//! area is in an outbreak. That factor only distinguishes outbreak from
//! non-outbreak states, so two values per time step suffice. Areas that no
//! other area listens to get no forward product and the recursion is plain
//! FFBS.

use rand::Rng;

use crate::model::{
    transition_probs, Block, ModelSpec, PanelData, ParamVector, StateSpace, TransitionProbs,
};
use crate::model::LatentStates;
use crate::model::emission::block_logdensity;
use crate::model::transition::{governing_transitions, neighbor_outbreak_sum, transition_prob};
use crate::num::{to_f64, Scalar};
use crate::{Error, Result};

/// Filtered probabilities of one area, `P(S*_it = s | other areas, y_i(1:t), v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredProbs<F> {
    n_states: usize,
    probs: Vec<F>,
    log_pred: Vec<F>,
}

impl<F: Scalar> FilteredProbs<F> {
    pub fn n_times(&self) -> usize {
        self.log_pred.len()
    }

    pub fn row(&self, t: usize) -> &[F] {
        &self.probs[t * self.n_states..(t + 1) * self.n_states]
    }

    /// `log Σ_s p(y_it | s) P(S*_it = s | S*_(-i)(1:t), y_i(1:t-1))`; zero at `t = 0`.
    pub fn log_predictive(&self, t: usize) -> F {
        self.log_pred[t]
    }

    pub fn log_predictives(&self) -> &[F] {
        &self.log_pred
    }
}

/// Reusable buffers for the filter.
#[derive(Debug, Clone, Default)]
pub struct FilterWork<F> {
    pub(crate) k: usize,
    pub(crate) probs: Vec<F>,
    pub(crate) log_pred: Vec<F>,
    pub(crate) tps: Vec<Option<TransitionProbs<F>>>,
    pred: Vec<F>,
    w: Vec<F>,
    back: Vec<f64>,
}

impl<F: Scalar> FilterWork<F> {
    pub fn new() -> Self {
        Self {
            k: 0,
            probs: Vec::new(),
            log_pred: Vec::new(),
            tps: Vec::new(),
            pred: Vec::new(),
            w: Vec::new(),
            back: Vec::new(),
        }
    }

    fn reset(&mut self, n_times: usize, k: usize) {
        self.k = k;
        self.probs.clear();
        self.probs.resize(n_times * k, F::zero());
        self.log_pred.clear();
        self.log_pred.resize(n_times, F::zero());
        self.tps.clear();
        self.tps.resize(n_times, None);
        self.pred.resize(k, F::zero());
        self.w.resize(k, F::zero());
    }

    pub fn to_filtered(&self) -> FilteredProbs<F> {
        FilteredProbs {
            n_states: self.k,
            probs: self.probs.clone(),
            log_pred: self.log_pred.clone(),
        }
    }
}

/// `out[s] = Σ_k f[k] P(k -> s)`, adding contributions in ascending `k` so
/// the result is bitwise identical to the dense matrix-vector product.
pub fn propagate<F: Scalar>(ss: &StateSpace, f: &[F], tp: &TransitionProbs<F>, out: &mut [F]) {
    out.iter_mut().for_each(|o| *o = F::zero());
    let fe = ss.first_endemic();
    let le = ss.last_endemic();
    let fo = ss.first_outbreak();
    let lo = ss.last_outbreak();
    if ss.has_absence() {
        out[0] = out[0] + f[0] * tp.p11;
        out[fe] = out[fe] + f[0] * tp.p12;
    }
    for k in fe..le {
        out[k + 1] = out[k + 1] + f[k];
    }
    if ss.has_absence() {
        out[0] = out[0] + f[le] * tp.p21;
    }
    out[le] = out[le] + f[le] * tp.p22;
    out[fo] = out[fo] + f[le] * tp.p23;
    for k in fo..lo {
        out[k + 1] = out[k + 1] + f[k];
    }
    out[fe] = out[fe] + f[lo] * tp.p32;
    out[lo] = out[lo] + f[lo] * tp.p33;
}

/// Whether row `s` carries free (parameter dependent) probabilities.
#[inline]
pub(crate) fn is_free_row(ss: &StateSpace, s: usize) -> bool {
    (ss.has_absence() && s == 0) || s == ss.last_endemic() || s == ss.last_outbreak()
}

/// Weighted outbreak sum of area `j` at `t`, with area `i`'s indicator forced.
#[inline]
pub(crate) fn neighbor_sum_forcing<F: Scalar>(
    j: usize,
    t: usize,
    states: &LatentStates,
    data: &PanelData<F>,
    ss: &StateSpace,
    i: usize,
    i_outbreak: bool,
) -> F {
    data.neighbors(j).iter().fold(F::zero(), |acc, nb| {
        let on = if nb.area == i {
            i_outbreak
        } else {
            ss.is_outbreak(states.get(nb.area, t))
        };
        if on {
            acc + nb.weight
        } else {
            acc
        }
    })
}

/// Log forward product at time `t` for area `i` being (outbreak, not outbreak).
///
/// Areas whose current row does not react to neighbours (no active, nonzero
/// coupling on its transitions) add the same term to both values and are
/// skipped.
fn log_forward_product<F: Scalar>(
    i: usize,
    t: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<F>,
) -> (F, F) {
    let ss = &spec.states;
    let mut lf_out = F::zero();
    let mut lf_not = F::zero();
    for inf in data.influenced_by(i) {
        let j = inf.area;
        let from = states.get(j, t);
        let coupled = governing_transitions(ss, from)
            .iter()
            .any(|&tr| spec.terms(tr).spatial && params.chain.get(tr).spatial != F::zero());
        if !coupled {
            continue;
        }
        let to = states.get(j, t + 1);
        let n_not = neighbor_sum_forcing(j, t, states, data, ss, i, false);
        let n_out = n_not + inf.weight;
        let p_not = transition_prob(j, t + 1, from, to, &params.chain, spec, data, n_not);
        let p_out = transition_prob(j, t + 1, from, to, &params.chain, spec, data, n_out);
        lf_not = lf_not + p_not.ln();
        lf_out = lf_out + p_out.ln();
    }
    (lf_out, lf_not)
}

/// Forward pass shared by the sampler and the public entry points.
///
/// `nsum(t)` gives area `i`'s neighbour outbreak sum at `t`; `emis(t)` the
/// endemic and outbreak log densities of `y_it` (`t ≥ 1`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_filter<F, N, E>(
    i: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<F>,
    nsum: N,
    emis: E,
    work: &mut FilterWork<F>,
) -> Result<()>
where
    F: Scalar,
    N: Fn(usize) -> F,
    E: Fn(usize) -> (F, F),
{
    let ss = &spec.states;
    let k = ss.len();
    let n_t = data.n_times();
    work.reset(n_t, k);
    let init = spec.initial_probs::<F>(i);
    let use_fp = spec.is_coupled() && !data.influenced_by(i).is_empty();
    let has_abs = ss.has_absence();
    let fo = ss.first_outbreak();

    for t in 0..n_t {
        if t == 0 {
            work.pred.copy_from_slice(&init);
            work.w.copy_from_slice(&init);
        } else {
            let tp = transition_probs(i, t, &params.chain, spec, data, nsum(t - 1));
            work.tps[t] = Some(tp);
            let (prev, _) = work.probs.split_at(t * k);
            propagate(ss, &prev[(t - 1) * k..], &tp, &mut work.pred);

            let (en, ob) = emis(t);
            let la = if data.count(i, t) == 0 { F::zero() } else { F::neg_infinity() };
            let mut m = if en > ob { en } else { ob };
            if has_abs && la > m {
                m = la;
            }
            if m == F::neg_infinity() || m.is_nan() {
                return Err(Error::Degenerate { area: i, time: t });
            }
            let e_abs = (la - m).exp();
            let e_en = (en - m).exp();
            let e_ob = (ob - m).exp();
            let mut c = F::zero();
            for s in 0..k {
                let e = if has_abs && s == 0 {
                    e_abs
                } else if s < fo {
                    e_en
                } else {
                    e_ob
                };
                let v = e * work.pred[s];
                work.w[s] = v;
                c = c + v;
            }
            work.log_pred[t] = m + c.ln();
        }

        if use_fp && t + 1 < n_t {
            let (lf_out, lf_not) = log_forward_product(i, t, data, spec, states, params);
            if lf_out != lf_not {
                let m = if lf_out > lf_not { lf_out } else { lf_not };
                let f_out = (lf_out - m).exp();
                let f_not = (lf_not - m).exp();
                for s in 0..k {
                    work.w[s] = work.w[s] * if s >= fo { f_out } else { f_not };
                }
            }
        }

        let total = work.w.iter().fold(F::zero(), |a, &b| a + b);
        if !(total > F::zero()) || !total.is_finite() {
            return Err(Error::Degenerate { area: i, time: t });
        }
        let row = &mut work.probs[t * k..(t + 1) * k];
        for s in 0..k {
            row[s] = work.w[s] / total;
        }
    }
    Ok(())
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (s, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = s;
            if u < acc {
                return s;
            }
        }
    }
    last
}

/// Backward sampling from a completed forward pass.
pub(crate) fn backward_sample<F: Scalar, R: Rng + ?Sized>(
    ss: &StateSpace,
    work: &mut FilterWork<F>,
    out: &mut [u8],
    rng: &mut R,
) {
    let k = work.k;
    let n_t = out.len();
    let mut back = std::mem::take(&mut work.back);
    back.clear();
    back.extend(work.probs[(n_t - 1) * k..n_t * k].iter().map(|&p| to_f64(p)));
    let mut next = draw_index(&back, rng);
    out[n_t - 1] = next as u8;
    for t in (0..n_t - 1).rev() {
        let tp = work.tps[t + 1].as_ref().expect("transition probabilities cached");
        let row = &work.probs[t * k..(t + 1) * k];
        for s in 0..k {
            back[s] = to_f64(row[s] * ss.prob(s, next, tp));
        }
        next = draw_index(&back, rng);
        out[t] = next as u8;
    }
    work.back = back;
}

/// Emission log densities of both count regimes at `(i, t)`.
#[inline]
pub(crate) fn both_blocks<F: Scalar>(
    i: usize,
    t: usize,
    params: &ParamVector<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
) -> (F, F) {
    (
        block_logdensity(i, t, Block::Endemic, &params.count, data, spec),
        block_logdensity(i, t, Block::Outbreak, &params.count, data, spec),
    )
}

/// Forward filter of area `i` given every other area's current sequence.
pub fn forward_filter_area<F: Scalar>(
    i: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<F>,
) -> Result<FilteredProbs<F>> {
    let mut work = FilterWork::new();
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
    Ok(work.to_filtered())
}

/// Backward-kernel probabilities `P(S*_it = s | S*_i(t+1) = next, ...)`
/// from a filtered row and the transition probabilities into `t + 1`.
pub fn backward_kernel<F: Scalar>(
    ss: &StateSpace,
    filtered_row: &[F],
    tp_next: &TransitionProbs<F>,
    next: usize,
) -> Vec<F> {
    let w: Vec<F> = (0..ss.len())
        .map(|s| filtered_row[s] * ss.prob(s, next, tp_next))
        .collect();
    let total = w.iter().fold(F::zero(), |a, &b| a + b);
    w.into_iter().map(|v| v / total).collect()
}

/// Exact draw of area `i`'s whole sequence from its full conditional.
pub fn iffbs_sample_area<F: Scalar, R: Rng + ?Sized>(
    i: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<F>,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let mut work = FilterWork::new();
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
    let mut out = vec![0u8; data.n_times()];
    backward_sample(&spec.states, &mut work, &mut out, rng);
    Ok(out)
}

/// Log probability that [`iffbs_sample_area`] returns `path`, computed from
/// the filter and the backward kernel (used to check the sampler exactly).
pub fn iffbs_sequence_logprob<F: Scalar>(
    i: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<F>,
    path: &[u8],
) -> Result<F> {
    let mut work = FilterWork::new();
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
    let k = work.k;
    let n_t = path.len();
    let ss = &spec.states;
    let mut lp = work.probs[(n_t - 1) * k + path[n_t - 1] as usize].ln();
    for t in (0..n_t - 1).rev() {
        let tp = work.tps[t + 1].as_ref().expect("cached");
        let kern = backward_kernel(ss, &work.probs[t * k..(t + 1) * k], tp, path[t + 1] as usize);
        lp = lp + kern[path[t] as usize].ln();
    }
    Ok(lp)
}
