//! Single-site Gibbs update of the latent states, kept as a baseline for the
//! block sampler. Each `S*_it` is drawn from its full conditional given the
//! rest of the panel; clone corridors make this chain mix slowly.

use rand::Rng;

use super::filter::draw_index;
use crate::model::{emission_logdensity, transition_row, LatentStates, ModelSpec, PanelData, ParamVector};
use crate::num::{to_f64, Scalar};

/// Log of the full conditional of `S*_it = s`, up to a constant.
pub fn site_log_conditional<F: Scalar>(
    i: usize,
    t: usize,
    s: usize,
    data: &PanelData<F>,
    spec: &ModelSpec,
    params: &ParamVector<F>,
    states: &mut LatentStates,
) -> F {
    let n_t = data.n_times();
    let old = states.get(i, t);
    states.set(i, t, s);
    let mut lp = if t == 0 {
        spec.initial_probs::<F>(i)[s].ln()
    } else {
        let row = transition_row(i, t, states.get(i, t - 1), &params.chain, spec, states, data)
            .expect("t ≥ 1");
        row[s].ln()
            + emission_logdensity(i, t, s, &params.count, data, spec).expect("t ≥ 1")
    };
    if t + 1 < n_t && lp > F::neg_infinity() {
        let row = transition_row(i, t + 1, s, &params.chain, spec, states, data).expect("t + 1 ≥ 1");
        lp = lp + row[states.get(i, t + 1)].ln();
        if spec.is_coupled() {
            for inf in data.influenced_by(i) {
                let j = inf.area;
                let row = transition_row(j, t + 1, states.get(j, t), &params.chain, spec, states, data)
                    .expect("t + 1 ≥ 1");
                lp = lp + row[states.get(j, t + 1)].ln();
            }
        }
    }
    states.set(i, t, old);
    lp
}

/// One sweep over every `(i, t)` in area-major order.
pub fn single_site_sweep<F: Scalar, R: Rng + ?Sized>(
    data: &PanelData<F>,
    spec: &ModelSpec,
    params: &ParamVector<F>,
    states: &mut LatentStates,
    rng: &mut R,
) {
    let k = spec.states.len();
    let mut lw = vec![0.0f64; k];
    for i in 0..data.n_areas() {
        for t in 0..data.n_times() {
            for (s, slot) in lw.iter_mut().enumerate() {
                *slot = to_f64(site_log_conditional(i, t, s, data, spec, params, states));
            }
            let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                continue;
            }
            for v in lw.iter_mut() {
                *v = (*v - m).exp();
            }
            let s = draw_index(&lw, rng);
            states.set(i, t, s);
        }
    }
}
