//! Transition probabilities of the expanded chain.

use super::data::PanelData;
use super::params::{ChainParams, TransitionCoefs};
use super::spec::{ModelSpec, Transition};
use super::state::{StateSpace, TransitionProbs};
use crate::num::{logistic, softmax_into, Scalar};
use crate::{Error, Result};

/// Latent expanded states, area-major (`s[i * n_times + t]`, 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatentStates {
    n_areas: usize,
    n_times: usize,
    s: Vec<u8>,
}

impl LatentStates {
    pub fn new(n_areas: usize, n_times: usize, s: Vec<u8>) -> Result<Self> {
        if s.len() != n_areas * n_times {
            return Err(Error::Data("state matrix has the wrong size".into()));
        }
        Ok(Self { n_areas, n_times, s })
    }

    pub fn filled(n_areas: usize, n_times: usize, value: u8) -> Self {
        Self {
            n_areas,
            n_times,
            s: vec![value; n_areas * n_times],
        }
    }

    pub fn n_areas(&self) -> usize {
        self.n_areas
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> usize {
        self.s[i * self.n_times + t] as usize
    }

    #[inline]
    pub fn set(&mut self, i: usize, t: usize, s: usize) {
        self.s[i * self.n_times + t] = s as u8;
    }

    pub fn area(&self, i: usize) -> &[u8] {
        &self.s[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn area_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.s[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.s
    }

    /// Whether every area's path respects the clone corridors and stays
    /// within the state space.
    pub fn respects(&self, space: &StateSpace) -> bool {
        self.s.iter().all(|&s| (s as usize) < space.len())
            && (0..self.n_areas).all(|i| space.path_allowed(self.area(i)))
    }
}

/// `Σ_{j ∈ NE(i)} ω_ji · 1[S_j,t_prev is an outbreak state]`.
pub fn neighbor_outbreak_sum<F: Scalar>(
    i: usize,
    t_prev: usize,
    states: &LatentStates,
    data: &PanelData<F>,
    space: &StateSpace,
) -> F {
    data.neighbors(i)
        .iter()
        .filter(|nb| space.is_outbreak(states.get(nb.area, t_prev)))
        .fold(F::zero(), |acc, nb| acc + nb.weight)
}

/// Linear predictor of one transition at `(i, t)`.
#[inline]
pub fn linear_predictor<F: Scalar>(
    coefs: &TransitionCoefs<F>,
    covariate_idx: &[usize],
    spatial: bool,
    cov_row: &[F],
    neighbor_sum: F,
) -> F {
    let mut eta = coefs.intercept;
    for (a, &q) in coefs.coefs.iter().zip(covariate_idx) {
        eta = eta + *a * cov_row[q];
    }
    if spatial {
        eta = eta + coefs.spatial * neighbor_sum;
    }
    eta
}

#[inline]
fn floor_positive<F: Scalar>(p: F) -> F {
    p.max(F::min_positive_value())
}

/// Free transition probabilities into time `t` for area `i`, given the
/// neighbour outbreak sum at `t - 1`.
pub fn transition_probs<F: Scalar>(
    i: usize,
    t: usize,
    chain: &ChainParams<F>,
    spec: &ModelSpec,
    data: &PanelData<F>,
    neighbor_sum: F,
) -> TransitionProbs<F> {
    let row = data.covariates().row(i, t);
    let eta = |tr: Transition| {
        let terms = spec.terms(tr);
        linear_predictor(chain.get(tr), &terms.covariates, terms.spatial, row, neighbor_sum)
    };
    let eta33 = eta(Transition::Persistence);
    let eta23 = eta(Transition::OutbreakEmergence);
    let zero = F::zero();
    if spec.states.has_absence() {
        let eta12 = eta(Transition::Emergence);
        let eta21 = eta(Transition::Extinction);
        let mut out = [zero; 3];
        softmax_into(&[eta21, zero, eta23], &mut out);
        TransitionProbs {
            p12: floor_positive(logistic(eta12)),
            p11: floor_positive(logistic(-eta12)),
            p21: floor_positive(out[0]),
            p22: floor_positive(out[1]),
            p23: floor_positive(out[2]),
            p33: floor_positive(logistic(eta33)),
            p32: floor_positive(logistic(-eta33)),
        }
    } else {
        TransitionProbs {
            p12: zero,
            p11: zero,
            p21: zero,
            p22: floor_positive(logistic(-eta23)),
            p23: floor_positive(logistic(eta23)),
            p33: floor_positive(logistic(eta33)),
            p32: floor_positive(logistic(-eta33)),
        }
    }
}

/// Transitions whose predictors set the free probabilities out of `from`
/// (empty for deterministic clone rows).
pub fn governing_transitions(space: &StateSpace, from: usize) -> &'static [Transition] {
    if space.has_absence() && from == 0 {
        &[Transition::Emergence]
    } else if from == space.last_endemic() {
        if space.has_absence() {
            &[Transition::Extinction, Transition::OutbreakEmergence]
        } else {
            &[Transition::OutbreakEmergence]
        }
    } else if from == space.last_outbreak() {
        &[Transition::Persistence]
    } else {
        &[]
    }
}

/// `P(S*_it = to | S*_i(t-1) = from)` alone; equal bit for bit to the entry
/// of the full row from [`transition_probs`], but only the predictors of
/// `from`'s row are evaluated.
#[allow(clippy::too_many_arguments)]
pub fn transition_prob<F: Scalar>(
    i: usize,
    t: usize,
    from: usize,
    to: usize,
    chain: &ChainParams<F>,
    spec: &ModelSpec,
    data: &PanelData<F>,
    neighbor_sum: F,
) -> F {
    let ss = &spec.states;
    let zero = F::zero();
    let row = data.covariates().row(i, t);
    let eta = |tr: Transition| {
        let terms = spec.terms(tr);
        linear_predictor(chain.get(tr), &terms.covariates, terms.spatial, row, neighbor_sum)
    };
    let mut tp = TransitionProbs {
        p12: zero,
        p11: zero,
        p21: zero,
        p22: zero,
        p23: zero,
        p33: zero,
        p32: zero,
    };
    if ss.has_absence() && from == 0 {
        let e = eta(Transition::Emergence);
        tp.p12 = floor_positive(logistic(e));
        tp.p11 = floor_positive(logistic(-e));
    } else if from == ss.last_endemic() {
        let e23 = eta(Transition::OutbreakEmergence);
        if ss.has_absence() {
            let mut out = [zero; 3];
            softmax_into(&[eta(Transition::Extinction), zero, e23], &mut out);
            tp.p21 = floor_positive(out[0]);
            tp.p22 = floor_positive(out[1]);
            tp.p23 = floor_positive(out[2]);
        } else {
            tp.p22 = floor_positive(logistic(-e23));
            tp.p23 = floor_positive(logistic(e23));
        }
    } else if from == ss.last_outbreak() {
        let e = eta(Transition::Persistence);
        tp.p33 = floor_positive(logistic(e));
        tp.p32 = floor_positive(logistic(-e));
    }
    ss.prob(from, to, &tp)
}

/// Row of `Γ(S*_it | S_(-i)(t-1))` out of `from` for `t ≥ 1` (0-based).
pub fn transition_row<F: Scalar>(
    i: usize,
    t: usize,
    from: usize,
    chain: &ChainParams<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    data: &PanelData<F>,
) -> Result<Vec<F>> {
    if t == 0 {
        return Err(Error::Contract("transitions start at the second time point".into()));
    }
    if from >= spec.states.len() {
        return Err(Error::Contract(format!("state {from} out of range")));
    }
    let nsum = neighbor_outbreak_sum(i, t - 1, states, data, &spec.states);
    let tp = transition_probs(i, t, chain, spec, data, nsum);
    Ok(spec.states.row(from, &tp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariates, Neighbor, ParamVector};

    fn two_areas() -> PanelData<f64> {
        PanelData::new(
            vec!["a".into(), "b".into(), "c".into()],
            2,
            vec![0; 6],
            Covariates::empty(3, 2),
            vec![
                vec![Neighbor { area: 1, weight: 0.3 }, Neighbor { area: 2, weight: 0.2 }],
                vec![Neighbor { area: 0, weight: 0.56 }],
                vec![],
            ],
        )
        .unwrap()
    }

    #[test]
    fn neighbor_sums() {
        let d = two_areas();
        let ss = StateSpace::default();
        let mut st = LatentStates::filled(3, 2, 1);
        assert_eq!(neighbor_outbreak_sum(0, 0, &st, &d, &ss), 0.0);
        st.set(0, 0, 4);
        assert!((neighbor_outbreak_sum(1, 0, &st, &d, &ss) - 0.56).abs() < 1e-15);
        st.set(1, 0, 3);
        st.set(2, 0, 6);
        assert!((neighbor_outbreak_sum(0, 0, &st, &d, &ss) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_predictors_give_even_splits() {
        let d = two_areas();
        let spec = ModelSpec::coupled();
        let p = ParamVector::<f64>::zeros(&spec, 3);
        let st = LatentStates::filled(3, 2, 1);
        let row = transition_row(2, 1, 0, &p.chain, &spec, &st, &d).unwrap();
        assert_eq!(row, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let row = transition_row(2, 1, 2, &p.chain, &spec, &st, &d).unwrap();
        for k in [0, 2, 3] {
            assert!((row[k] - 1.0 / 3.0).abs() < 1e-15);
        }
        let row = transition_row(2, 1, 1, &p.chain, &spec, &st, &d).unwrap();
        assert_eq!(row, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(transition_row(2, 0, 1, &p.chain, &spec, &st, &d).is_err());
    }

    #[test]
    fn extreme_predictors_stay_normalized() {
        let d = two_areas();
        let spec = ModelSpec::coupled();
        let mut p = ParamVector::<f64>::zeros(&spec, 3);
        p.chain.get_mut(Transition::OutbreakEmergence).intercept = 800.0;
        p.chain.get_mut(Transition::Extinction).intercept = -800.0;
        let st = LatentStates::filled(3, 2, 1);
        let row = transition_row(0, 1, 2, &p.chain, &spec, &st, &d).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row[0] > 0.0 && row[2] > 0.0);
    }
}
