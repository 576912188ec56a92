//! Transmission constraints and the complete-data log-likelihood.

use super::data::PanelData;
use super::emission::emission_logdensity;
use super::params::{CountParams, ParamVector};
use super::spec::ModelSpec;
use super::transition::{transition_row, LatentStates};
use crate::num::{lit, Scalar};

/// Which identifiability constraint truncates the count parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind {
    /// Outbreak log-rate exceeds the endemic one at every observed cell.
    Strong,
    /// Only the intercepts are ordered.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    pub kind: ConstraintKind,
    /// Minimum log-rate gap (strong) or intercept gap (weak).
    pub eps_rate: f64,
    pub eps_rho: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self::strong()
    }
}

impl Constraints {
    pub fn strong() -> Self {
        Self {
            kind: ConstraintKind::Strong,
            eps_rate: 0.01,
            eps_rho: 0.05,
        }
    }

    pub fn weak() -> Self {
        Self {
            kind: ConstraintKind::Weak,
            eps_rate: 0.1,
            eps_rho: 0.05,
        }
    }
}

/// Checks the ordering of the endemic and outbreak transmission rates.
///
/// Strong mode checks every `(i, t)` with `t ≥ 1` (0-based) inside the
/// observed horizon.
pub fn constraints_satisfied<F: Scalar>(
    params: &CountParams<F>,
    data: &PanelData<F>,
    spec: &ModelSpec,
    c: &Constraints,
) -> bool {
    let en = &params.endemic;
    let ob = &params.outbreak;
    if !(en.rho + lit::<F>(c.eps_rho) < ob.rho) {
        return false;
    }
    let eps = lit::<F>(c.eps_rate);
    match c.kind {
        ConstraintKind::Weak => en
            .intercepts
            .iter()
            .zip(&ob.intercepts)
            .all(|(&a, &b)| a + eps < b),
        ConstraintKind::Strong => {
            if spec.emission_covariates.is_empty() {
                return en
                    .intercepts
                    .iter()
                    .zip(&ob.intercepts)
                    .all(|(&a, &b)| a + eps < b);
            }
            // Work with the gap directly: one pass over the covariate rows.
            let diffs: Vec<F> = en.coefs.iter().zip(&ob.coefs).map(|(&a, &b)| b - a).collect();
            (0..data.n_areas()).all(|i| {
                let base = ob.intercepts[i] - en.intercepts[i];
                (1..data.n_times()).all(|t| {
                    let row = data.covariates().row(i, t);
                    let mut gap = base;
                    for (d, &q) in diffs.iter().zip(&spec.emission_covariates) {
                        gap = gap + *d * row[q];
                    }
                    gap > eps
                })
            })
        }
    }
}

/// Complete-data log-likelihood `log p(y, S* | v)`.
///
/// Sums emissions and transitions over `t ≥ 1` (0-based) and the initial
/// state masses; returns `-inf` for impossible configurations.
pub fn joint_loglik<F: Scalar>(
    data: &PanelData<F>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<F>,
) -> F {
    let mut total = F::zero();
    for i in 0..data.n_areas() {
        let init = spec.initial_probs::<F>(i);
        total = total + init[states.get(i, 0)].ln();
        for t in 1..data.n_times() {
            let s = states.get(i, t);
            let e = emission_logdensity(i, t, s, &params.count, data, spec)
                .expect("indices validated by loop bounds");
            let row = transition_row(i, t, states.get(i, t - 1), &params.chain, spec, states, data)
                .expect("indices validated by loop bounds");
            total = total + e + row[s].ln();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::emission::nb_logpmf;
    use crate::model::{Covariates, Neighbor, Transition};

    fn panel(counts: Vec<u32>, n: usize, t: usize) -> PanelData<f64> {
        let beds: Vec<f64> = (0..n * t).map(|k| (k % 3) as f64 - 1.0).collect();
        let cov = Covariates::from_columns(n, t, vec![("beds".into(), beds)]).unwrap();
        let mut ne = vec![Vec::new(); n];
        if n > 1 {
            ne[0].push(Neighbor { area: 1, weight: 0.7 });
            ne[1].push(Neighbor { area: 0, weight: 0.4 });
        }
        PanelData::new((0..n).map(|i| format!("a{i}")).collect(), t, counts, cov, ne).unwrap()
    }

    fn params(spec: &ModelSpec, n: usize) -> ParamVector<f64> {
        let mut p = ParamVector::zeros(spec, n);
        p.count.endemic.intercepts = vec![0.2; n];
        p.count.endemic.rho = 0.4;
        p.count.endemic.r = 3.0;
        p.count.outbreak.intercepts = vec![1.1; n];
        p.count.outbreak.rho = 0.6;
        p.count.outbreak.r = 12.0;
        for (k, tr) in Transition::ALL.into_iter().enumerate() {
            let c = p.chain.get_mut(tr);
            c.intercept = -1.0 + 0.5 * k as f64;
            c.spatial = 0.8 - 0.3 * k as f64;
        }
        p
    }

    #[test]
    fn strong_and_weak_examples() {
        let spec = ModelSpec::coupled();
        let d = panel(vec![0; 6], 2, 3);
        let mut p = ParamVector::<f64>::zeros(&spec, 2);
        p.count.outbreak.intercepts = vec![0.02; 2];
        p.count.endemic.rho = 0.5;
        p.count.outbreak.rho = 0.6;
        let c = Constraints::strong();
        assert!(constraints_satisfied(&p.count, &d, &spec, &c));
        p.count.endemic.rho = 0.70;
        p.count.outbreak.rho = 0.74;
        assert!(!constraints_satisfied(&p.count, &d, &spec, &c));
        p.count.outbreak.rho = 0.8;
        p.count.outbreak.intercepts[1] = 0.005;
        assert!(!constraints_satisfied(&p.count, &d, &spec, &c));
        assert!(!constraints_satisfied(&p.count, &d, &spec, &Constraints::weak()));
    }

    #[test]
    fn strong_constraint_sees_covariates() {
        let mut spec = ModelSpec::coupled();
        spec.emission_covariates = vec![0];
        let d = panel(vec![0; 6], 2, 3);
        let mut p = ParamVector::<f64>::zeros(&spec, 2);
        p.count.outbreak.intercepts = vec![0.5; 2];
        p.count.outbreak.rho = 0.2;
        // gap = 0.5 - 0.6 x; x = 1 only occurs at t ≥ 1 cells, x = -1 only at t = 0
        p.count.outbreak.coefs = vec![-0.6];
        assert!(!constraints_satisfied(&p.count, &d, &spec, &Constraints::strong()));
        p.count.outbreak.coefs = vec![-0.4];
        assert!(constraints_satisfied(&p.count, &d, &spec, &Constraints::strong()));
    }

    #[test]
    fn single_transition_term_count() {
        let spec = ModelSpec::coupled();
        let d = panel(vec![1, 2], 1, 2);
        let p = params(&spec, 1);
        let st = LatentStates::new(1, 2, vec![2, 3]).unwrap();
        let e = nb_logpmf(2, (1.1f64 + 0.6 * 2f64.ln()).exp(), 12.0).unwrap();
        // one endemic-exit transition into the first outbreak clone
        let mut out = [0.0f64; 3];
        crate::num::softmax_into(&[-0.5, 0.0, 0.0], &mut out);
        let expect = (1.0f64 / 7.0).ln() + e + out[2].ln();
        assert!((joint_loglik(&d, &spec, &st, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn absence_with_positive_count_is_impossible() {
        let spec = ModelSpec::coupled();
        let d = panel(vec![0, 4], 1, 2);
        let p = params(&spec, 1);
        let st = LatentStates::new(1, 2, vec![0, 0]).unwrap();
        assert_eq!(joint_loglik(&d, &spec, &st, &p), f64::NEG_INFINITY);
    }

    #[test]
    fn corridor_violation_is_impossible() {
        let spec = ModelSpec::coupled();
        let d = panel(vec![1, 1, 1], 1, 3);
        let p = params(&spec, 1);
        let st = LatentStates::new(1, 3, vec![3, 1, 2]).unwrap();
        assert_eq!(joint_loglik(&d, &spec, &st, &p), f64::NEG_INFINITY);
    }
}
