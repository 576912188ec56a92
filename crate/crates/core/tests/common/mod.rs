#![allow(dead_code)]

pub mod props;

use cmsnb::model::{
    Covariates, LatentStates, ModelSpec, Neighbor, PanelData, ParamVector, Transition,
    TransitionTerms,
};

/// Two mutually coupled areas with one time-varying covariate.
pub fn two_area_panel(counts: Vec<u32>, n_times: usize) -> PanelData<f64> {
    let z: Vec<f64> = (0..2 * n_times).map(|k| ((k * 7) % 5) as f64 / 2.0 - 1.0).collect();
    let cov = Covariates::from_columns(2, n_times, vec![("z".into(), z)]).unwrap();
    PanelData::new(
        vec!["a".into(), "b".into()],
        n_times,
        counts,
        cov,
        vec![
            vec![Neighbor { area: 1, weight: 0.8 }],
            vec![Neighbor { area: 0, weight: 0.6 }],
        ],
    )
    .unwrap()
}

/// Full model: covariate in the counts and in every transition, coupling everywhere.
pub fn rich_spec() -> ModelSpec {
    let mut spec = ModelSpec::coupled();
    spec.emission_covariates = vec![0];
    spec.transitions = std::array::from_fn(|_| TransitionTerms {
        covariates: vec![0],
        spatial: true,
    });
    spec
}

pub fn rich_params(spec: &ModelSpec, n_areas: usize) -> ParamVector<f64> {
    let mut p = ParamVector::zeros(spec, n_areas);
    let en = &mut p.count.endemic;
    en.intercepts = vec![0.4; n_areas];
    en.coefs = vec![0.2];
    en.rho = 0.3;
    en.r = 5.0;
    let ob = &mut p.count.outbreak;
    ob.intercepts = vec![1.1; n_areas];
    ob.coefs = vec![0.1];
    ob.rho = 0.6;
    ob.r = 15.0;
    let set = |p: &mut ParamVector<f64>, tr, a: f64, b: f64, c: f64| {
        let t = p.chain.get_mut(tr);
        t.intercept = a;
        t.coefs = vec![b];
        t.spatial = c;
    };
    set(&mut p, Transition::Emergence, -0.5, 0.3, 0.9);
    set(&mut p, Transition::Extinction, -1.5, -0.4, -0.7);
    set(&mut p, Transition::OutbreakEmergence, -1.0, 0.5, 2.0);
    set(&mut p, Transition::Persistence, 1.0, 0.2, 1.3);
    p
}

/// Every length-`n` sequence over `k` symbols, in lexicographic order.
pub fn all_paths(k: usize, n: usize) -> Vec<Vec<u8>> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0u8; n];
            for slot in p.iter_mut().rev() {
                *slot = (code % k) as u8;
                code /= k;
            }
            p
        })
        .collect()
}

pub fn with_area(states: &LatentStates, i: usize, path: &[u8]) -> LatentStates {
    let mut s = states.clone();
    s.area_mut(i).copy_from_slice(path);
    s
}

pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact full conditional of area `i`'s sequence by brute force, as
/// `(path, probability)` pairs over every structurally possible path.
pub fn enumerate_conditional(
    i: usize,
    data: &PanelData<f64>,
    spec: &ModelSpec,
    states: &LatentStates,
    params: &ParamVector<f64>,
) -> Vec<(Vec<u8>, f64)> {
    let paths = all_paths(spec.states.len(), data.n_times());
    let lj: Vec<f64> = paths
        .iter()
        .map(|p| cmsnb::model::joint_loglik(data, spec, &with_area(states, i, p), params))
        .collect();
    let z = logsumexp(&lj);
    paths
        .into_iter()
        .zip(lj)
        .map(|(p, l)| (p, (l - z).exp()))
        .collect()
}

/// Two coupled areas: area 0 always absent, area 1 cycling through every state.
pub fn coupled_instance(n_times: usize) -> (PanelData<f64>, ModelSpec, cmsnb::Params, LatentStates) {
    let counts: Vec<u32> = [0, 2, 9, 14, 3, 1]
        .iter()
        .cycle()
        .take(n_times)
        .chain([1, 0, 6, 11, 2, 4].iter().cycle().take(n_times))
        .copied()
        .collect();
    let data = two_area_panel(counts, n_times);
    let spec = rich_spec();
    let params = rich_params(&spec, 2);
    let other: Vec<u8> = [1, 2, 3, 4, 5, 6].iter().cycle().take(n_times).copied().collect();
    let mut s = vec![0u8; n_times];
    s.extend(other);
    let states = LatentStates::new(2, n_times, s).unwrap();
    (data, spec, params, states)
}
