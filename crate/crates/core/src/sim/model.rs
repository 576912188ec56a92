//! Forward simulation from the model and synthetic panels to simulate on.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::inference::predictive::{sample_count, step_states};
use crate::io::weights::nearest_neighbors;
use crate::model::{
    Covariates, LatentStates, ModelSpec, PanelData, ParamVector, Transition, TransitionTerms,
};
use crate::sampler::filter::draw_index;
use crate::Result;

/// Draws states and counts jointly for every area, moving all areas one
/// step at a time so neighbour terms see the simulated previous slice.
///
/// The skeleton supplies covariates and neighbours; its counts are ignored.
/// The first count of each area is drawn with a previous count of zero.
pub fn simulate_from_model<R: Rng + ?Sized>(
    params: &ParamVector<f64>,
    skeleton: &PanelData<f64>,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<(PanelData<f64>, LatentStates)> {
    spec.validate(skeleton)?;
    let n = skeleton.n_areas();
    let nt = skeleton.n_times();
    let mut states = LatentStates::filled(n, nt, 0);
    let mut counts = vec![0u32; n * nt];
    for i in 0..n {
        let init: Vec<f64> = spec.initial_probs(i);
        let s = draw_index(&init, rng);
        states.set(i, 0, s);
        counts[i * nt] = sample_count(i, 0, s, 0, params, skeleton, spec, rng);
    }
    let mut slice = LatentStates::filled(n, 1, 0);
    let mut next = vec![0u8; n];
    for t in 1..nt {
        for i in 0..n {
            slice.set(i, 0, states.get(i, t - 1));
        }
        step_states(t, &slice, params, skeleton, spec, rng, &mut next);
        for i in 0..n {
            let s = next[i] as usize;
            states.set(i, t, s);
            counts[i * nt + t] = sample_count(i, t, s, counts[i * nt + t - 1], params, skeleton, spec, rng);
        }
    }
    Ok((skeleton.with_counts(counts)?, states))
}

/// Synthetic stand-in for a real surveillance panel: a per-area size
/// covariate (`beds`), a county-level lagged mobility index (`mobility`),
/// a new-variant indicator (`new_variant`) and overlap weights from
/// simulated patient catchments, keeping each area's 5 strongest partners.
pub fn synthetic_skeleton<R: Rng + ?Sized>(n_areas: usize, n_times: usize, rng: &mut R) -> Result<PanelData<f64>> {
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let beds: Vec<f64> = (0..n_areas).map(|_| std_normal.sample(rng)).collect();
    let n_counties = n_areas.div_ceil(3);
    let mobility_county: Vec<Vec<f64>> = (0..n_counties)
        .map(|_| {
            let phase: f64 = rng.random::<f64>() * 52.0;
            let mut noise = 0.0;
            (0..n_times)
                .map(|t| {
                    noise = 0.6 * noise + 3.0 * std_normal.sample(rng);
                    -20.0 + 12.0 * (std::f64::consts::TAU * (t as f64 + phase) / 52.0).sin() + noise
                })
                .collect()
        })
        .collect();
    let mob_mean = mobility_county.iter().flatten().sum::<f64>() / (n_counties * n_times) as f64;
    let variant_from = (n_times as f64 * 0.7) as usize;
    let mut beds_col = Vec::with_capacity(n_areas * n_times);
    let mut mob_col = Vec::with_capacity(n_areas * n_times);
    let mut nv_col = Vec::with_capacity(n_areas * n_times);
    for i in 0..n_areas {
        for t in 0..n_times {
            beds_col.push(beds[i]);
            mob_col.push(mobility_county[i / 3][t] - mob_mean);
            nv_col.push(if t >= variant_from { 1.0 } else { 0.0 });
        }
    }
    let cov = Covariates::from_columns(
        n_areas,
        n_times,
        vec![
            ("beds".into(), beds_col),
            ("mobility".into(), mob_col),
            ("new_variant".into(), nv_col),
        ],
    )?;
    // Catchments: areas at random points of the unit square, patients
    // spread over a 10 x 10 grid of neighbourhoods with a Gaussian kernel.
    let pos: Vec<(f64, f64)> = (0..n_areas).map(|_| (rng.random(), rng.random())).collect();
    let dists: Vec<Vec<f64>> = pos
        .iter()
        .map(|&(x, y)| {
            let mut d: Vec<f64> = (0..100)
                .map(|c| {
                    let cx = (c % 10) as f64 / 9.0;
                    let cy = (c / 10) as f64 / 9.0;
                    (-((cx - x).powi(2) + (cy - y).powi(2)) / (2.0 * 0.12f64.powi(2))).exp()
                })
                .collect();
            let total: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= total);
            d
        })
        .collect();
    let ne = nearest_neighbors(&dists, 5.min(n_areas.saturating_sub(1)))?;
    PanelData::new(
        (0..n_areas).map(|i| format!("area{:02}", i + 1)).collect(),
        n_times,
        vec![0; n_areas * n_times],
        cov,
        ne,
    )
}

fn terms(data: &PanelData<f64>, names: &[&str], spatial: bool) -> TransitionTerms {
    TransitionTerms {
        covariates: names
            .iter()
            .map(|n| data.covariates().index_of(n).expect("skeleton covariate"))
            .collect(),
        spatial,
    }
}

/// Model used by the parameter-recovery study: shared overdispersion, no
/// random intercepts, beds and mobility in both count regimes, coupling on
/// outbreak emergence and persistence.
pub fn recovery_spec(data: &PanelData<f64>) -> ModelSpec {
    let mut spec = ModelSpec::coupled();
    spec.emission_covariates = terms(data, &["beds", "mobility"], false).covariates;
    spec.shared_overdispersion = true;
    spec.transitions = [
        terms(data, &["beds"], false),
        terms(data, &["beds", "mobility"], false),
        terms(data, &["mobility", "new_variant"], true),
        terms(data, &["mobility"], true),
    ];
    spec
}

/// True parameters of the recovery study.
pub fn recovery_truth(spec: &ModelSpec, n_areas: usize) -> ParamVector<f64> {
    let mut p = ParamVector::zeros(spec, n_areas);
    let en = &mut p.count.endemic;
    en.intercepts = vec![0.0; n_areas];
    en.coefs = vec![0.17, 0.003];
    en.rho = 0.65;
    en.r = 10.0;
    let ob = &mut p.count.outbreak;
    ob.intercepts = vec![0.78; n_areas];
    ob.coefs = vec![0.06, 0.007];
    ob.rho = 0.75;
    ob.r = 10.0;
    set_chain(&mut p, Transition::Emergence, -0.76, &[0.45], 0.0);
    set_chain(&mut p, Transition::Extinction, -3.6, &[-0.9, -0.035], 0.0);
    set_chain(&mut p, Transition::OutbreakEmergence, -4.15, &[0.025, 2.5], 1.15);
    set_chain(&mut p, Transition::Persistence, 2.0, &[0.025], 0.45);
    p
}

fn set_chain(p: &mut ParamVector<f64>, tr: Transition, intercept: f64, coefs: &[f64], spatial: f64) {
    let c = p.chain.get_mut(tr);
    c.intercept = intercept;
    c.coefs = coefs.to_vec();
    c.spatial = spatial;
}

/// Model pair of the model-selection study. `coupled` adds neighbour
/// terms to every transition.
pub fn selection_spec(data: &PanelData<f64>, coupled: bool) -> ModelSpec {
    let mut spec = ModelSpec::coupled();
    spec.emission_covariates = terms(data, &["beds", "mobility"], false).covariates;
    spec.shared_overdispersion = true;
    spec.transitions = [
        terms(data, &["beds"], coupled),
        terms(data, &["beds"], coupled),
        terms(data, &["mobility", "new_variant"], coupled),
        terms(data, &["mobility"], coupled),
    ];
    spec
}

/// True parameters of the model-selection study.
pub fn selection_truth(spec: &ModelSpec, n_areas: usize, coupled: bool) -> ParamVector<f64> {
    let mut p = ParamVector::zeros(spec, n_areas);
    let en = &mut p.count.endemic;
    en.coefs = vec![0.1, 0.0];
    en.rho = 0.5;
    en.r = 10.0;
    let ob = &mut p.count.outbreak;
    ob.intercepts = vec![0.75; n_areas];
    ob.coefs = vec![0.05, 0.007];
    ob.rho = 0.75;
    ob.r = 10.0;
    if coupled {
        set_chain(&mut p, Transition::Emergence, -1.0, &[0.5], 0.25);
        set_chain(&mut p, Transition::Extinction, -3.0, &[-1.0], -0.25);
        set_chain(&mut p, Transition::OutbreakEmergence, -4.0, &[0.04, 1.0], 1.2);
        set_chain(&mut p, Transition::Persistence, 2.0, &[0.02], 0.5);
    } else {
        set_chain(&mut p, Transition::Emergence, -1.0, &[0.5], 0.0);
        set_chain(&mut p, Transition::Extinction, -3.0, &[-1.0], 0.0);
        set_chain(&mut p, Transition::OutbreakEmergence, -3.5, &[0.04, 1.0], 0.0);
        set_chain(&mut p, Transition::Persistence, 2.5, &[0.02], 0.0);
    }
    p
}

/// Frequency of absence-to-endemic moves at fixed covariates, for checking
/// the simulator against the transition row.
pub fn emergence_frequency<R: Rng + ?Sized>(
    params: &ParamVector<f64>,
    data: &PanelData<f64>,
    spec: &ModelSpec,
    i: usize,
    t: usize,
    n_steps: usize,
    rng: &mut R,
) -> f64 {
    let mut slice = LatentStates::filled(data.n_areas(), 1, 0);
    let mut next = vec![0u8; data.n_areas()];
    let mut hits = 0usize;
    for _ in 0..n_steps {
        step_states(t, &slice, params, data, spec, rng, &mut next);
        if spec.states.regime(next[i] as usize) != crate::model::Regime::Absence {
            hits += 1;
        }
        slice.set(i, 0, 0);
    }
    hits as f64 / n_steps as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::transition_probs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simulated_paths_are_structurally_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sk = synthetic_skeleton(10, 113, &mut rng).unwrap();
        let spec = recovery_spec(&sk);
        let truth = recovery_truth(&spec, 10);
        let (d, st) = simulate_from_model(&truth, &sk, &spec, &mut rng).unwrap();
        assert!(st.respects(&spec.states));
        for i in 0..10 {
            for t in 0..113 {
                if st.get(i, t) == 0 {
                    assert_eq!(d.count(i, t), 0);
                }
            }
        }
        assert!(sk.neighbors(0).len() == 5);
    }

    #[test]
    fn blocked_outbreak_emergence_stays_endemic() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sk = synthetic_skeleton(6, 60, &mut rng).unwrap();
        let mut spec = recovery_spec(&sk);
        spec.initial = crate::model::InitialDistribution::PerArea(vec![
            vec![0.5, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0];
            6
        ]);
        let mut truth = recovery_truth(&spec, 6);
        truth.chain.get_mut(Transition::OutbreakEmergence).intercept = f64::NEG_INFINITY;
        let (_, st) = simulate_from_model(&truth, &sk, &spec, &mut rng).unwrap();
        assert!(st.as_slice().iter().all(|&s| !spec.states.is_outbreak(s as usize)));
    }

    #[test]
    fn emergence_matches_transition_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sk = synthetic_skeleton(6, 20, &mut rng).unwrap();
        let spec = recovery_spec(&sk);
        let truth = recovery_truth(&spec, 6);
        let n = 100_000;
        let f = emergence_frequency(&truth, &sk, &spec, 2, 5, n, &mut rng);
        let p12 = transition_probs(2, 5, &truth.chain, &spec, &sk, 0.0).p12;
        let se = (p12 * (1.0 - p12) / n as f64).sqrt();
        assert!((f - p12).abs() < 3.0 * se, "{f} vs {p12}");
    }
}
