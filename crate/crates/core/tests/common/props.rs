//! Property suites, shared by the `properties` target and the acceptance run.
//!
//! Each suite runs a deterministic proptest runner and reports the first
//! failure as a message.

use std::fs;
use std::path::Path;

use cmsnb::diagnostics::gelman_rubin;
use cmsnb::inference::{state_probabilities, waic, ChainDraws, PosteriorDraws, StateDraw};
use cmsnb::io::{load_draws, persist_draws, read_state_probabilities, write_state_probabilities};
use cmsnb::model::{
    constraints_satisfied, nb_logpmf, transition_probs, Constraints, Covariates, LatentStates,
    ModelSpec, PanelData, ParamLayout, StateSpace,
};
use cmsnb::priors::{default_priors, PriorOptions};
use cmsnb::sampler::{forward_filter_area, gibbs_run, SamplerConfig};
use cmsnb::sim::{auc_from_pairs, selection_spec, selection_truth, simulate_from_model, synthetic_skeleton};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{rich_params, rich_spec, two_area_panel};

pub type Outcome = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Outcome {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn state_space() -> impl Strategy<Value = StateSpace> {
    (any::<bool>(), 1usize..4, 1usize..6).prop_map(|(a, e, o)| StateSpace::new(a, e, o).unwrap())
}

fn one_cell_panel(z: f64) -> PanelData<f64> {
    let cov = Covariates::from_columns(1, 2, vec![("z".into(), vec![z, z])]).unwrap();
    PanelData::new(vec!["a".into()], 2, vec![0, 0], cov, vec![vec![]]).unwrap()
}

/// Every transition row is a probability vector (to 1e-12) supported on
/// structurally allowed moves, for any coefficients and neighbour sum.
pub fn row_stochasticity() -> Outcome {
    let coef = -40.0..40.0f64;
    run(
        600,
        (state_space(), prop::array::uniform4((coef.clone(), coef.clone(), coef)), -5.0..5.0f64, 0.0..4.0f64),
        |(ss, coefs, z, nsum)| {
            let spec = ModelSpec { states: ss, ..rich_spec() };
            let data = one_cell_panel(z);
            let mut p = rich_params(&spec, 1);
            for (c, (a, b, s)) in p.chain.transitions.iter_mut().zip(coefs) {
                c.intercept = a;
                c.coefs = vec![b];
                c.spatial = s;
            }
            let tp = transition_probs(0, 1, &p.chain, &spec, &data, nsum);
            for from in 0..ss.len() {
                let row = ss.row(from, &tp);
                let total: f64 = row.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12, "row {} sums to {}", from, total);
                for (to, &v) in row.iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert!(v == 0.0 || ss.structurally_allowed(from, to));
                }
            }
            Ok(())
        },
    )
}

/// Clone states that are not the last of their block move to the next
/// clone with probability exactly one.
pub fn clone_corridors() -> Outcome {
    run(300, (state_space(), -30.0..30.0f64, 0.0..3.0f64), |(ss, a, nsum)| {
        let spec = ModelSpec { states: ss, ..rich_spec() };
        let data = one_cell_panel(0.5);
        let mut p = rich_params(&spec, 1);
        for c in &mut p.chain.transitions {
            c.intercept = a;
        }
        let tp = transition_probs(0, 1, &p.chain, &spec, &data, nsum);
        let free = |s: usize| ss.absence() == Some(s) || s == ss.last_endemic() || s == ss.last_outbreak();
        for from in (0..ss.len()).filter(|&s| !free(s)) {
            let row = ss.row(from, &tp);
            for (to, &v) in row.iter().enumerate() {
                prop_assert_eq!(v, if to == from + 1 { 1.0 } else { 0.0 });
            }
        }
        Ok(())
    })
}

/// A small coupled panel simulated from the selection model.
pub fn small_simulated_panel(seed: u64, n_areas: usize, n_times: usize) -> (PanelData<f64>, ModelSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sk = synthetic_skeleton(n_areas, n_times, &mut rng).unwrap();
    let spec = selection_spec(&sk, true);
    let truth = selection_truth(&spec, n_areas, true);
    let (data, _) = simulate_from_model(&truth, &sk, &spec, &mut rng).unwrap();
    (data, spec)
}

fn short_config(seed: u64, n_iterations: usize) -> SamplerConfig {
    SamplerConfig {
        n_chains: 2,
        n_iterations,
        burn_in: n_iterations / 3,
        state_thin: 5,
        seed,
        parallel: false,
        ..SamplerConfig::default()
    }
}

/// Every stored parameter draw satisfies the transmission constraint it
/// was sampled under.
pub fn constraint_truncation() -> Outcome {
    run(6, (any::<u64>(), any::<bool>()), |(seed, strong)| {
        let (data, spec) = small_simulated_panel(seed, 4, 24);
        let constraints = if strong { Constraints::strong() } else { Constraints::weak() };
        let priors = default_priors(&spec, &data, PriorOptions { constraints, ..PriorOptions::default() }).unwrap();
        let out = gibbs_run(&data, &spec, &priors, &short_config(seed, 150)).unwrap();
        let layout = ParamLayout::new(&spec, &data);
        for ch in &out.draws.chains {
            for row in &ch.params {
                let p = out.draws.param_vector(&spec, &layout, row).unwrap();
                prop_assert!(constraints_satisfied(&p.count, &data, &spec, &constraints));
            }
        }
        Ok(())
    })
}

/// The negative binomial pmf sums to one (to 1e-9).
pub fn nb_normalization() -> Outcome {
    run(200, (0.01..60.0f64, 0.2..60.0f64), |(mean, r)| {
        let mut total = 0.0;
        let mut y = 0u32;
        loop {
            let p = nb_logpmf(y, mean, r).unwrap().exp();
            total += p;
            if (y as f64 > mean && p < 1e-18) || y > 2_000_000 {
                break;
            }
            y += 1;
        }
        prop_assert!((total - 1.0).abs() < 1e-9, "mean {} r {}: {}", mean, r, total);
        Ok(())
    })
}

fn valid_path(ss: StateSpace, len: usize, picks: &[usize]) -> Vec<u8> {
    let mut path = Vec::with_capacity(len);
    let mut s = picks[0] % ss.len();
    path.push(s as u8);
    for &k in &picks[1..len] {
        let next: Vec<usize> = (0..ss.len()).filter(|&to| ss.structurally_allowed(s, to)).collect();
        s = next[k % next.len()];
        path.push(s as u8);
    }
    path
}

/// Regime probabilities from draws and filtered rows are probability vectors.
pub fn state_probability_normalization() -> Outcome {
    let draws = (1usize..4, 1usize..7, 1usize..30).prop_flat_map(|(n, nt, m)| {
        (Just((n, nt)), prop::collection::vec(prop::collection::vec(0u8..7, n * nt), m))
    });
    run(200, draws, |((n, nt), paths)| {
        let d = PosteriorDraws::<f64> {
            names: vec!["x".into()],
            n_iterations: paths.len() + 1,
            burn_in: 1,
            seed: 0,
            state_thin: 1,
            n_areas: n,
            n_times: nt,
            n_states: 7,
            chains: vec![ChainDraws {
                params: vec![vec![0.0]; paths.len()],
                states: paths
                    .iter()
                    .enumerate()
                    .map(|(k, p)| StateDraw {
                        iteration: k as u32 + 2,
                        states: LatentStates::new(n, nt, p.clone()).unwrap(),
                    })
                    .collect(),
            }],
        };
        let sp = state_probabilities(&d, 0..nt, &StateSpace::default()).unwrap();
        for i in 0..n {
            for t in 0..nt {
                let v = sp.get(i, t);
                prop_assert!(v.iter().all(|&p| (0.0..=1.0).contains(&p)));
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        Ok(())
    })?;

    let case = (prop::collection::vec(0u32..40, 12), prop::collection::vec(any::<usize>(), 6), -2.0..3.0f64);
    run(200, case, |(counts, picks, spatial)| {
        let data = two_area_panel(counts, 6);
        let spec = rich_spec();
        let mut p = rich_params(&spec, 2);
        for c in &mut p.chain.transitions {
            c.spatial = spatial;
        }
        let mut s = vec![0u8; 6];
        s.extend(valid_path(spec.states, 6, &picks));
        let states = LatentStates::new(2, 6, s).unwrap();
        let f = forward_filter_area(0, &data, &spec, &states, &p).unwrap();
        for t in 0..6 {
            prop_assert!((f.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(f.row(t).iter().all(|&v| v >= 0.0));
        }
        Ok(())
    })
}

/// `AUC(s) + AUC(-s) = 1`, and flipping the labels complements the AUC.
pub fn auc_complement() -> Outcome {
    let pairs = prop::collection::vec((0u8..20, any::<bool>()), 2..80)
        .prop_filter("both classes", |v| v.iter().any(|p| p.1) && v.iter().any(|p| !p.1));
    run(400, pairs, |v| {
        let s: Vec<(f64, bool)> = v.iter().map(|&(x, l)| (x as f64 / 10.0, l)).collect();
        let neg: Vec<(f64, bool)> = s.iter().map(|&(x, l)| (-x, l)).collect();
        let flip: Vec<(f64, bool)> = s.iter().map(|&(x, l)| (x, !l)).collect();
        let a = auc_from_pairs(s).unwrap();
        prop_assert!((a + auc_from_pairs(neg).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((a + auc_from_pairs(flip).unwrap() - 1.0).abs() < 1e-12);
        Ok(())
    })
}

/// WAIC does not depend on the order of draws or cells.
pub fn waic_permutation_invariance() -> Outcome {
    let m = (2usize..15, 1usize..8).prop_flat_map(|(d, c)| {
        (
            prop::collection::vec(prop::collection::vec(-30.0..0.0f64, c), d),
            Just(d),
            Just(c),
        )
            .prop_flat_map(|(mat, d, c)| {
                (
                    Just(mat),
                    Just((0..d).collect::<Vec<_>>()).prop_shuffle(),
                    Just((0..c).collect::<Vec<_>>()).prop_shuffle(),
                )
            })
    });
    run(300, m, |(mat, rows, cols)| {
        let a = waic(&mat).unwrap();
        let permuted: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| mat[r][c]).collect()).collect();
        let b = waic(&permuted).unwrap();
        let tol = 1e-9 * a.waic.abs().max(1.0);
        prop_assert!((a.waic - b.waic).abs() < tol && (a.pwaic - b.pwaic).abs() < tol);
        Ok(())
    })
}

/// Split R-hat is unchanged by affine maps of the draws.
pub fn rhat_affine_invariance() -> Outcome {
    let chains = (2usize..5, 20usize..120).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), m)
    });
    run(300, (chains, 0.05..50.0f64, any::<bool>(), -100.0..100.0f64), |(x, a, neg, b)| {
        let a = if neg { -a } else { a };
        let y: Vec<Vec<f64>> = x.iter().map(|c| c.iter().map(|v| a * v + b).collect()).collect();
        let rx = gelman_rubin(&x).unwrap();
        let ry = gelman_rubin(&y).unwrap();
        prop_assert!((rx - ry).abs() < 1e-8 * rx.max(1.0), "{} vs {}", rx, ry);
        Ok(())
    })
}

/// Persisted draws and state-probability tables load back unchanged.
pub fn round_trip_persistence() -> Outcome {
    let finite = prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO;
    let case = (1usize..4, 1usize..4, 1usize..5, 1usize..4, 0usize..6).prop_flat_map(move |(nc, np, n, nt, m)| {
        (
            Just((nc, np, n, nt, m)),
            prop::collection::vec(prop::collection::vec(prop::collection::vec(finite, np), m), nc),
            prop::collection::vec(prop::collection::vec(0u8..7, n * nt), m),
            prop::collection::vec(0.0..1.0f64, n * nt),
        )
    });
    run(60, case, |((nc, np, n, nt, m), params, paths, po)| {
        let draws = PosteriorDraws::<f64> {
            names: (0..np).map(|k| format!("p{k}[x]")).collect(),
            n_iterations: 10 + m,
            burn_in: 10,
            seed: 3,
            state_thin: 1,
            n_areas: n,
            n_times: nt,
            n_states: 7,
            chains: params
                .into_iter()
                .map(|rows| ChainDraws {
                    params: rows,
                    states: paths
                        .iter()
                        .enumerate()
                        .map(|(k, p)| StateDraw {
                            iteration: 11 + k as u32,
                            states: LatentStates::new(n, nt, p.clone()).unwrap(),
                        })
                        .collect(),
                })
                .collect(),
        };
        prop_assert_eq!(draws.n_chains(), nc);
        let dir = tempfile::tempdir().unwrap();
        persist_draws(&draws, dir.path()).unwrap();
        let back: PosteriorDraws<f64> = load_draws(dir.path()).unwrap();
        prop_assert_eq!(&back, &draws);

        let probs: Vec<[f64; 3]> = po.iter().map(|&o| [0.0, 1.0 - o, o]).collect();
        let sp = cmsnb::inference::StateProbSeries::new(n, 0, nt, probs).unwrap();
        let ids: Vec<String> = (0..n).map(|i| format!("area{i}")).collect();
        let path = dir.path().join("sp.csv");
        write_state_probabilities(&path, &sp, &ids, 201_001).unwrap();
        let sp_back = read_state_probabilities(&path, &ids, 201_001).unwrap();
        prop_assert_eq!(sp_back, sp);
        Ok(())
    })
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Two runs with the same seed write byte-identical draw files, whether or
/// not the chains run in parallel.
pub fn seeded_determinism() -> Outcome {
    run(3, any::<u64>(), |seed| {
        let (data, spec) = small_simulated_panel(seed, 3, 20);
        let priors = default_priors(&spec, &data, PriorOptions::default()).unwrap();
        let mut outputs = Vec::new();
        for parallel in [false, false, true] {
            let cfg = SamplerConfig { parallel, ..short_config(seed, 120) };
            let out = gibbs_run(&data, &spec, &priors, &cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            persist_draws(&out.draws, dir.path()).unwrap();
            outputs.push(dir_bytes(dir.path()));
        }
        prop_assert!(outputs[0] == outputs[1] && outputs[1] == outputs[2]);
        Ok(())
    })
}

/// Every suite with its name, in a fixed order.
pub fn all() -> Vec<(&'static str, fn() -> Outcome)> {
    vec![
        ("row stochasticity", row_stochasticity as fn() -> Outcome),
        ("clone corridors", clone_corridors),
        ("constraint truncation", constraint_truncation),
        ("NB normalization", nb_normalization),
        ("state-probability normalization", state_probability_normalization),
        ("AUC complement", auc_complement),
        ("WAIC permutation invariance", waic_permutation_invariance),
        ("R-hat affine invariance", rhat_affine_invariance),
        ("round-trip persistence", round_trip_persistence),
        ("seeded determinism", seeded_determinism),
    ]
}
