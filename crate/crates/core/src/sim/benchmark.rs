//! Fixed-outbreak cluster benchmark.
//!
//! Areas alternate endemic and outbreak windows on a common grid. Each
//! outbreak starts a few weeks into its window; endemic windows may contain
//! an absence spell in the middle. Counts follow fixed negative binomial
//! regimes, so the truth is known exactly and no Markov chain is involved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::inference::predictive::sample_nb;
use crate::model::{Covariates, ModelSpec, Neighbor, PanelData, Regime, TransitionTerms};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub endemic_len: usize,
    pub outbreak_len: usize,
    /// Endemic + outbreak window pairs.
    pub n_cycles: usize,
    /// Outbreak start is uniform on the first `start_spread` weeks of its window.
    pub start_spread: usize,
    pub absence_prob: f64,
    pub absence_len: usize,
    pub overdispersion: f64,
    /// `(intercept, beds, ar)` of the endemic log mean.
    pub endemic_mean: (f64, f64, f64),
    pub outbreak_mean: (f64, f64, f64),
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_clusters: 5,
            cluster_size: 6,
            endemic_len: 15,
            outbreak_len: 15,
            n_cycles: 4,
            start_spread: 4,
            absence_prob: 0.4,
            absence_len: 7,
            overdispersion: 10.0,
            endemic_mean: (0.0, 0.1, 0.5),
            outbreak_mean: (0.75, 0.05, 0.75),
        }
    }
}

impl BenchmarkConfig {
    pub fn n_areas(&self) -> usize {
        self.n_clusters * self.cluster_size
    }

    pub fn n_times(&self) -> usize {
        self.n_cycles * (self.endemic_len + self.outbreak_len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.cluster_size == 0 || self.n_cycles == 0 {
            return Err(Error::Config("benchmark needs at least one area and one cycle".into()));
        }
        if self.start_spread == 0 || self.start_spread > self.outbreak_len {
            return Err(Error::Config("outbreak start spread must lie within the window".into()));
        }
        if self.absence_len > self.endemic_len || !(0.0..=1.0).contains(&self.absence_prob) {
            return Err(Error::Config("invalid absence spell settings".into()));
        }
        Ok(())
    }
}

/// One outbreak of one area: `[start, end)` in 0-based weeks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutbreakWindow {
    pub area: usize,
    pub start: usize,
    pub end: usize,
}

/// Exact regimes of the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTruth {
    pub n_areas: usize,
    pub n_times: usize,
    regimes: Vec<Regime>,
    pub outbreaks: Vec<OutbreakWindow>,
    /// Endemic windows that received an absence spell, and how many were eligible.
    pub absence_spells: (usize, usize),
}

impl BenchmarkTruth {
    pub fn regime(&self, i: usize, t: usize) -> Regime {
        self.regimes[i * self.n_times + t]
    }

    pub fn is_outbreak(&self, i: usize, t: usize) -> bool {
        self.regime(i, t) == Regime::Outbreak
    }

    /// Rebuilds a truth table from area-major regimes. Outbreaks are the
    /// maximal outbreak runs; each counts one eligible endemic window, and
    /// every absence run counts as a spell.
    pub fn from_regimes(n_areas: usize, n_times: usize, regimes: Vec<Regime>) -> Result<Self> {
        if regimes.len() != n_areas * n_times || n_times == 0 {
            return Err(Error::Data("regime table has the wrong size".into()));
        }
        let mut outbreaks = Vec::new();
        let mut spells = 0;
        for i in 0..n_areas {
            let row = &regimes[i * n_times..(i + 1) * n_times];
            let mut t = 0;
            while t < n_times {
                let r = row[t];
                let start = t;
                while t < n_times && row[t] == r {
                    t += 1;
                }
                match r {
                    Regime::Outbreak => outbreaks.push(OutbreakWindow { area: i, start, end: t }),
                    Regime::Absence => spells += 1,
                    Regime::Endemic => {}
                }
            }
        }
        let eligible = outbreaks.len();
        Ok(Self {
            n_areas,
            n_times,
            regimes,
            outbreaks,
            absence_spells: (spells, eligible),
        })
    }
}

/// Generates the benchmark with separate random streams for structure
/// (covariate, outbreak starts, absence spells) and for counts.
pub fn simulate_cluster_benchmark_seeded(
    cfg: &BenchmarkConfig,
    structure_seed: u64,
    count_seed: u64,
) -> Result<(PanelData<f64>, BenchmarkTruth)> {
    cfg.validate()?;
    let mut srng = ChaCha8Rng::seed_from_u64(structure_seed);
    let mut crng = ChaCha8Rng::seed_from_u64(count_seed);
    let n = cfg.n_areas();
    let nt = cfg.n_times();
    let cycle = cfg.endemic_len + cfg.outbreak_len;
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let beds: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut srng)).collect();

    let mut regimes = vec![Regime::Endemic; n * nt];
    let mut outbreaks = Vec::new();
    let mut spells = 0;
    let mut eligible = 0;
    for i in 0..n {
        for c in 0..cfg.n_cycles {
            let e0 = c * cycle;
            eligible += 1;
            if srng.random::<f64>() < cfg.absence_prob {
                spells += 1;
                let a0 = e0 + (cfg.endemic_len - cfg.absence_len) / 2;
                for t in a0..a0 + cfg.absence_len {
                    regimes[i * nt + t] = Regime::Absence;
                }
            }
            let o0 = e0 + cfg.endemic_len;
            let start = o0 + srng.random_range(0..cfg.start_spread);
            let end = o0 + cfg.outbreak_len;
            for t in start..end {
                regimes[i * nt + t] = Regime::Outbreak;
            }
            outbreaks.push(OutbreakWindow { area: i, start, end });
        }
    }

    let mut counts = vec![0u32; n * nt];
    for i in 0..n {
        let mut prev = 0u32;
        for t in 0..nt {
            let y = match regimes[i * nt + t] {
                Regime::Absence => 0,
                r => {
                    let (b0, bb, ar) = if r == Regime::Outbreak { cfg.outbreak_mean } else { cfg.endemic_mean };
                    let mean = (b0 + bb * beds[i] + ar * (prev as f64).ln_1p()).exp();
                    sample_nb(mean, cfg.overdispersion, &mut crng)
                }
            };
            counts[i * nt + t] = y;
            prev = y;
        }
    }

    let beds_col: Vec<f64> = (0..n).flat_map(|i| std::iter::repeat_n(beds[i], nt)).collect();
    let cov = Covariates::from_columns(n, nt, vec![("beds".into(), beds_col)])?;
    let ne: Vec<Vec<Neighbor<f64>>> = (0..n)
        .map(|i| {
            let k = i / cfg.cluster_size;
            (k * cfg.cluster_size..(k + 1) * cfg.cluster_size)
                .filter(|&j| j != i)
                .map(|j| Neighbor { area: j, weight: 1.0 })
                .collect()
        })
        .collect();
    let data = PanelData::new(
        (0..n).map(|i| format!("area{:02}", i + 1)).collect(),
        nt,
        counts,
        cov,
        ne,
    )?;
    Ok((
        data,
        BenchmarkTruth {
            n_areas: n,
            n_times: nt,
            regimes,
            outbreaks,
            absence_spells: (spells, eligible),
        },
    ))
}

/// [`simulate_cluster_benchmark_seeded`] with both seeds drawn from `rng`.
pub fn simulate_cluster_benchmark<R: Rng + ?Sized>(
    cfg: &BenchmarkConfig,
    rng: &mut R,
) -> Result<(PanelData<f64>, BenchmarkTruth)> {
    let s = rng.random();
    let c = rng.random();
    simulate_cluster_benchmark_seeded(cfg, s, c)
}

/// Models fitted to the benchmark: counts correctly specified (beds in both
/// regimes, no random intercepts), constant transitions, and for the coupled
/// variant a neighbour term on outbreak emergence only.
pub fn benchmark_spec(data: &PanelData<f64>, coupled: bool) -> ModelSpec {
    let beds = data.covariates().index_of("beds").expect("benchmark covariate");
    let mut spec = ModelSpec::coupled();
    spec.emission_covariates = vec![beds];
    let plain = TransitionTerms {
        covariates: Vec::new(),
        spatial: false,
    };
    spec.transitions = [
        plain.clone(),
        plain.clone(),
        TransitionTerms {
            covariates: Vec::new(),
            spatial: coupled,
        },
        plain,
    ];
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let (d, truth) = simulate_cluster_benchmark_seeded(&BenchmarkConfig::default(), 1, 2).unwrap();
        assert_eq!((d.n_areas(), d.n_times()), (30, 120));
        assert_eq!(d.neighbors(7).len(), 5);
        assert!(d.neighbors(7).iter().all(|nb| (6..12).contains(&nb.area)));
        assert_eq!(truth.outbreaks.len(), 30 * 4);
        for o in &truth.outbreaks {
            let w0 = (o.start / 30) * 30 + 15;
            assert!((w0..w0 + 4).contains(&o.start));
            assert_eq!(o.end, w0 + 15);
        }
        for i in 0..30 {
            for t in 0..120 {
                if truth.regime(i, t) == Regime::Absence {
                    assert_eq!(d.count(i, t), 0);
                }
            }
        }
    }

    #[test]
    fn absence_frequency() {
        let cfg = BenchmarkConfig {
            n_clusters: 50,
            cluster_size: 50,
            ..BenchmarkConfig::default()
        };
        let (_, truth) = simulate_cluster_benchmark_seeded(&cfg, 3, 4).unwrap();
        let (s, e) = truth.absence_spells;
        assert_eq!(e, 10_000);
        assert!((s as f64 / e as f64 - 0.4).abs() < 0.02);
    }

    #[test]
    fn truth_ignores_the_count_stream() {
        let cfg = BenchmarkConfig::default();
        let (d1, t1) = simulate_cluster_benchmark_seeded(&cfg, 5, 6).unwrap();
        let (d2, t2) = simulate_cluster_benchmark_seeded(&cfg, 5, 7).unwrap();
        assert_eq!(t1, t2);
        assert_ne!(d1.counts(), d2.counts());
    }

    #[test]
    fn truth_rebuilds_from_regimes() {
        let (_, t) = simulate_cluster_benchmark_seeded(&BenchmarkConfig::default(), 8, 9).unwrap();
        let regimes = (0..t.n_areas)
            .flat_map(|i| (0..t.n_times).map(move |s| (i, s)))
            .map(|(i, s)| t.regime(i, s))
            .collect();
        assert_eq!(BenchmarkTruth::from_regimes(t.n_areas, t.n_times, regimes).unwrap(), t);
    }
}
