//! Detection-quality metrics against a known truth and a paired permutation
//! test for score series.

use std::ops::Range;

use rand::Rng;

use super::benchmark::BenchmarkTruth;
use crate::{Error, Result};

/// Outbreak scores per area (rows) over absolute times `t0..t0 + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub t0: usize,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(t0: usize, scores: Vec<Vec<f64>>) -> Self {
        Self { t0, scores }
    }

    pub fn times(&self) -> Range<usize> {
        self.t0..self.t0 + self.scores.first().map_or(0, |r| r.len())
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.scores[i][t - self.t0]
    }

    fn check(&self, truth: &BenchmarkTruth) -> Result<()> {
        if self.scores.len() != truth.n_areas || self.times().end > truth.n_times {
            return Err(Error::Contract("scores do not align with the truth table".into()));
        }
        Ok(())
    }

    fn labelled(&self, truth: &BenchmarkTruth) -> Result<Vec<(f64, bool)>> {
        self.check(truth)?;
        Ok((0..self.scores.len())
            .flat_map(|i| self.times().map(move |t| (i, t)))
            .map(|(i, t)| (self.get(i, t), truth.is_outbreak(i, t)))
            .collect())
    }
}

/// Area under the ROC curve: the probability that a random outbreak week
/// outscores a random non-outbreak week, ties counting one half.
pub fn roc_auc(scores: &ScoreTable, truth: &BenchmarkTruth) -> Result<f64> {
    auc_from_pairs(scores.labelled(truth)?)
}

/// AUC of labelled scores via average ranks.
pub fn auc_from_pairs(mut pairs: Vec<(f64, bool)>) -> Result<f64> {
    let n_pos = pairs.iter().filter(|p| p.1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain("AUC needs both outbreak and non-outbreak weeks".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < pairs.len() {
        let mut j = k;
        while j < pairs.len() && pairs[j].0 == pairs[k].0 {
            j += 1;
        }
        // ranks k+1..=j share their average
        let avg = (k + 1 + j) as f64 / 2.0;
        rank_sum += avg * pairs[k..j].iter().filter(|p| p.1).count() as f64;
        k = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensSpec {
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Share of outbreak weeks scored above `threshold`, and of other weeks
/// scored at or below it.
pub fn sens_spec(scores: &ScoreTable, truth: &BenchmarkTruth, threshold: f64) -> Result<SensSpec> {
    let pairs = scores.labelled(truth)?;
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (s, out) in pairs {
        let alarm = s > threshold;
        if out {
            pos += 1;
            tp += alarm as usize;
        } else {
            neg += 1;
            tn += !alarm as usize;
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Domain("sensitivity and specificity need both classes".into()));
    }
    Ok(SensSpec {
        sensitivity: tp as f64 / pos as f64,
        specificity: tn as f64 / neg as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeliness {
    /// Mean 1-based detection week over detected outbreaks (NaN if none).
    pub mean: f64,
    pub n_detected: usize,
    pub n_undetected: usize,
    /// Detection week of every evaluated outbreak, `None` if never detected.
    pub per_outbreak: Vec<Option<usize>>,
}

/// Weeks into each outbreak (starting at one) until its score first exceeds
/// `threshold`. Only outbreaks starting inside the scored range count; the
/// search stops at the outbreak's end or the end of the range.
pub fn timeliness(scores: &ScoreTable, truth: &BenchmarkTruth, threshold: f64) -> Result<Timeliness> {
    scores.check(truth)?;
    let range = scores.times();
    let per: Vec<Option<usize>> = truth
        .outbreaks
        .iter()
        .filter(|o| range.contains(&o.start))
        .map(|o| {
            (o.start..o.end.min(range.end))
                .find(|&t| scores.get(o.area, t) > threshold)
                .map(|t| t - o.start + 1)
        })
        .collect();
    if per.is_empty() {
        return Err(Error::Domain("no outbreaks start inside the scored range".into()));
    }
    let detected: Vec<usize> = per.iter().flatten().copied().collect();
    Ok(Timeliness {
        mean: if detected.is_empty() {
            f64::NAN
        } else {
            detected.iter().sum::<usize>() as f64 / detected.len() as f64
        },
        n_detected: detected.len(),
        n_undetected: per.len() - detected.len(),
        per_outbreak: per,
    })
}

fn paired_diffs(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Domain("score series differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::Domain("permutation test needs at least two paired scores".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Relative slack when comparing permuted statistics with the observed one.
const TIE_EPS: f64 = 1e-12;

/// Two-sided paired permutation test of equal mean scores: each time
/// point's pair of labels is swapped at random (a sign flip of the
/// difference). Add-one smoothed p-value.
pub fn permutation_test<R: Rng + ?Sized>(a: &[f64], b: &[f64], n_perm: usize, rng: &mut R) -> Result<f64> {
    let d = paired_diffs(a, b)?;
    let obs = d.iter().sum::<f64>().abs();
    let tol = TIE_EPS * d.iter().map(|v| v.abs()).sum::<f64>();
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        let s: f64 = d.iter().map(|&v| if rng.random::<bool>() { v } else { -v }).sum();
        if s.abs() >= obs - tol {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as f64 / (n_perm + 1) as f64)
}

/// Exact version enumerating all `2^T` swaps (`T ≤ 24`).
pub fn permutation_test_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = paired_diffs(a, b)?;
    if d.len() > 24 {
        return Err(Error::Domain("exact enumeration limited to 24 time points".into()));
    }
    let obs = d.iter().sum::<f64>().abs();
    let tol = TIE_EPS * d.iter().map(|v| v.abs()).sum::<f64>();
    let total = 1usize << d.len();
    let extreme = (0..total)
        .filter(|mask| {
            let s: f64 = d
                .iter()
                .enumerate()
                .map(|(k, &v)| if mask >> k & 1 == 1 { -v } else { v })
                .sum();
            s.abs() >= obs - tol
        })
        .count();
    Ok(extreme as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pairs(s: &[f64], l: &[bool]) -> Vec<(f64, bool)> {
        s.iter().copied().zip(l.iter().copied()).collect()
    }

    #[test]
    fn auc_examples() {
        let a = auc_from_pairs(pairs(&[0.9, 0.8, 0.4, 0.3], &[true, true, false, false])).unwrap();
        assert_eq!(a, 1.0);
        let a = auc_from_pairs(pairs(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false])).unwrap();
        assert_eq!(a, 0.75);
        let a = auc_from_pairs(pairs(&[0.5, 0.5], &[true, false])).unwrap();
        assert_eq!(a, 0.5);
        assert!(auc_from_pairs(pairs(&[0.1, 0.2], &[true, true])).is_err());
    }

    #[test]
    fn random_scores_have_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: Vec<(f64, bool)> = (0..10_000).map(|k| (rng.random::<f64>(), k % 2 == 0)).collect();
        assert!((auc_from_pairs(p).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn permutation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = [3.1, 3.3, 2.9, 3.0];
        assert_eq!(permutation_test(&a, &a, 999, &mut rng).unwrap(), 1.0);
        let a: Vec<f64> = (0..29).map(|k| 3.0 + 0.1 * (k % 5) as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert!(permutation_test(&a, &b, 10_000, &mut rng).unwrap() < 0.01);
        assert!(permutation_test(&[1.0], &[2.0], 10, &mut rng).is_err());
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let a = [3.2, 3.5, 3.1];
        let b = [3.0, 3.6, 2.8];
        let exact = permutation_test_exact(&a, &b).unwrap();
        // differences (0.2, -0.1, 0.3): |sum| ≥ 0.4 for 0.4, 0.6 and their negations
        assert!((exact - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mc = permutation_test(&a, &b, 20_000, &mut rng).unwrap();
        assert!((mc - exact).abs() < 0.05);
    }
}
