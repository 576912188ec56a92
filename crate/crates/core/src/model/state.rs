//! Expanded latent state space with clone corridors.
//!
//! States are stored 0-based. With an absence state the layout is
//! `[absence, endemic_1..endemic_m, outbreak_1..outbreak_n]`; without one the
//! endemic block starts at index 0. Clone states inside a block advance
//! deterministically, so only three rows of the transition matrix carry free
//! probabilities: absence, the last endemic clone and the last outbreak clone.

use crate::num::Scalar;

/// Collapsed epidemiological regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Absence,
    Endemic,
    Outbreak,
}

impl Regime {
    /// 1-based label used in reports (1 = absence, 2 = endemic, 3 = outbreak).
    pub fn label(self) -> u8 {
        match self {
            Regime::Absence => 1,
            Regime::Endemic => 2,
            Regime::Outbreak => 3,
        }
    }

    pub fn index(self) -> usize {
        self.label() as usize - 1
    }
}

/// Emission block of a count-producing regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Endemic,
    Outbreak,
}

impl Block {
    pub const BOTH: [Block; 2] = [Block::Endemic, Block::Outbreak];

    pub fn index(self) -> usize {
        match self {
            Block::Endemic => 0,
            Block::Outbreak => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Block::Endemic => "EN",
            Block::Outbreak => "OB",
        }
    }
}

/// Free transition probabilities of one area at one time step.
///
/// Complements are stored separately instead of being recomputed as `1 - p`
/// so small probabilities keep full relative precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbs<F> {
    /// absence -> endemic (disease emergence)
    pub p12: F,
    /// absence -> absence
    pub p11: F,
    /// last endemic -> absence (extinction)
    pub p21: F,
    /// last endemic -> last endemic
    pub p22: F,
    /// last endemic -> outbreak (outbreak emergence)
    pub p23: F,
    /// last outbreak -> last outbreak (persistence)
    pub p33: F,
    /// last outbreak -> first endemic
    pub p32: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    has_absence: bool,
    n_endemic: usize,
    n_outbreak: usize,
}

impl Default for StateSpace {
    /// One absence, two endemic and four outbreak states.
    fn default() -> Self {
        Self::new(true, 2, 4).expect("default state space is valid")
    }
}

impl StateSpace {
    pub fn new(has_absence: bool, n_endemic: usize, n_outbreak: usize) -> crate::Result<Self> {
        if n_endemic == 0 || n_outbreak == 0 {
            return Err(crate::Error::Config(
                "endemic and outbreak blocks need at least one state each".into(),
            ));
        }
        if 1 + n_endemic + n_outbreak > u8::MAX as usize {
            return Err(crate::Error::Config("state space too large".into()));
        }
        Ok(Self {
            has_absence,
            n_endemic,
            n_outbreak,
        })
    }

    /// Two-state endemic/outbreak chain without absence or clones.
    pub fn two_state() -> Self {
        Self {
            has_absence: false,
            n_endemic: 1,
            n_outbreak: 1,
        }
    }

    pub fn has_absence(&self) -> bool {
        self.has_absence
    }

    pub fn n_endemic(&self) -> usize {
        self.n_endemic
    }

    pub fn n_outbreak(&self) -> usize {
        self.n_outbreak
    }

    pub fn has_clones(&self) -> bool {
        self.n_endemic > 1 || self.n_outbreak > 1
    }

    /// Total number of expanded states K.
    pub fn len(&self) -> usize {
        usize::from(self.has_absence) + self.n_endemic + self.n_outbreak
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn absence(&self) -> Option<usize> {
        self.has_absence.then_some(0)
    }

    pub fn first_endemic(&self) -> usize {
        usize::from(self.has_absence)
    }

    pub fn last_endemic(&self) -> usize {
        self.first_endemic() + self.n_endemic - 1
    }

    pub fn first_outbreak(&self) -> usize {
        self.last_endemic() + 1
    }

    pub fn last_outbreak(&self) -> usize {
        self.first_outbreak() + self.n_outbreak - 1
    }

    /// Collapse map from expanded to epidemiological regime.
    #[inline]
    pub fn regime(&self, s: usize) -> Regime {
        if self.has_absence && s == 0 {
            Regime::Absence
        } else if s <= self.last_endemic() {
            Regime::Endemic
        } else {
            Regime::Outbreak
        }
    }

    #[inline]
    pub fn is_outbreak(&self, s: usize) -> bool {
        s >= self.first_outbreak()
    }

    #[inline]
    pub fn block(&self, s: usize) -> Option<Block> {
        match self.regime(s) {
            Regime::Absence => None,
            Regime::Endemic => Some(Block::Endemic),
            Regime::Outbreak => Some(Block::Outbreak),
        }
    }

    /// `P(S_t = to | S_{t-1} = from)` given the free probabilities.
    #[inline]
    pub fn prob<F: Scalar>(&self, from: usize, to: usize, tp: &TransitionProbs<F>) -> F {
        let le = self.last_endemic();
        let fo = self.first_outbreak();
        let lo = self.last_outbreak();
        let fe = self.first_endemic();
        if self.has_absence && from == 0 {
            return if to == 0 {
                tp.p11
            } else if to == fe {
                tp.p12
            } else {
                F::zero()
            };
        }
        if from < le {
            return if to == from + 1 { F::one() } else { F::zero() };
        }
        if from == le {
            return if self.has_absence && to == 0 {
                tp.p21
            } else if to == le {
                tp.p22
            } else if to == fo {
                tp.p23
            } else {
                F::zero()
            };
        }
        if from < lo {
            return if to == from + 1 { F::one() } else { F::zero() };
        }
        // last outbreak clone
        if to == lo {
            tp.p33
        } else if to == fe {
            tp.p32
        } else {
            F::zero()
        }
    }

    /// Full transition row out of `from`.
    pub fn row<F: Scalar>(&self, from: usize, tp: &TransitionProbs<F>) -> Vec<F> {
        (0..self.len()).map(|to| self.prob(from, to, tp)).collect()
    }

    /// Whether `from -> to` is possible for some parameter value.
    pub fn structurally_allowed(&self, from: usize, to: usize) -> bool {
        let ones = TransitionProbs {
            p12: 1.0f64,
            p11: 1.0,
            p21: 1.0,
            p22: 1.0,
            p23: 1.0,
            p33: 1.0,
            p32: 1.0,
        };
        self.prob(from, to, &ones) > 0.0
    }

    /// Whether a sequence respects every clone corridor.
    pub fn path_allowed(&self, path: &[u8]) -> bool {
        path.windows(2)
            .all(|w| self.structurally_allowed(w[0] as usize, w[1] as usize))
    }

    /// 1-based names `1..K` as used in reports.
    pub fn labels(&self) -> Vec<String> {
        (1..=self.len()).map(|s| s.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs() -> TransitionProbs<f64> {
        TransitionProbs {
            p12: 0.3,
            p11: 0.7,
            p21: 0.1,
            p22: 0.6,
            p23: 0.3,
            p33: 0.8,
            p32: 0.2,
        }
    }

    #[test]
    fn default_layout_has_seven_states() {
        let ss = StateSpace::default();
        assert_eq!(ss.len(), 7);
        assert_eq!(ss.regime(0), Regime::Absence);
        assert_eq!(ss.regime(1), Regime::Endemic);
        assert_eq!(ss.regime(2), Regime::Endemic);
        for s in 3..7 {
            assert_eq!(ss.regime(s), Regime::Outbreak);
        }
    }

    #[test]
    fn corridors_are_unit_rows() {
        let ss = StateSpace::default();
        let tp = probs();
        // expanded state 2 (index 1) -> 3 (index 2)
        assert_eq!(ss.row(1, &tp), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        // expanded state 4 -> 5 -> 6 -> 7
        assert_eq!(ss.row(3, &tp)[4], 1.0);
        assert_eq!(ss.row(4, &tp)[5], 1.0);
        assert_eq!(ss.row(5, &tp)[6], 1.0);
    }

    #[test]
    fn free_rows_match_three_state_matrix() {
        let ss = StateSpace::default();
        let tp = probs();
        assert_eq!(ss.row(0, &tp), vec![0.7, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ss.row(2, &tp), vec![0.1, 0.0, 0.6, 0.3, 0.0, 0.0, 0.0]);
        assert_eq!(ss.row(6, &tp), vec![0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.8]);
    }

    #[test]
    fn clone_free_space() {
        let ss = StateSpace::two_state();
        let tp = probs();
        assert_eq!(ss.len(), 2);
        assert!(!ss.has_clones());
        assert_eq!(ss.row(0, &tp), vec![0.6, 0.3]);
        assert_eq!(ss.row(1, &tp), vec![0.2, 0.8]);
    }

    #[test]
    fn path_check() {
        let ss = StateSpace::default();
        assert!(ss.path_allowed(&[3, 4, 5, 6, 1, 2]));
        assert!(!ss.path_allowed(&[3, 4, 1]));
        assert!(!ss.path_allowed(&[0, 3]));
    }
}
