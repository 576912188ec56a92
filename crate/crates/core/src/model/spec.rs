//! Structural model configuration: which terms enter which linear predictor.

use super::data::PanelData;
use super::state::StateSpace;
use crate::num::{lit, Scalar};
use crate::{Error, Result};

/// The four free transitions of the collapsed chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    /// absence -> endemic (`p12`)
    Emergence,
    /// endemic -> absence (`p21`)
    Extinction,
    /// endemic -> outbreak (`p23`)
    OutbreakEmergence,
    /// outbreak -> outbreak (`p33`)
    Persistence,
}

impl Transition {
    pub const ALL: [Transition; 4] = [
        Transition::Emergence,
        Transition::Extinction,
        Transition::OutbreakEmergence,
        Transition::Persistence,
    ];

    pub fn index(self) -> usize {
        match self {
            Transition::Emergence => 0,
            Transition::Extinction => 1,
            Transition::OutbreakEmergence => 2,
            Transition::Persistence => 3,
        }
    }

    /// Two-digit code `12`, `21`, `23` or `33`.
    pub fn code(self) -> &'static str {
        match self {
            Transition::Emergence => "12",
            Transition::Extinction => "21",
            Transition::OutbreakEmergence => "23",
            Transition::Persistence => "33",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }
}

/// Covariates and neighbour coupling entering one transition predictor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionTerms {
    /// Column indices into the panel covariate table.
    pub covariates: Vec<usize>,
    pub spatial: bool,
}

/// Initial state distribution `p(S*_i1)`, fixed by the modeller.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    /// Uniform over all K expanded states.
    UniformExpanded,
    /// Uniform over the collapsed regimes, split evenly across clones.
    UniformCollapsed,
    /// Explicit per-area probability vectors over the expanded states.
    PerArea(Vec<Vec<f64>>),
}

/// Named model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Coupled,
    NonCoupled,
    NoAbsenceClone,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(Variant::Coupled),
            "non-coupled" | "noncoupled" => Ok(Variant::NonCoupled),
            "no-absence-clone" => Ok(Variant::NoAbsenceClone),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub states: StateSpace,
    /// Column indices of emission covariates `x_it` (shared by both blocks).
    pub emission_covariates: Vec<usize>,
    pub random_intercepts: bool,
    /// Single overdispersion `r` for both count regimes.
    pub shared_overdispersion: bool,
    /// Indexed by [`Transition::index`].
    pub transitions: [TransitionTerms; 4],
    pub initial: InitialDistribution,
}

impl ModelSpec {
    /// Default CMSNB(1,2,4) layout with no covariates and coupling on every
    /// transition.
    pub fn coupled() -> Self {
        let spatial = TransitionTerms {
            covariates: Vec::new(),
            spatial: true,
        };
        Self {
            states: StateSpace::default(),
            emission_covariates: Vec::new(),
            random_intercepts: false,
            shared_overdispersion: false,
            transitions: [spatial.clone(), spatial.clone(), spatial.clone(), spatial],
            initial: InitialDistribution::UniformExpanded,
        }
    }

    /// Applies a named variant on top of this spec.
    pub fn with_variant(mut self, variant: Variant) -> Self {
        match variant {
            Variant::Coupled => {}
            Variant::NonCoupled => {
                for t in &mut self.transitions {
                    t.spatial = false;
                }
            }
            Variant::NoAbsenceClone => {
                self.states = StateSpace::two_state();
                for t in &mut self.transitions {
                    t.spatial = false;
                }
            }
        }
        self
    }

    pub fn terms(&self, tr: Transition) -> &TransitionTerms {
        &self.transitions[tr.index()]
    }

    /// Transitions that exist in this state space.
    pub fn active_transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        Transition::ALL.into_iter().filter(move |tr| {
            self.states.has_absence()
                || !matches!(tr, Transition::Emergence | Transition::Extinction)
        })
    }

    /// Whether any active transition depends on neighbouring outbreaks.
    pub fn is_coupled(&self) -> bool {
        self.active_transitions().any(|tr| self.terms(tr).spatial)
    }

    /// Copy of this spec with every coupling term removed.
    pub fn decoupled(&self) -> Self {
        let mut s = self.clone();
        for t in &mut s.transitions {
            t.spatial = false;
        }
        s
    }

    pub fn validate<F: Scalar>(&self, data: &PanelData<F>) -> Result<()> {
        let n_cov = data.covariates().len();
        let bad = self
            .emission_covariates
            .iter()
            .chain(self.transitions.iter().flat_map(|t| t.covariates.iter()))
            .find(|&&q| q >= n_cov);
        if let Some(q) = bad {
            return Err(Error::Config(format!("covariate index {q} out of range")));
        }
        if let InitialDistribution::PerArea(rows) = &self.initial {
            if rows.len() != data.n_areas() {
                return Err(Error::Config("initial distribution needs one row per area".into()));
            }
            for row in rows {
                if row.len() != self.states.len() {
                    return Err(Error::Config(format!(
                        "initial distribution rows need {} entries",
                        self.states.len()
                    )));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                    return Err(Error::Config("initial distribution rows must sum to 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Initial probability vector for area `i`.
    pub fn initial_probs<F: Scalar>(&self, i: usize) -> Vec<F> {
        let k = self.states.len();
        match &self.initial {
            InitialDistribution::UniformExpanded => vec![lit::<F>(1.0 / k as f64); k],
            InitialDistribution::UniformCollapsed => {
                let n_regimes = if self.states.has_absence() { 3.0 } else { 2.0 };
                (0..k)
                    .map(|s| {
                        let size = match self.states.regime(s) {
                            super::Regime::Absence => 1,
                            super::Regime::Endemic => self.states.n_endemic(),
                            super::Regime::Outbreak => self.states.n_outbreak(),
                        };
                        lit::<F>(1.0 / (n_regimes * size as f64))
                    })
                    .collect()
            }
            InitialDistribution::PerArea(rows) => rows[i].iter().map(|&p| lit::<F>(p)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_toggle_coupling_and_states() {
        let s = ModelSpec::coupled();
        assert!(s.is_coupled());
        assert!(!s.clone().with_variant(Variant::NonCoupled).is_coupled());
        let two = s.with_variant(Variant::NoAbsenceClone);
        assert_eq!(two.states.len(), 2);
        assert_eq!(two.active_transitions().count(), 2);
    }

    #[test]
    fn initial_distributions_normalize() {
        let mut s = ModelSpec::coupled();
        let p: Vec<f64> = s.initial_probs(0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        s.initial = InitialDistribution::UniformCollapsed;
        let p: Vec<f64> = s.initial_probs(0);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((p[6] - 1.0 / 12.0).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
