//! Parameter containers and the flat coordinate layout used by the sampler.

use super::data::PanelData;
use super::spec::{ModelSpec, Transition};
use super::state::Block;
use crate::num::Scalar;

/// Count-part parameters of one regime (endemic or outbreak).
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionParams<F> {
    /// Per-area log-rate intercepts `β0_i`. Without random intercepts all
    /// entries are equal.
    pub intercepts: Vec<F>,
    /// Random-intercept mean (unused without random intercepts).
    pub intercept_mean: F,
    /// Random-intercept standard deviation (unused without random intercepts).
    pub intercept_sd: F,
    /// Effects of the emission covariates, aligned with `ModelSpec::emission_covariates`.
    pub coefs: Vec<F>,
    /// Autoregressive coefficient on `log(y_{t-1} + 1)`.
    pub rho: F,
    /// Overdispersion.
    pub r: F,
}

impl<F: Scalar> EmissionParams<F> {
    pub fn new(n_areas: usize, n_coefs: usize) -> Self {
        Self {
            intercepts: vec![F::zero(); n_areas],
            intercept_mean: F::zero(),
            intercept_sd: F::one(),
            coefs: vec![F::zero(); n_coefs],
            rho: F::zero(),
            r: F::one(),
        }
    }

    /// `β0_i + x_it' β` (the transmission rate on the log scale).
    #[inline]
    pub fn log_rate(&self, i: usize, t: usize, data: &PanelData<F>, spec: &ModelSpec) -> F {
        let row = data.covariates().row(i, t);
        let mut acc = self.intercepts[i];
        for (b, &q) in self.coefs.iter().zip(&spec.emission_covariates) {
            acc = acc + *b * row[q];
        }
        acc
    }

    /// Conditional mean `exp(β0_i + x_it'β) (y_prev + 1)^ρ`.
    #[inline]
    pub fn mean(&self, i: usize, t: usize, y_prev: u32, data: &PanelData<F>, spec: &ModelSpec) -> F {
        let log_prev = F::from_u32(y_prev).unwrap().ln_1p();
        (self.log_rate(i, t, data, spec) + self.rho * log_prev).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountParams<F> {
    pub endemic: EmissionParams<F>,
    pub outbreak: EmissionParams<F>,
}

impl<F> CountParams<F> {
    pub fn block(&self, b: Block) -> &EmissionParams<F> {
        match b {
            Block::Endemic => &self.endemic,
            Block::Outbreak => &self.outbreak,
        }
    }

    pub fn block_mut(&mut self, b: Block) -> &mut EmissionParams<F> {
        match b {
            Block::Endemic => &mut self.endemic,
            Block::Outbreak => &mut self.outbreak,
        }
    }
}

/// Coefficients of one transition predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCoefs<F> {
    pub intercept: F,
    /// Aligned with `TransitionTerms::covariates`.
    pub coefs: Vec<F>,
    /// Effect of the weighted neighbour outbreak sum; zero when uncoupled.
    pub spatial: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams<F> {
    /// Indexed by [`Transition::index`].
    pub transitions: [TransitionCoefs<F>; 4],
}

impl<F> ChainParams<F> {
    pub fn get(&self, tr: Transition) -> &TransitionCoefs<F> {
        &self.transitions[tr.index()]
    }

    pub fn get_mut(&mut self, tr: Transition) -> &mut TransitionCoefs<F> {
        &mut self.transitions[tr.index()]
    }
}

/// Full parameter vector `v = β ∪ θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<F> {
    pub count: CountParams<F>,
    pub chain: ChainParams<F>,
}

impl<F: Scalar> ParamVector<F> {
    /// All-zero parameters shaped for `spec` (r = 1, unit random-intercept sd).
    pub fn zeros(spec: &ModelSpec, n_areas: usize) -> Self {
        let n_x = spec.emission_covariates.len();
        let coefs = |tr: Transition| TransitionCoefs {
            intercept: F::zero(),
            coefs: vec![F::zero(); spec.terms(tr).covariates.len()],
            spatial: F::zero(),
        };
        Self {
            count: CountParams {
                endemic: EmissionParams::new(n_areas, n_x),
                outbreak: EmissionParams::new(n_areas, n_x),
            },
            chain: ChainParams {
                transitions: Transition::ALL.map(coefs),
            },
        }
    }

    pub fn get(&self, id: ParamId) -> F {
        match id {
            ParamId::Intercept { block, area } => self.count.block(block).intercepts[area.unwrap_or(0)],
            ParamId::InterceptMean(b) => self.count.block(b).intercept_mean,
            ParamId::InterceptSd(b) => self.count.block(b).intercept_sd,
            ParamId::Coef { block, k } => self.count.block(block).coefs[k],
            ParamId::Rho(b) => self.count.block(b).rho,
            ParamId::Overdispersion(Some(b)) => self.count.block(b).r,
            ParamId::Overdispersion(None) => self.count.endemic.r,
            ParamId::Alpha { tr, term } => {
                let c = self.chain.get(tr);
                match term {
                    Term::Intercept => c.intercept,
                    Term::Covariate(k) => c.coefs[k],
                    Term::Spatial => c.spatial,
                }
            }
        }
    }

    /// Sets one coordinate; shared intercepts and shared overdispersion are
    /// written to every tied slot.
    pub fn set(&mut self, id: ParamId, v: F) {
        match id {
            ParamId::Intercept { block, area: Some(i) } => self.count.block_mut(block).intercepts[i] = v,
            ParamId::Intercept { block, area: None } => {
                self.count.block_mut(block).intercepts.iter_mut().for_each(|b| *b = v)
            }
            ParamId::InterceptMean(b) => self.count.block_mut(b).intercept_mean = v,
            ParamId::InterceptSd(b) => self.count.block_mut(b).intercept_sd = v,
            ParamId::Coef { block, k } => self.count.block_mut(block).coefs[k] = v,
            ParamId::Rho(b) => self.count.block_mut(b).rho = v,
            ParamId::Overdispersion(Some(b)) => self.count.block_mut(b).r = v,
            ParamId::Overdispersion(None) => {
                self.count.endemic.r = v;
                self.count.outbreak.r = v;
            }
            ParamId::Alpha { tr, term } => {
                let c = self.chain.get_mut(tr);
                match term {
                    Term::Intercept => c.intercept = v,
                    Term::Covariate(k) => c.coefs[k] = v,
                    Term::Spatial => c.spatial = v,
                }
            }
        }
    }

    /// Flat vector in layout order.
    pub fn to_flat(&self, layout: &ParamLayout) -> Vec<F> {
        layout.ids().iter().map(|&id| self.get(id)).collect()
    }

    /// Writes a flat vector (layout order) onto `self`.
    pub fn assign_flat(&mut self, layout: &ParamLayout, values: &[F]) {
        for (&id, &v) in layout.ids().iter().zip(values) {
            self.set(id, v);
        }
    }
}

/// Term of a transition predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    Covariate(usize),
    Spatial,
}

/// One scalar coordinate of `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    /// `area = None` means the intercept shared by every area.
    Intercept { block: Block, area: Option<usize> },
    InterceptMean(Block),
    InterceptSd(Block),
    Coef { block: Block, k: usize },
    Rho(Block),
    /// `None` means the overdispersion shared by both regimes.
    Overdispersion(Option<Block>),
    Alpha { tr: Transition, term: Term },
}

impl ParamId {
    /// Emission block(s) whose densities change with this coordinate.
    pub fn emission_blocks(self) -> &'static [Block] {
        match self {
            ParamId::Intercept { block, .. }
            | ParamId::Coef { block, .. }
            | ParamId::Rho(block)
            | ParamId::Overdispersion(Some(block)) => match block {
                Block::Endemic => &[Block::Endemic],
                Block::Outbreak => &[Block::Outbreak],
            },
            ParamId::Overdispersion(None) => &Block::BOTH,
            _ => &[],
        }
    }

    /// Whether the transmission constraints involve this coordinate.
    pub fn in_constraint(self) -> bool {
        matches!(
            self,
            ParamId::Intercept { .. } | ParamId::Coef { .. } | ParamId::Rho(_)
        )
    }
}

/// Ordered list of sampled coordinates with display names.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    ids: Vec<ParamId>,
    names: Vec<String>,
}

impl ParamLayout {
    /// Declaration order: endemic block, outbreak block, overdispersion, then
    /// transitions 12, 21, 23, 33 (intercept, covariates, coupling).
    pub fn new<F: Scalar>(spec: &ModelSpec, data: &PanelData<F>) -> Self {
        let cov_names = data.covariates().names();
        let mut ids = Vec::new();
        let mut names = Vec::new();
        let mut push = |id: ParamId, name: String| {
            ids.push(id);
            names.push(name);
        };
        for block in Block::BOTH {
            let tag = block.tag();
            if spec.random_intercepts {
                for (i, area) in data.area_ids().iter().enumerate() {
                    push(
                        ParamId::Intercept { block, area: Some(i) },
                        format!("beta0_{tag}[{area}]"),
                    );
                }
                push(ParamId::InterceptMean(block), format!("beta0_mean_{tag}"));
                push(ParamId::InterceptSd(block), format!("sigma_{tag}"));
            } else {
                push(ParamId::Intercept { block, area: None }, format!("beta0_{tag}"));
            }
            for (k, &q) in spec.emission_covariates.iter().enumerate() {
                push(ParamId::Coef { block, k }, format!("beta_{tag}[{}]", cov_names[q]));
            }
            push(ParamId::Rho(block), format!("rho_{tag}"));
            if !spec.shared_overdispersion {
                push(ParamId::Overdispersion(Some(block)), format!("r_{tag}"));
            }
        }
        if spec.shared_overdispersion {
            push(ParamId::Overdispersion(None), "r".to_string());
        }
        for tr in spec.active_transitions() {
            let code = tr.code();
            push(ParamId::Alpha { tr, term: Term::Intercept }, format!("alpha_{code}_0"));
            for (k, &q) in spec.terms(tr).covariates.iter().enumerate() {
                push(
                    ParamId::Alpha { tr, term: Term::Covariate(k) },
                    format!("alpha_{code}[{}]", cov_names[q]),
                );
            }
            if spec.terms(tr).spatial {
                push(ParamId::Alpha { tr, term: Term::Spatial }, format!("alpha_{code}_spat"));
            }
        }
        Self { ids, names }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariates, Neighbor, Variant};

    fn data() -> PanelData<f64> {
        let cov = Covariates::from_columns(
            2,
            2,
            vec![("beds".into(), vec![0.0, 0.0, 1.0, 1.0])],
        )
        .unwrap();
        PanelData::new(
            vec!["a".into(), "b".into()],
            2,
            vec![0; 4],
            cov,
            vec![vec![Neighbor { area: 1, weight: 1.0 }], vec![]],
        )
        .unwrap()
    }

    #[test]
    fn layout_names_are_unique_and_ordered() {
        let mut spec = ModelSpec::coupled();
        spec.emission_covariates = vec![0];
        spec.transitions[Transition::OutbreakEmergence.index()].covariates = vec![0];
        let d = data();
        let layout = ParamLayout::new(&spec, &d);
        let names = layout.names();
        let mut uniq = names.to_vec();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), names.len());
        assert_eq!(names[0], "beta0_EN");
        assert!(names.contains(&"alpha_23[beds]".to_string()));
        assert!(names.contains(&"alpha_33_spat".to_string()));
    }

    #[test]
    fn shared_slots_write_through() {
        let mut spec = ModelSpec::coupled().with_variant(Variant::NonCoupled);
        spec.shared_overdispersion = true;
        let d = data();
        let layout = ParamLayout::new(&spec, &d);
        let mut p = ParamVector::<f64>::zeros(&spec, 2);
        let flat: Vec<f64> = (0..layout.len()).map(|k| k as f64 + 1.0).collect();
        p.assign_flat(&layout, &flat);
        assert_eq!(p.to_flat(&layout), flat);
        assert_eq!(p.count.endemic.r, p.count.outbreak.r);
        assert_eq!(p.count.endemic.intercepts[0], p.count.endemic.intercepts[1]);
        assert!(!layout.names().iter().any(|n| n.ends_with("_spat")));
    }
}
