//! Prior families, defaults and the truncated log prior.

use std::fmt;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Gamma, Normal, Uniform};

use crate::model::{
    constraints_satisfied, Block, Constraints, ModelSpec, PanelData, ParamId, ParamLayout,
    ParamVector, Term, Transition,
};
use crate::num::{lit, ln_gamma, to_f64, Scalar};
use crate::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Scale (in units of the covariate sd) of the transition-effect Cauchy prior.
const CAUCHY_COEF_SCALE: f64 = 2.5 / 2.0;
/// Spatial-effect prior sd for a unit weight.
const SPATIAL_SD: f64 = 0.36;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    Normal { mean: f64, sd: f64 },
    Cauchy { loc: f64, scale: f64 },
    /// Support `(lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Shape/rate parameterization.
    Gamma { shape: f64, rate: f64 },
    /// Per-area intercept drawn from `N(block mean, block sd²)`; the
    /// hyperparameters live in the parameter vector.
    RandomEffect,
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Prior::Cauchy { loc, scale } => loc.is_finite() && scale > 0.0 && scale.is_finite(),
            Prior::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Prior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            Prior::RandomEffect => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior {self}")))
        }
    }

    /// Log density; `-inf` outside the support. `RandomEffect` needs the
    /// hyperparameters and is handled by [`log_prior`].
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -LN_SQRT_2PI - sd.ln() - 0.5 * z * z
            }
            Prior::Cauchy { loc, scale } => {
                let z = (x - loc) / scale;
                -(std::f64::consts::PI * scale).ln() - z.mul_add(z, 1.0).ln()
            }
            Prior::Uniform { lo, hi } => {
                if x > lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Gamma { shape, rate } => {
                if x > 0.0 {
                    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::RandomEffect => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Prior::Cauchy { loc, scale } => Cauchy::new(loc, scale).expect("validated").sample(rng),
            Prior::Uniform { lo, hi } => loop {
                let x = Uniform::new(lo, hi).expect("validated").sample(rng);
                if x > lo {
                    break x;
                }
            },
            Prior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            Prior::RandomEffect => 0.0,
        }
    }

    /// Draw used for random chain starts: bounded priors are sampled as-is,
    /// unbounded location families are narrowed to at most unit scale so
    /// starts land where the likelihood is numerically usable.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::Normal { mean, sd } => Prior::Normal { mean, sd: sd.min(1.0) }.sample(rng),
            Prior::Cauchy { loc, scale } => Prior::Normal { mean: loc, sd: scale.min(1.0) }.sample(rng),
            Prior::Gamma { shape, rate } => Prior::Gamma { shape, rate }.sample(rng).min(5.0),
            other => other.sample(rng),
        }
    }

    /// Parses `normal(m, s)`, `cauchy(l, s)`, `uniform(a, b)`, `gamma(k, r)`
    /// or `random-effect`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "random-effect" {
            return Ok(Prior::RandomEffect);
        }
        let bad = || Error::Config(format!("cannot parse prior '{text}'"));
        let (name, rest) = text.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let vals: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if vals.len() != 2 {
            return Err(bad());
        }
        let (a, b) = (vals[0], vals[1]);
        let p = match name.trim() {
            "normal" => Prior::Normal { mean: a, sd: b },
            "cauchy" => Prior::Cauchy { loc: a, scale: b },
            "uniform" => Prior::Uniform { lo: a, hi: b },
            "gamma" => Prior::Gamma { shape: a, rate: b },
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Prior::Normal { mean, sd } => write!(f, "normal({mean}, {sd})"),
            Prior::Cauchy { loc, scale } => write!(f, "cauchy({loc}, {scale})"),
            Prior::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            Prior::Gamma { shape, rate } => write!(f, "gamma({shape}, {rate})"),
            Prior::RandomEffect => write!(f, "random-effect"),
        }
    }
}

/// One prior per sampled coordinate, aligned with a [`ParamLayout`], plus
/// the truncating constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    layout: ParamLayout,
    priors: Vec<Prior>,
    pub constraints: Constraints,
}

/// Knobs for [`default_priors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorOptions {
    /// `N(0, 2.5²)` on transition intercepts instead of `Cauchy(0, 10)`.
    pub shrink_intercepts: bool,
    pub constraints: Constraints,
}

impl Default for PriorOptions {
    fn default() -> Self {
        Self {
            shrink_intercepts: false,
            constraints: Constraints::strong(),
        }
    }
}

/// Default priors for `spec` on `data`.
///
/// Transition covariate effects get `Cauchy(0, 1.25 / sd(z))`, coupling
/// effects `N(0, (0.36 / max ω)²)`, overdispersions `U(0, 10]` (endemic) and
/// `U(0, 50]` (outbreak, or shared), autoregressive terms `U(0, 1)`, other
/// count coefficients `N(0, 10²)` and random-intercept sds `Gamma(1, 0.5)`.
pub fn default_priors<F: Scalar>(
    spec: &ModelSpec,
    data: &PanelData<F>,
    opts: PriorOptions,
) -> Result<PriorSpec> {
    let layout = ParamLayout::new(spec, data);
    let names = data.covariates().names();
    let max_w = data.max_weight().map(to_f64).unwrap_or(1.0);
    let mut priors = Vec::with_capacity(layout.len());
    for &id in layout.ids() {
        let p = match id {
            ParamId::Intercept { area: Some(_), .. } => Prior::RandomEffect,
            ParamId::Intercept { area: None, .. }
            | ParamId::InterceptMean(_)
            | ParamId::Coef { .. } => Prior::Normal { mean: 0.0, sd: 10.0 },
            ParamId::InterceptSd(_) => Prior::Gamma { shape: 1.0, rate: 0.5 },
            ParamId::Rho(_) => Prior::Uniform { lo: 0.0, hi: 1.0 },
            ParamId::Overdispersion(Some(Block::Endemic)) => Prior::Uniform { lo: 0.0, hi: 10.0 },
            ParamId::Overdispersion(_) => Prior::Uniform { lo: 0.0, hi: 50.0 },
            ParamId::Alpha { term: Term::Intercept, .. } => {
                if opts.shrink_intercepts {
                    Prior::Normal { mean: 0.0, sd: 2.5 }
                } else {
                    Prior::Cauchy { loc: 0.0, scale: 10.0 }
                }
            }
            ParamId::Alpha { tr, term: Term::Covariate(k) } => {
                let q = spec.terms(tr).covariates[k];
                let sd = to_f64(data.covariates().column_sd(q, 0..data.n_times()));
                if !(sd > 0.0) {
                    return Err(Error::Data(format!(
                        "covariate '{}' has zero standard deviation",
                        names[q]
                    )));
                }
                Prior::Cauchy { loc: 0.0, scale: CAUCHY_COEF_SCALE / sd }
            }
            ParamId::Alpha { term: Term::Spatial, .. } => Prior::Normal {
                mean: 0.0,
                sd: SPATIAL_SD / max_w,
            },
        };
        priors.push(p);
    }
    Ok(PriorSpec {
        layout,
        priors,
        constraints: opts.constraints,
    })
}

impl PriorSpec {
    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    pub fn prior(&self, k: usize) -> Prior {
        self.priors[k]
    }

    /// Replaces the prior of the coordinate called `name`.
    pub fn set(&mut self, name: &str, prior: Prior) -> Result<()> {
        prior.validate()?;
        let k = self
            .layout
            .position(name)
            .ok_or_else(|| Error::Config(format!("no parameter named '{name}'")))?;
        self.priors[k] = prior;
        Ok(())
    }

    /// Sets every coupling-effect prior at once.
    pub fn set_spatial(&mut self, prior: Prior) -> Result<()> {
        prior.validate()?;
        for (k, id) in self.layout.ids().iter().enumerate() {
            if matches!(id, ParamId::Alpha { term: Term::Spatial, .. }) {
                self.priors[k] = prior;
            }
        }
        Ok(())
    }

    /// Coupling prior for one transition, if that transition has a coupling term.
    pub fn spatial_prior(&self, tr: Transition) -> Option<Prior> {
        self.layout
            .ids()
            .iter()
            .position(|&id| id == ParamId::Alpha { tr, term: Term::Spatial })
            .map(|k| self.priors[k])
    }
}

fn random_effect_logdensity<F: Scalar>(params: &ParamVector<F>, id: ParamId) -> f64 {
    let ParamId::Intercept { block, area: Some(i) } = id else {
        return 0.0;
    };
    let p = params.count.block(block);
    let sd = to_f64(p.intercept_sd);
    if !(sd > 0.0) {
        return f64::NEG_INFINITY;
    }
    Prior::Normal {
        mean: to_f64(p.intercept_mean),
        sd,
    }
    .log_density(to_f64(p.intercepts[i]))
}

/// Prior log density ignoring the constraint truncation.
pub fn log_prior_unconstrained<F: Scalar>(params: &ParamVector<F>, spec: &PriorSpec) -> F {
    let mut total = 0.0;
    for (&id, prior) in spec.layout.ids().iter().zip(&spec.priors) {
        total += match prior {
            Prior::RandomEffect => random_effect_logdensity(params, id),
            p => p.log_density(to_f64(params.get(id))),
        };
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    lit(total)
}

/// Truncated prior log density: `-inf` when a bound or the transmission
/// constraint is violated. The truncation's normalizing constant is omitted.
pub fn log_prior<F: Scalar>(
    params: &ParamVector<F>,
    spec: &PriorSpec,
    data: &PanelData<F>,
    model: &ModelSpec,
) -> F {
    let lp = log_prior_unconstrained(params, spec);
    if lp == F::neg_infinity() || !constraints_satisfied(&params.count, data, model, &spec.constraints) {
        return F::neg_infinity();
    }
    lp
}

/// Random starting point inside the constrained support.
///
/// Draws each coordinate from [`Prior::sample_start`], swaps the endemic and
/// outbreak blocks when that alone fixes the ordering, and retries up to
/// `max_tries` times.
pub fn sample_start<F: Scalar, R: Rng + ?Sized>(
    spec: &PriorSpec,
    model: &ModelSpec,
    data: &PanelData<F>,
    rng: &mut R,
    max_tries: usize,
) -> Result<ParamVector<F>> {
    let mut p = ParamVector::zeros(model, data.n_areas());
    for _ in 0..max_tries {
        draw_coordinates(spec, &mut p, rng, true);
        if log_prior(&p, spec, data, model).is_finite() {
            return Ok(p);
        }
        let mut swapped = p.clone();
        std::mem::swap(&mut swapped.count.endemic, &mut swapped.count.outbreak);
        if log_prior(&swapped, spec, data, model).is_finite() {
            return Ok(swapped);
        }
    }
    Err(Error::Init(format!(
        "no constrained starting point after {max_tries} draws"
    )))
}

/// Exact draw from the truncated prior by rejection.
pub fn sample_prior<F: Scalar, R: Rng + ?Sized>(
    spec: &PriorSpec,
    model: &ModelSpec,
    data: &PanelData<F>,
    rng: &mut R,
    max_tries: usize,
) -> Result<ParamVector<F>> {
    let mut p = ParamVector::zeros(model, data.n_areas());
    for _ in 0..max_tries {
        draw_coordinates(spec, &mut p, rng, false);
        if log_prior(&p, spec, data, model).is_finite() {
            return Ok(p);
        }
    }
    Err(Error::Init(format!("prior rejection failed after {max_tries} draws")))
}

fn draw_coordinates<F: Scalar, R: Rng + ?Sized>(
    spec: &PriorSpec,
    p: &mut ParamVector<F>,
    rng: &mut R,
    start: bool,
) {
    let ids = spec.layout.ids();
    // Hyperparameters first so random effects can be drawn around them.
    for (&id, prior) in ids.iter().zip(&spec.priors) {
        if matches!(prior, Prior::RandomEffect) {
            continue;
        }
        let v = if start { prior.sample_start(rng) } else { prior.sample(rng) };
        p.set(id, lit(v));
    }
    for (&id, prior) in ids.iter().zip(&spec.priors) {
        if let (Prior::RandomEffect, ParamId::Intercept { block, .. }) = (prior, id) {
            let b = p.count.block(block);
            let re = Prior::Normal {
                mean: to_f64(b.intercept_mean),
                sd: to_f64(b.intercept_sd).max(1e-12),
            };
            p.set(id, lit(re.sample(rng)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Covariates, Neighbor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(weight: f64, z_sd: f64) -> PanelData<f64> {
        // alternating ±1 has sd √(8/7) over 8 cells; rescale to z_sd
        let vals: Vec<f64> = (0..8).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let scale = z_sd / (8.0f64 / 7.0).sqrt();
        let z: Vec<f64> = vals.iter().map(|v| v * scale).collect();
        let cov = Covariates::from_columns(2, 4, vec![("z".into(), z)]).unwrap();
        PanelData::new(
            vec!["a".into(), "b".into()],
            4,
            vec![0; 8],
            cov,
            vec![vec![Neighbor { area: 1, weight }], vec![]],
        )
        .unwrap()
    }

    fn spec_with_z() -> ModelSpec {
        let mut s = ModelSpec::coupled();
        s.transitions[Transition::OutbreakEmergence.index()].covariates = vec![0];
        s
    }

    #[test]
    fn data_dependent_scales() {
        let d = data(0.72, 1.25);
        let ps = default_priors(&spec_with_z(), &d, PriorOptions::default()).unwrap();
        let k = ps.layout().position("alpha_23[z]").unwrap();
        match ps.prior(k) {
            Prior::Cauchy { scale, .. } => assert!((scale - 1.0).abs() < 1e-12),
            p => panic!("unexpected {p}"),
        }
        match ps.spatial_prior(Transition::Persistence).unwrap() {
            Prior::Normal { sd, .. } => assert!((sd - 0.5).abs() < 1e-12),
            p => panic!("unexpected {p}"),
        }
    }

    #[test]
    fn zero_sd_transition_covariate_is_rejected() {
        let cov = Covariates::from_columns(1, 3, vec![("flat".into(), vec![1.0; 3])]).unwrap();
        let d = PanelData::new(vec!["a".into()], 3, vec![0; 3], cov, vec![vec![]]).unwrap();
        let mut s = ModelSpec::coupled();
        s.transitions[0].covariates = vec![0];
        let err = default_priors(&s, &d, PriorOptions::default()).unwrap_err();
        assert!(err.to_string().contains("flat"));
    }

    #[test]
    fn truncation_and_bounds() {
        let d = data(1.0, 1.0);
        let spec = ModelSpec::coupled();
        let ps = default_priors(&spec, &d, PriorOptions::default()).unwrap();
        let mut p = ParamVector::<f64>::zeros(&spec, 2);
        p.count.endemic.rho = 0.3;
        p.count.outbreak.rho = 0.6;
        p.count.outbreak.intercepts = vec![1.0; 2];
        p.count.endemic.r = 2.0;
        p.count.outbreak.r = 20.0;
        assert!(log_prior(&p, &ps, &d, &spec).is_finite());
        p.count.outbreak.r = 51.0;
        assert_eq!(log_prior(&p, &ps, &d, &spec), f64::NEG_INFINITY);
        p.count.outbreak.r = 20.0;
        p.count.outbreak.rho = 0.32;
        assert_eq!(log_prior(&p, &ps, &d, &spec), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_samples_satisfy_constraints() {
        let d = data(1.0, 1.0);
        let spec = ModelSpec::coupled();
        let ps = default_priors(&spec, &d, PriorOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = sample_prior(&ps, &spec, &d, &mut rng, 10_000).unwrap();
            assert!(constraints_satisfied(&p.count, &d, &spec, &ps.constraints));
            let s = sample_start(&ps, &spec, &d, &mut rng, 10_000).unwrap();
            assert!(log_prior(&s, &ps, &d, &spec).is_finite());
        }
    }

    #[test]
    fn parse_round_trip() {
        for p in [
            Prior::Normal { mean: 0.0, sd: 2.5 },
            Prior::Cauchy { loc: 0.0, scale: 10.0 },
            Prior::Uniform { lo: 0.0, hi: 50.0 },
            Prior::Gamma { shape: 1.0, rate: 0.5 },
            Prior::RandomEffect,
        ] {
            assert_eq!(Prior::parse(&p.to_string()).unwrap(), p);
        }
        assert!(Prior::parse("normal(0, -1)").is_err());
        assert!(Prior::parse("beta(1, 1)").is_err());
    }
}
