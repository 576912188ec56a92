//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `counts`, `covariates`, `neighbors` | — | input CSV paths |
//! | `out` | `results` | output directory |
//! | `seed` | 1 | master seed |
//! | `chains` | 3 | |
//! | `iterations` | 200000 | total per chain, burn-in included |
//! | `burn_in` | 50000 | |
//! | `state_thin` | 10 | keep latent states every n-th kept iteration |
//! | `state_sampler` | `block` | `block` or `single-site` |
//! | `parallel` | `true` | chains on a thread pool |
//! | `online_waic` | `true` | accumulate WAIC while sampling |
//! | `variant` | `coupled` | `coupled`, `non-coupled`, `no-absence-clone` |
//! | `absence` | `true` | include the absence state |
//! | `n_endemic`, `n_outbreak` | 2, 4 | clone counts (minimum durations) |
//! | `constraints` | `strong` | `strong` or `weak` |
//! | `eps_rate`, `eps_rho` | 0.01, 0.05 | constraint gaps |
//! | `emission_covariates` | empty | comma list of covariate names |
//! | `covariates_12` … `covariates_33` | empty | transition covariates |
//! | `spatial` | `12,21,23,33` | transitions with a neighbour term |
//! | `random_intercepts`, `shared_overdispersion` | `false` | |
//! | `initial` | `uniform-expanded` | or `uniform-collapsed` |
//! | `shrink_intercepts` | `false` | normal instead of Cauchy intercept priors |
//! | `scale_covariates` | `true` | divide centred covariates by their sd |
//! | `prior.<name>` | model default | e.g. `prior.alpha_23_spat = normal(0, 0.5)` |
//! | `prior.spatial` | model default | every neighbour-term prior |

use std::path::{Path, PathBuf};

use crate::model::{ConstraintKind, Constraints, InitialDistribution, ModelSpec, PanelData, StateSpace, Transition, Variant};
use crate::priors::{default_priors, Prior, PriorOptions, PriorSpec};
use crate::sampler::{SamplerConfig, StateSampler};
use crate::{Error, Result};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "CMSNB_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub counts: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub neighbors: Option<PathBuf>,
    pub out: PathBuf,
    pub sampler: SamplerConfig,
    pub variant: Variant,
    pub absence: Option<bool>,
    pub n_endemic: Option<usize>,
    pub n_outbreak: Option<usize>,
    pub constraints: Constraints,
    pub emission_covariates: Vec<String>,
    pub transition_covariates: [Vec<String>; 4],
    pub spatial: [bool; 4],
    pub random_intercepts: bool,
    pub shared_overdispersion: bool,
    pub initial: InitialDistribution,
    pub shrink_intercepts: bool,
    pub scale_covariates: bool,
    /// `(parameter name or "spatial", prior)` in file order.
    pub priors: Vec<(String, Prior)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            counts: None,
            covariates: None,
            neighbors: None,
            out: PathBuf::from("results"),
            sampler: SamplerConfig {
                online_waic: true,
                ..SamplerConfig::default()
            },
            variant: Variant::Coupled,
            absence: None,
            n_endemic: None,
            n_outbreak: None,
            constraints: Constraints::strong(),
            emission_covariates: Vec::new(),
            transition_covariates: Default::default(),
            spatial: [true; 4],
            random_intercepts: false,
            shared_overdispersion: false,
            initial: InitialDistribution::UniformExpanded,
            shrink_intercepts: false,
            scale_covariates: true,
            priors: Vec::new(),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("'{key}' expects true or false, found '{v}'"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("'{key}' has an invalid value '{v}'")))
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", k + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", k + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&super::read_text(path)?)
    }

    /// The file named by `explicit`, else by `CMSNB_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    /// Applies one setting; used for both file lines and command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.sampler;
        match key {
            "counts" => self.counts = Some(v.into()),
            "covariates" => self.covariates = Some(v.into()),
            "neighbors" => self.neighbors = Some(v.into()),
            "out" => self.out = v.into(),
            "seed" => s.seed = parse_num(key, v)?,
            "chains" => s.n_chains = parse_num(key, v)?,
            "iterations" => s.n_iterations = parse_num(key, v)?,
            "burn_in" => s.burn_in = parse_num(key, v)?,
            "state_thin" => s.state_thin = parse_num(key, v)?,
            "state_sampler" => {
                s.state_sampler = match v {
                    "block" => StateSampler::Block,
                    "single-site" => StateSampler::SingleSite,
                    _ => return Err(Error::Config(format!("unknown state sampler '{v}'"))),
                }
            }
            "parallel" => s.parallel = parse_bool(key, v)?,
            "online_waic" => s.online_waic = parse_bool(key, v)?,
            "variant" => self.variant = Variant::parse(v)?,
            "absence" => self.absence = Some(parse_bool(key, v)?),
            "n_endemic" => self.n_endemic = Some(parse_num(key, v)?),
            "n_outbreak" => self.n_outbreak = Some(parse_num(key, v)?),
            "constraints" => {
                let (eps_rate, eps_rho) = (self.constraints.eps_rate, self.constraints.eps_rho);
                let fresh = match v {
                    "strong" => Constraints::strong(),
                    "weak" => Constraints::weak(),
                    _ => return Err(Error::Config(format!("unknown constraint kind '{v}'"))),
                };
                // keep explicitly set gaps only if the kind does not change
                self.constraints = if fresh.kind == self.constraints.kind {
                    Constraints { eps_rate, eps_rho, ..fresh }
                } else {
                    fresh
                };
            }
            "eps_rate" => self.constraints.eps_rate = parse_num(key, v)?,
            "eps_rho" => self.constraints.eps_rho = parse_num(key, v)?,
            "emission_covariates" => self.emission_covariates = parse_list(v),
            "spatial" => {
                let mut flags = [false; 4];
                for code in parse_list(v) {
                    let tr = Transition::from_code(&code)
                        .ok_or_else(|| Error::Config(format!("unknown transition '{code}'")))?;
                    flags[tr.index()] = true;
                }
                self.spatial = flags;
            }
            "random_intercepts" => self.random_intercepts = parse_bool(key, v)?,
            "shared_overdispersion" => self.shared_overdispersion = parse_bool(key, v)?,
            "initial" => {
                self.initial = match v {
                    "uniform-expanded" => InitialDistribution::UniformExpanded,
                    "uniform-collapsed" => InitialDistribution::UniformCollapsed,
                    _ => return Err(Error::Config(format!("unknown initial distribution '{v}'"))),
                }
            }
            "shrink_intercepts" => self.shrink_intercepts = parse_bool(key, v)?,
            "scale_covariates" => self.scale_covariates = parse_bool(key, v)?,
            _ => {
                if let Some(code) = key.strip_prefix("covariates_") {
                    let tr = Transition::from_code(code)
                        .ok_or_else(|| Error::Config(format!("unknown transition in key '{key}'")))?;
                    self.transition_covariates[tr.index()] = parse_list(v);
                } else if let Some(name) = key.strip_prefix("prior.") {
                    self.priors.retain(|(n, _)| n != name);
                    self.priors.push((name.to_string(), Prior::parse(v)?));
                } else {
                    return Err(Error::Config(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(())
    }

    /// Checks settings that do not depend on data.
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.variant == Variant::NoAbsenceClone {
            let clones = self.n_endemic.is_some_and(|n| n != 1) || self.n_outbreak.is_some_and(|n| n != 1);
            if clones || self.absence == Some(true) {
                return Err(Error::Config(
                    "variant no-absence-clone has two states: no absence state and no clones".into(),
                ));
            }
        }
        if !(self.constraints.eps_rate >= 0.0 && self.constraints.eps_rho >= 0.0) {
            return Err(Error::Config("constraint gaps must be non-negative".into()));
        }
        self.states()?;
        Ok(())
    }

    /// State space implied by the variant and the size settings.
    pub fn states(&self) -> Result<StateSpace> {
        if self.variant == Variant::NoAbsenceClone {
            return Ok(StateSpace::two_state());
        }
        let d = StateSpace::default();
        StateSpace::new(
            self.absence.unwrap_or(d.has_absence()),
            self.n_endemic.unwrap_or(d.n_endemic()),
            self.n_outbreak.unwrap_or(d.n_outbreak()),
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        self.sampler.clone()
    }

    /// Model specification on a loaded panel.
    pub fn build_spec(&self, data: &PanelData<f64>) -> Result<ModelSpec> {
        let cov = data.covariates();
        let lookup = |names: &[String]| -> Result<Vec<usize>> {
            names
                .iter()
                .map(|n| {
                    cov.index_of(n)
                        .ok_or_else(|| Error::Config(format!("covariate '{n}' is not in the panel")))
                })
                .collect()
        };
        let mut spec = ModelSpec::coupled();
        spec.states = self.states()?;
        spec.emission_covariates = lookup(&self.emission_covariates)?;
        for tr in Transition::ALL {
            let terms = &mut spec.transitions[tr.index()];
            terms.covariates = lookup(&self.transition_covariates[tr.index()])?;
            terms.spatial = self.spatial[tr.index()];
        }
        spec.random_intercepts = self.random_intercepts;
        spec.shared_overdispersion = self.shared_overdispersion;
        spec.initial = self.initial.clone();
        let spec = spec.with_variant(self.variant);
        spec.validate(data)?;
        Ok(spec)
    }

    /// Default priors with the configured overrides applied.
    pub fn build_priors(&self, spec: &ModelSpec, data: &PanelData<f64>) -> Result<PriorSpec> {
        let mut priors = default_priors(
            spec,
            data,
            PriorOptions {
                shrink_intercepts: self.shrink_intercepts,
                constraints: self.constraints,
            },
        )?;
        for (name, p) in &self.priors {
            if name == "spatial" {
                priors.set_spatial(*p)?;
            } else {
                priors.set(name, *p)?;
            }
        }
        Ok(priors)
    }

    pub fn is_weak(&self) -> bool {
        self.constraints.kind == ConstraintKind::Weak
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.sampler.n_iterations, 200_000);
        assert_eq!(c.sampler.burn_in, 50_000);
        assert_eq!(c.sampler.n_chains, 3);
        assert_eq!((c.constraints.eps_rate, c.constraints.eps_rho), (0.01, 0.05));
        let s = c.states().unwrap();
        assert_eq!((s.n_endemic(), s.n_outbreak(), s.len()), (2, 4, 7));
    }

    #[test]
    fn parses_settings() {
        let c = RunConfig::parse(
            "# run\nseed = 7\niterations = 1000\nburn_in = 200\nvariant = non-coupled\n\
             covariates_23 = beds, mobility\nprior.spatial = normal(0, 0.5)\nconstraints = weak\n",
        )
        .unwrap();
        assert_eq!(c.sampler.seed, 7);
        assert_eq!(c.variant, Variant::NonCoupled);
        assert_eq!(c.transition_covariates[2], vec!["beds", "mobility"]);
        assert!(c.is_weak());
        assert_eq!(c.priors.len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("seed").is_err());
        assert!(RunConfig::parse("iterations = 10\nburn_in = 20").is_err());
        assert!(RunConfig::parse("variant = no-absence-clone\nn_outbreak = 4").is_err());
        assert!(RunConfig::parse("variant = no-absence-clone\nabsence = true").is_err());
        let c = RunConfig::parse("variant = no-absence-clone").unwrap();
        assert_eq!(c.states().unwrap().len(), 2);
    }
}
