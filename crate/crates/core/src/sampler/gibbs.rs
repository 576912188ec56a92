//! Hybrid Gibbs sampler: scalar adaptive Metropolis for the parameters, then
//! a block update of every area's latent sequence.
//!
//! Likelihood changes for a parameter proposal are computed incrementally.
//! Count parameters only touch cells currently in their regime; transition
//! coefficients only touch cells leaving the row that uses them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{SamplerConfig, StateSampler};
use super::filter::{backward_sample, is_free_row, run_filter, FilterWork};
use super::init::init_latent_chains;
use super::rwm::{adaptive_rwm_step, AdaptState};
use super::single_site::single_site_sweep;
use crate::inference::draws::{ChainDraws, PosteriorDraws, StateDraw};
use crate::inference::waic::{cell_index, WaicAccumulator};
use crate::model::emission::{nb_log_kernel, nb_log_normalizer};
use crate::model::{
    constraints_satisfied, transition_probs, Block, LatentStates, ModelSpec, PanelData, ParamId,
    ParamVector, Transition,
};
use crate::model::transition::neighbor_outbreak_sum;
use crate::num::{lit, to_f64, Scalar};
use crate::priors::{log_prior, log_prior_unconstrained, sample_start, PriorSpec};
use crate::{Error, Result};

/// Everything a run produces besides the draws themselves.
#[derive(Debug, Clone)]
pub struct GibbsOutput<F> {
    pub draws: PosteriorDraws<F>,
    /// Merged over chains when online WAIC was requested.
    pub waic: Option<WaicAccumulator>,
    /// Per chain, per coordinate acceptance rate over the whole run.
    pub acceptance: Vec<Vec<f64>>,
    /// Latent states at the last iteration of each chain.
    pub final_states: Vec<LatentStates>,
}

/// Output of a single chain.
#[derive(Debug, Clone)]
pub struct ChainOutput<F> {
    pub draws: ChainDraws<F>,
    pub waic: Option<WaicAccumulator>,
    pub acceptance: Vec<f64>,
    pub final_states: LatentStates,
}

/// Runs every chain and collects their draws.
pub fn gibbs_run<F: Scalar>(
    data: &PanelData<F>,
    model: &ModelSpec,
    priors: &PriorSpec,
    cfg: &SamplerConfig,
) -> Result<GibbsOutput<F>> {
    cfg.validate()?;
    model.validate(data)?;
    let chains: Vec<ChainOutput<F>> = if cfg.parallel {
        (0..cfg.n_chains)
            .into_par_iter()
            .map(|c| run_chain(data, model, priors, cfg, c))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.n_chains)
            .map(|c| run_chain(data, model, priors, cfg, c))
            .collect::<Result<_>>()?
    };
    let mut waic: Option<WaicAccumulator> = None;
    let mut acceptance = Vec::with_capacity(chains.len());
    let mut final_states = Vec::with_capacity(chains.len());
    let mut chain_draws = Vec::with_capacity(chains.len());
    for ch in chains {
        if let Some(w) = ch.waic {
            waic = Some(match waic {
                None => w,
                Some(acc) => acc.merge(&w)?,
            });
        }
        acceptance.push(ch.acceptance);
        final_states.push(ch.final_states);
        chain_draws.push(ch.draws);
    }
    Ok(GibbsOutput {
        draws: PosteriorDraws {
            names: priors.layout().names().to_vec(),
            n_iterations: cfg.n_iterations,
            burn_in: cfg.burn_in,
            seed: cfg.seed,
            state_thin: cfg.state_thin,
            n_areas: data.n_areas(),
            n_times: data.n_times(),
            n_states: model.states.len(),
            chains: chain_draws,
        },
        waic,
        acceptance,
        final_states,
    })
}

/// Random stream of chain `c` for a given base seed.
pub fn chain_rng(seed: u64, c: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(c as u64 + 1);
    rng
}

/// Which cached transition row group a transition belongs to.
fn row_group(tr: Transition) -> usize {
    match tr {
        Transition::Emergence => 0,
        Transition::Extinction | Transition::OutbreakEmergence => 1,
        Transition::Persistence => 2,
    }
}

struct Chain<'a, F: Scalar> {
    data: &'a PanelData<F>,
    model: &'a ModelSpec,
    priors: &'a PriorSpec,
    cfg: &'a SamplerConfig,
    n: usize,
    nt: usize,
    params: ParamVector<F>,
    states: LatentStates,
    /// `ln(1 + y_i(t-1))` per cell.
    log_prev: Vec<F>,
    /// NB normalizing terms per block per cell at the current overdispersion.
    lnorm: [Vec<F>; 2],
    /// Endemic / outbreak log densities per cell.
    em: Vec<(F, F)>,
    em_dirty: bool,
    /// Neighbour outbreak sum per cell.
    nsum: Vec<F>,
    /// Per-area emission log-likelihood of cells in each block.
    block_ll: [Vec<F>; 2],
    /// Per-area log-likelihood of transitions out of each free row.
    row_ll: [Vec<F>; 3],
    log_prior: F,
    adapt: Vec<AdaptState>,
    work: FilterWork<F>,
    path: Vec<u8>,
    scratch: Vec<F>,
}

impl<'a, F: Scalar> Chain<'a, F> {
    fn new(
        data: &'a PanelData<F>,
        model: &'a ModelSpec,
        priors: &'a PriorSpec,
        cfg: &'a SamplerConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let n = data.n_areas();
        let nt = data.n_times();
        let params = match &cfg.fixed_params {
            Some(flat) => {
                if flat.len() != priors.layout().len() {
                    return Err(Error::Config(format!(
                        "fixed parameter vector has {} entries, layout needs {}",
                        flat.len(),
                        priors.layout().len()
                    )));
                }
                let mut p = ParamVector::zeros(model, n);
                let vals: Vec<F> = flat.iter().map(|&v| lit(v)).collect();
                p.assign_flat(priors.layout(), &vals);
                p
            }
            None => sample_start(priors, model, data, rng, cfg.max_init_tries)?,
        };
        let states = init_latent_chains(n, nt, &model.states, rng);
        let mut log_prev = vec![F::zero(); n * nt];
        for i in 0..n {
            for t in 1..nt {
                log_prev[i * nt + t] = F::from_u32(data.count(i, t - 1)).unwrap().ln_1p();
            }
        }
        let adapt = priors
            .layout()
            .ids()
            .iter()
            .map(|id| {
                let sd = match id {
                    ParamId::Overdispersion(_) => 1.0,
                    _ => 0.1,
                };
                AdaptState::new(sd)
            })
            .collect();
        let lp = log_prior(&params, priors, data, model);
        let mut chain = Self {
            data,
            model,
            priors,
            cfg,
            n,
            nt,
            params,
            states,
            log_prev,
            lnorm: [vec![F::zero(); n * nt], vec![F::zero(); n * nt]],
            em: vec![(F::zero(), F::zero()); n * nt],
            em_dirty: true,
            nsum: vec![F::zero(); n * nt],
            block_ll: [vec![F::zero(); n], vec![F::zero(); n]],
            row_ll: [vec![F::zero(); n], vec![F::zero(); n], vec![F::zero(); n]],
            log_prior: lp,
            adapt,
            work: FilterWork::new(),
            path: vec![0; nt],
            scratch: vec![F::zero(); n],
        };
        if cfg.fixed_params.is_none() && !lp.is_finite() {
            return Err(Error::Init("starting point has zero prior density".into()));
        }
        for b in Block::BOTH {
            chain.refresh_normalizer(b);
        }
        chain.refresh_emissions();
        chain.refresh_nsum();
        chain.refresh_likelihood_caches();
        Ok(chain)
    }

    fn refresh_normalizer(&mut self, b: Block) {
        let r = self.params.count.block(b).r;
        for i in 0..self.n {
            for t in 1..self.nt {
                self.lnorm[b.index()][i * self.nt + t] = nb_log_normalizer(self.data.count(i, t), r);
            }
        }
    }

    /// Emission log density of cell `(i, t)` under block parameters `ep`.
    #[inline]
    fn cell_emission(&self, b: Block, ep: &crate::model::EmissionParams<F>, i: usize, t: usize, norm: F) -> F {
        let c = i * self.nt + t;
        let mean = (ep.log_rate(i, t, self.data, self.model) + ep.rho * self.log_prev[c]).exp();
        let _ = b;
        norm + nb_log_kernel(self.data.count(i, t), mean, ep.r)
    }

    fn refresh_emissions(&mut self) {
        for i in 0..self.n {
            for t in 1..self.nt {
                let c = i * self.nt + t;
                let en = self.cell_emission(Block::Endemic, &self.params.count.endemic, i, t, self.lnorm[0][c]);
                let ob = self.cell_emission(Block::Outbreak, &self.params.count.outbreak, i, t, self.lnorm[1][c]);
                self.em[c] = (en, ob);
            }
        }
        self.em_dirty = false;
    }

    fn refresh_nsum(&mut self) {
        for i in 0..self.n {
            for t in 0..self.nt {
                self.nsum[i * self.nt + t] =
                    neighbor_outbreak_sum(i, t, &self.states, self.data, &self.model.states);
            }
        }
    }

    /// Log probability of the realized move into `(i, t)` out of a free row.
    #[inline]
    fn move_logprob(&self, params: &ParamVector<F>, i: usize, t: usize) -> F {
        let ss = &self.model.states;
        let from = self.states.get(i, t - 1);
        let to = self.states.get(i, t);
        let tp = transition_probs(i, t, &params.chain, self.model, self.data, self.nsum[i * self.nt + t - 1]);
        ss.prob(from, to, &tp).ln()
    }

    fn free_row_index(&self, s: usize) -> Option<usize> {
        let ss = &self.model.states;
        if ss.has_absence() && s == 0 {
            Some(0)
        } else if s == ss.last_endemic() {
            Some(1)
        } else if s == ss.last_outbreak() {
            Some(2)
        } else {
            None
        }
    }

    fn refresh_likelihood_caches(&mut self) {
        let ss = self.model.states;
        for i in 0..self.n {
            let mut bl = [F::zero(); 2];
            let mut rl = [F::zero(); 3];
            for t in 1..self.nt {
                let c = i * self.nt + t;
                let s = self.states.get(i, t);
                match ss.block(s) {
                    Some(Block::Endemic) => bl[0] = bl[0] + self.em[c].0,
                    Some(Block::Outbreak) => bl[1] = bl[1] + self.em[c].1,
                    None => {}
                }
                if let Some(g) = self.free_row_index(self.states.get(i, t - 1)) {
                    rl[g] = rl[g] + self.move_logprob(&self.params, i, t);
                }
            }
            self.block_ll[0][i] = bl[0];
            self.block_ll[1][i] = bl[1];
            for g in 0..3 {
                self.row_ll[g][i] = rl[g];
            }
        }
    }

    /// New per-area block log-likelihood for a proposed count parameter.
    fn proposed_block_ll(&mut self, prop: &ParamVector<F>, b: Block, areas: std::ops::Range<usize>, r_changed: bool) {
        let ss = self.model.states;
        let ep = prop.count.block(b);
        for i in areas {
            let mut acc = F::zero();
            for t in 1..self.nt {
                if ss.block(self.states.get(i, t)) != Some(b) {
                    continue;
                }
                let c = i * self.nt + t;
                let norm = if r_changed {
                    nb_log_normalizer(self.data.count(i, t), ep.r)
                } else {
                    self.lnorm[b.index()][c]
                };
                acc = acc + self.cell_emission(b, ep, i, t, norm);
            }
            self.scratch[i] = acc;
        }
    }

    fn proposed_row_ll(&mut self, prop: &ParamVector<F>, g: usize) {
        for i in 0..self.n {
            let mut acc = F::zero();
            for t in 1..self.nt {
                if self.free_row_index(self.states.get(i, t - 1)) == Some(g) {
                    acc = acc + self.move_logprob(prop, i, t);
                }
            }
            self.scratch[i] = acc;
        }
    }

    fn parameter_sweep(&mut self, rng: &mut ChaCha8Rng) {
        let ids: Vec<ParamId> = self.priors.layout().ids().to_vec();
        let acfg = self.cfg.adapt;
        for (k, &id) in ids.iter().enumerate() {
            let current = self.params.get(id);
            let mut prop = self.params.clone();
            let mut adapt = std::mem::replace(&mut self.adapt[k], AdaptState::new(1.0));
            let mut new_lp = F::neg_infinity();
            let mut new_ll_parts: Vec<(usize, Vec<F>)> = Vec::new();
            let (value, accepted) = adaptive_rwm_step(
                current,
                |x| {
                    prop.set(id, x);
                    new_lp = log_prior_unconstrained(&prop, self.priors);
                    if !new_lp.is_finite() {
                        return F::neg_infinity();
                    }
                    if id.in_constraint()
                        && !constraints_satisfied(&prop.count, self.data, self.model, &self.priors.constraints)
                    {
                        return F::neg_infinity();
                    }
                    new_ll_parts.clear();
                    let mut delta = F::zero();
                    match id {
                        ParamId::Alpha { tr, .. } => {
                            let g = row_group(tr);
                            self.proposed_row_ll(&prop, g);
                            for i in 0..self.n {
                                delta = delta + (self.scratch[i] - self.row_ll[g][i]);
                            }
                            new_ll_parts.push((2 + g, self.scratch.clone()));
                        }
                        ParamId::InterceptMean(_) | ParamId::InterceptSd(_) => {}
                        _ => {
                            let areas = match id {
                                ParamId::Intercept { area: Some(a), .. } => a..a + 1,
                                _ => 0..self.n,
                            };
                            let r_changed = matches!(id, ParamId::Overdispersion(_));
                            for &b in id.emission_blocks() {
                                self.proposed_block_ll(&prop, b, areas.clone(), r_changed);
                                let mut vals = self.block_ll[b.index()].clone();
                                for i in areas.clone() {
                                    delta = delta + (self.scratch[i] - self.block_ll[b.index()][i]);
                                    vals[i] = self.scratch[i];
                                }
                                new_ll_parts.push((b.index(), vals));
                            }
                        }
                    }
                    delta + (new_lp - self.log_prior)
                },
                &mut adapt,
                &acfg,
                rng,
            );
            self.adapt[k] = adapt;
            if accepted {
                self.params.set(id, value);
                self.log_prior = new_lp;
                for (slot, vals) in new_ll_parts {
                    if slot < 2 {
                        self.block_ll[slot] = vals;
                        self.em_dirty = true;
                    } else {
                        self.row_ll[slot - 2] = vals;
                    }
                }
                if let ParamId::Overdispersion(which) = id {
                    match which {
                        Some(b) => self.refresh_normalizer(b),
                        None => {
                            self.refresh_normalizer(Block::Endemic);
                            self.refresh_normalizer(Block::Outbreak);
                        }
                    }
                }
            }
        }
    }

    fn filter_area(&mut self, i: usize) -> Result<()> {
        let nt = self.nt;
        let nsum = &self.nsum;
        let em = &self.em;
        run_filter(
            i,
            self.data,
            self.model,
            &self.states,
            &self.params,
            |t| nsum[i * nt + t],
            |t| em[i * nt + t],
            &mut self.work,
        )
    }

    fn block_sweep(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let ss = self.model.states;
        for i in 0..self.n {
            self.filter_area(i)?;
            let mut path = std::mem::take(&mut self.path);
            backward_sample(&ss, &mut self.work, &mut path, rng);
            let old: Vec<u8> = self.states.area(i).to_vec();
            self.states.area_mut(i).copy_from_slice(&path);
            self.path = path;
            for t in 0..self.nt {
                if ss.is_outbreak(old[t] as usize) != ss.is_outbreak(self.states.get(i, t)) {
                    for inf in self.data.influenced_by(i) {
                        let j = inf.area;
                        self.nsum[j * self.nt + t] =
                            neighbor_outbreak_sum(j, t, &self.states, self.data, &ss);
                    }
                }
            }
        }
        Ok(())
    }

    fn accumulate_waic(&mut self, acc: &mut WaicAccumulator) -> Result<()> {
        for i in 0..self.n {
            self.filter_area(i)?;
            for t in 1..self.nt {
                acc.push(cell_index(i, t, self.nt), to_f64(self.work.log_pred[t]));
            }
        }
        Ok(())
    }

    fn run(mut self, rng: &mut ChaCha8Rng) -> Result<ChainOutput<F>> {
        let cfg = self.cfg;
        let fixed = cfg.fixed_params.is_some();
        let mut draws = ChainDraws {
            params: Vec::with_capacity(cfg.n_kept()),
            states: Vec::new(),
        };
        let mut waic = cfg.online_waic.then(|| WaicAccumulator::new(self.n * (self.nt - 1)));
        if cfg.burn_in == 0 {
            self.adapt.iter_mut().for_each(AdaptState::freeze);
        }
        for it in 1..=cfg.n_iterations {
            if !fixed {
                self.parameter_sweep(rng);
            }
            if it == cfg.burn_in {
                self.adapt.iter_mut().for_each(AdaptState::freeze);
            }
            if self.em_dirty {
                self.refresh_emissions();
            }
            match cfg.state_sampler {
                StateSampler::Block => self.block_sweep(rng)?,
                StateSampler::SingleSite => {
                    single_site_sweep(self.data, self.model, &self.params, &mut self.states, rng);
                    self.refresh_nsum();
                }
            }
            self.refresh_likelihood_caches();
            if it > cfg.burn_in {
                debug_assert!(
                    fixed
                        || constraints_satisfied(&self.params.count, self.data, self.model, &self.priors.constraints)
                );
                draws.params.push(self.params.to_flat(self.priors.layout()));
                if (it - cfg.burn_in) % cfg.state_thin == 0 {
                    draws.states.push(StateDraw {
                        iteration: it as u32,
                        states: self.states.clone(),
                    });
                }
                if let Some(acc) = waic.as_mut() {
                    self.accumulate_waic(acc)?;
                }
            }
        }
        Ok(ChainOutput {
            draws,
            waic,
            acceptance: self.adapt.iter().map(AdaptState::acceptance_rate).collect(),
            final_states: self.states,
        })
    }
}

/// Runs chain `c` of a configuration.
pub fn run_chain<F: Scalar>(
    data: &PanelData<F>,
    model: &ModelSpec,
    priors: &PriorSpec,
    cfg: &SamplerConfig,
    c: usize,
) -> Result<ChainOutput<F>> {
    let mut rng = chain_rng(cfg.seed, c);
    let chain = Chain::new(data, model, priors, cfg, &mut rng)?;
    let _ = is_free_row;
    chain.run(&mut rng)
}
