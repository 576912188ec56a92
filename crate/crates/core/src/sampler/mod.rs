//! Posterior sampling.

pub mod config;
pub mod filter;
pub mod gibbs;
pub mod init;
pub mod rwm;
pub mod single_site;

pub use config::{SamplerConfig, StateSampler};
pub use filter::{
    backward_kernel, forward_filter_area, iffbs_sample_area, iffbs_sequence_logprob, propagate,
    FilterWork, FilteredProbs,
};
pub use gibbs::{chain_rng, gibbs_run, run_chain, ChainOutput, GibbsOutput};
pub use init::init_latent_chains;
pub use rwm::{adaptive_rwm_step, AdaptConfig, AdaptState};
pub use single_site::single_site_sweep;
