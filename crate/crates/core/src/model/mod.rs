//! The generative model: state space, data, parameters, densities.

pub mod data;
pub mod emission;
pub mod likelihood;
pub mod params;
pub mod spec;
pub mod state;
pub mod transition;

pub use data::{CovariateTransform, Covariates, Neighbor, PanelData};
pub use emission::{emission_logdensity, nb_logpmf};
pub use likelihood::{constraints_satisfied, joint_loglik, ConstraintKind, Constraints};
pub use params::{
    ChainParams, CountParams, EmissionParams, ParamId, ParamLayout, ParamVector, Term,
    TransitionCoefs,
};
pub use spec::{InitialDistribution, ModelSpec, Transition, TransitionTerms, Variant};
pub use state::{Block, Regime, StateSpace, TransitionProbs};
pub use transition::{
    governing_transitions, neighbor_outbreak_sum, transition_prob, transition_probs, transition_row,
    LatentStates,
};
