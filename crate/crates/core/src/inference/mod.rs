//! Posterior summaries: stored draws, state probabilities, marginal
//! likelihoods, forecasts, scores and information criteria.

pub mod draws;
pub mod predictive;
pub mod score;
pub mod states;
pub mod waic;

pub use draws::{ChainDraws, PosteriorDraws, StateDraw};
pub use predictive::{
    area_forward, conditional_loglik, hmm_forward, marginal_loglik_forward,
    partial_marginal_loglik, pointwise_loglik, posterior_predictive, sample_count, sample_nb,
    Forecast, ForecastSummary, ForwardPass, WaicKind,
};
pub use score::{mean_score, multivariate_log_score, realtime_scores};
pub use states::{realtime_state_probabilities, state_probabilities, StateProbSeries};
pub use waic::{cell_index, waic, WaicAccumulator, WaicReport};
