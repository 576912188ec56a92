//! Coupled Markov-switching negative binomial models for areal count data.
//!
//! The crate covers the full workflow: model densities, priors, a hybrid
//! Gibbs sampler (adaptive random-walk Metropolis for parameters, individual
//! forward-filtering backward-sampling for each area's latent chain),
//! posterior summaries, convergence diagnostics, simulation benchmarks and
//! file IO. Numeric code is generic over [`num::Scalar`]; the aliases below
//! fix the precision for typical use.

pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod num;
pub mod priors;
pub mod sampler;
pub mod sim;

pub use error::{Error, Result};
pub use num::Scalar;

/// Panel in double precision.
pub type Panel = model::PanelData<f64>;
/// Panel in single precision.
pub type Panel32 = model::PanelData<f32>;
/// Parameter vector in double precision.
pub type Params = model::ParamVector<f64>;
/// Parameter vector in single precision.
pub type Params32 = model::ParamVector<f32>;
