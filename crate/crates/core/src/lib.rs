//! Bayesian ranking of Test match batsmen.
//!
//! Runs scored in each innings are modelled as zero-inflated negative
//! binomial counts with right censoring for not-outs. The log scoring rate
//! combines player ability, a smooth random-walk year effect, a quadratic
//! ageing curve and game context (venue, match innings, opposition and
//! opposition-by-decade). Inference is Metropolis-within-Gibbs with a
//! Gaussian independence proposal for the whole year-effect block.
//!
//! Modules, bottom up:
//!
//! - [`ingest`]: scorecard CSV parsing and index maps.
//! - [`special`]: log-gamma and incomplete-beta kernels.
//! - [`model`]: rate, densities and the per-innings likelihood.
//! - [`gmrf`]: tridiagonal precision algebra for the year prior.
//! - [`sampler`]: the MCMC scheme, checkpointing and resume.
//! - [`analysis`]: rankings, effect tables, ageing curves, predictive checks.
//! - [`simulate`]: forward simulation of synthetic careers.

pub mod analysis;
pub mod error;
pub mod gmrf;
pub mod ingest;
pub mod model;
pub mod sampler;
pub mod simulate;
pub mod special;

pub use error::{AnalysisError, GmrfError, IngestError, ModelError, SamplerError, SimulateError};
pub use ingest::{Dataset, DatasetOptions, Dims, Innings, InningsRecord, Outcome, Venue};
pub use model::{ParamState, PriorConfig};
pub use sampler::{run_chain, Block, ChainConfig, ChainOutput, Sampler};
