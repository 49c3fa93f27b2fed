//! Bayesian mixed-effect Markov models and Markov renewal models for
//! collections of categorical state sequences.
//!
//! Each sequence belongs to an individual and carries a small set of
//! categorical covariates. State transitions are modelled as a convex
//! combination of a covariate-driven fixed effect and an individual-level
//! random effect, with covariate levels clustered so that levels with the
//! same influence share one fixed-effect component. Optional continuous
//! duration times are either ignored, discretized into a synthetic state, or
//! modelled with a mixture of gamma kernels whose mixture probabilities follow
//! the same mixed-effect construction.
//!
//! The crate is organised around the workflow:
//!
//! * [`datamodel`]: dataset ingestion, validation and duration preprocessing
//! * [`trans_sampler`] / [`dur_sampler`]: MCMC updates for the two sub-models
//! * [`engine`]: full runs, burn-in/thinning, multi-chain execution, storage
//! * [`summaries`]: global and local tests, posterior transition tables,
//!   duration mixture tables
//! * [`model_selection`]: LPML and WAIC
//! * [`diagnostics`]: traces and autocorrelation
//! * [`simulate`]: ground-truth generator and demo corpora
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod datamodel;
pub mod diagnostics;
pub mod dist;
pub mod dur_sampler;
pub mod engine;
pub mod error;
pub mod hierarchy;
pub mod model_selection;
pub mod persist;
pub mod render;
pub mod simulate;
pub mod special;
pub mod summaries;
pub mod trans_sampler;

pub use datamodel::{
    discretize_durations, parse_dataset, transition_counts, DurationMode, HyperParams,
    ModelConfig, SequenceDataset, TransitionRecord,
};
pub use engine::{fit, run_chains, PosteriorSamples};
pub use error::{Error, Result};
pub use summaries::{summarize, FitSummary, SummaryOptions};
