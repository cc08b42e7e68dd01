//! Discrete non-Markov diffusion: forward processes, transition-time laws,
//! accelerated reverse samplers and their Markov baselines, driven by exact
//! posterior denoisers over small enumerable data distributions.

pub mod analytics;
pub mod batch;
pub mod cli;
pub mod datamodel;
pub mod domain;
pub mod error;
pub mod forward;
pub mod sampler;
pub mod schedule;
pub mod verify;

pub use error::{Error, Result};
