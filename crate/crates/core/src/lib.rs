pub mod baselines;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod hybrid;
pub mod ingest;
pub mod mati;
pub mod pipeline;
pub mod sampling;
pub mod slabs;
pub mod synth;
pub mod temporal;
pub mod univariate;

pub use error::{Error, Result};
