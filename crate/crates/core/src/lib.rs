//! Luxury-aware house valuation: crowdsourced luxury elicitation over
//! photo feature vectors, per-room luxury aggregation and kernel regression
//! on listing metadata.

pub mod annotation;
pub mod classifiers;
pub mod crowd;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod rng;
pub mod synth;
pub mod valuation;

pub use error::{Error, Result};
