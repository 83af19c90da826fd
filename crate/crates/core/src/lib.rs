//! Qualitative spatio-temporal graphs for activity recognition.

pub mod body;
pub mod cad120;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod hmm;
pub mod model;
pub mod pipeline;
pub mod qualrel;
pub mod synth;
pub mod temporal;
pub mod vocab;

pub use error::{Error, Result};
