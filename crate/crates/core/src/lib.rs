//! Tooling for predicting reaction-GIF categories of two-turn tweet
//! threads: text normalization, byte-level BPE coverage, hashed-feature
//! multi-label classifiers, power weighted ensembling and Mean Recall at 6.

pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod model;
pub mod normalize;
pub mod scores;
pub mod subword;
pub mod synth;

pub use error::{Error, Result};
