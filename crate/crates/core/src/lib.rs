//! Transition-state identification for Markov jump processes: transition path theory,
//! directed current graphs, random-walk node embeddings and similarity propagation.

pub mod config;
pub mod embed;
pub mod error;
pub mod graph;
pub mod identify;
pub mod markov;
pub mod models;
pub mod pipeline;
pub mod tpt;

pub use error::{Error, Result};
