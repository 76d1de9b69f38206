//! Predict whether a new LLM will succeed on a task instance, from the
//! instance's intrinsic features and the LLM's results on a small set of
//! reference instances.
//!
//! A *generic assessor* is trained on the pooled results of previously
//! evaluated LLMs; each (LLM, instance) pair is described by the instance's
//! features concatenated with the LLM's success vector on the reference set.

pub mod assessors;
pub mod classifiers;
pub mod cli;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod irt;
pub mod model;
pub mod numerics;
pub mod selectors;
pub mod util;

pub use error::{Error, Result};
