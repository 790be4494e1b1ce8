//! Commonsense validation and explanation selection as multiple-choice
//! scoring.
//!
//! The pipeline has four stages:
//!
//! 1. [`dataset`] parses benchmark splits and wraps each choice in a task
//!    template.
//! 2. [`scorer`] scores every choice with one weight-shared network and trains
//!    it with a softmax cross-entropy over the choices.
//! 3. [`ensemble`] combines the score vectors of three models with weights
//!    fitted by [`de`], a differential evolution minimizer.
//! 4. [`analysis`] computes accuracies and the overlap of what each model gets
//!    right.
//!
//! Large pretrained encoders stay outside the library: their scores come in
//! through precomputed logits files or an external worker process speaking a
//! line-delimited JSON protocol (see [`ensemble::ScorerBackend`]).

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod de;
pub mod ensemble;
pub mod error;
pub mod scorer;

pub use error::{Error, Result};
