//! A weight-shared multiple-choice scorer.
//!
//! Every choice of a sample goes through the same network and yields one
//! scalar; the scores of a sample form a [`ScoreVector`] and the predicted
//! label is its argmax. Training minimises the mean softmax cross-entropy of
//! the score vectors ([`loss_single`], [`loss_batch`]) with AdamW and a linear
//! warmup schedule.
//!
//! The encoder here is deliberately small: hashed token embeddings averaged
//! into a feature vector, followed by a one-hidden-layer ReLU head. Scores from
//! large pretrained encoders enter through [`crate::ensemble::ScorerBackend`]
//! instead.

mod loss;
mod network;
mod optim;
mod params;
pub mod synthetic;
mod train;

pub use loss::{loss_batch, loss_single, score_gradient, softmax};
pub use network::{
    backward, batch_loss, bucket_of, encode, forward_sample, score_input, score_sample, FeatureVector, Mode,
};
pub use optim::{adamw_step, schedule_lr, warmup_steps, AdamWConfig, OptimizerState};
pub use params::{init_params, Dims, ToyScorerParams, Weights, WeightsMut};
pub use train::{accuracy_on, train_scorer, write_trace, EpochRecord, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-choice scores of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn new(sample_id: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let v = Self { sample_id: sample_id.into(), scores };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::InvalidInput(format!("{}: empty score vector", self.sample_id)));
        }
        if let Some(bad) = self.scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("{}: non-finite score {bad}", self.sample_id)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the highest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.scores)
    }
}

impl AsRef<[f64]> for ScoreVector {
    fn as_ref(&self) -> &[f64] {
        &self.scores
    }
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
