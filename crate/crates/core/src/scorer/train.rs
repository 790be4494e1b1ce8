use std::borrow::Borrow;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, score_sample};
use super::optim::{adamw_step, schedule_lr, AdamWConfig, OptimizerState};
use super::params::{init_params, Dims, ToyScorerParams};
use crate::dataset::{Sample, Template, DEFAULT_MAX_SEQUENCE_LENGTH};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub adam_epsilon: f64,
    pub adam_betas: [f64; 2],
    pub dims: Dims,
    pub max_sequence_length: usize,
    pub template: Template,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-4,
            weight_decay: 1e-2,
            dropout: 0.1,
            batch_size: 32,
            warmup_fraction: 0.1,
            seed: 0,
            adam_epsilon: 1e-8,
            adam_betas: [0.9, 0.999],
            dims: Dims::default(),
            max_sequence_length: DEFAULT_MAX_SEQUENCE_LENGTH,
            template: Template::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("train config: {what}")))
            }
        };
        check(self.epochs >= 1, "epochs must be >= 1")?;
        check(self.batch_size >= 1, "batch size must be >= 1")?;
        check(unit(self.learning_rate), "learning rate must be in (0, 1]")?;
        check((0.0..=1.0).contains(&self.weight_decay), "weight decay must be in [0, 1]")?;
        check((0.0..1.0).contains(&self.dropout), "dropout must be in [0, 1)")?;
        check((0.0..=1.0).contains(&self.warmup_fraction), "warmup fraction must be in [0, 1]")?;
        check(self.adam_epsilon > 0.0, "adam epsilon must be positive")?;
        check(self.adam_betas.iter().all(|b| (0.0..1.0).contains(b)), "adam betas must be in [0, 1)")?;
        check(self.max_sequence_length >= 1, "max sequence length must be >= 1")?;
        self.dims.validate()
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.adam_betas[0],
            beta2: self.adam_betas[1],
            epsilon: self.adam_epsilon,
            weight_decay: self.weight_decay,
        }
    }
}

/// One row of the training trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch (dropout active).
    pub train_loss: f64,
    pub dev_accuracy: Option<f64>,
    /// Scheduled learning rate after the epoch's last step.
    pub learning_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev accuracy (earliest on
    /// ties; the last epoch when there is no dev split).
    pub params: ToyScorerParams,
    pub best_epoch: usize,
    pub trace: Vec<EpochRecord>,
}

/// Fraction of samples whose top-scoring choice is the labeled one, ties
/// going to the lowest index.
pub fn accuracy_on<S: Borrow<Sample>>(params: &ToyScorerParams, samples: &[S]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("accuracy over no samples".into()));
    }
    let mut correct = 0usize;
    for s in samples {
        let s = s.borrow();
        if score_sample(params, s)?.argmax() == s.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Mini-batch AdamW training with the linear warmup schedule.
///
/// Parameter initialisation uses the config seed directly; shuffling and
/// dropout draw from a second stream of the same seed.
pub fn train_scorer(train: &[Sample], dev: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    let mut params = init_params(config.dims, config.seed)?;
    params.max_sequence_length = config.max_sequence_length;
    params.template = config.template.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let adamw = config.adamw();
    let mut state = OptimizerState::new(params.weights.len());

    let steps_per_epoch = train.len().div_ceil(config.batch_size);
    let total_steps = (steps_per_epoch * config.epochs) as u64;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ToyScorerParams)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = backward(&params, &batch, Some(config.dropout), &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            let lr = schedule_lr(step, total_steps, config.learning_rate, config.warmup_fraction);
            adamw_step(&mut state, params.weights.as_mut_slice(), grads.as_slice(), lr, &adamw)?;
            step += 1;
        }
        let dev_accuracy = if dev.is_empty() { None } else { Some(accuracy_on(&params, dev)?) };
        trace.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            dev_accuracy,
            learning_rate: schedule_lr(step, total_steps, config.learning_rate, config.warmup_fraction),
        });
        let score = dev_accuracy.unwrap_or(f64::NEG_INFINITY);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => score > *b || dev_accuracy.is_none(),
        };
        if improved {
            best = Some((score, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome { params, best_epoch, trace })
}

/// Writes the trace as CSV: `epoch,train_loss,dev_accuracy,learning_rate`.
pub fn write_trace(path: impl AsRef<Path>, trace: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for record in trace {
        writer.serialize(record).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
