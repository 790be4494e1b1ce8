//! Weighted combination of per-model score vectors.
//!
//! Given the score vectors `x₁, x₂, x₃` that three models assign to the
//! choices of a sample, the ensemble scores are `w₁x₁ + w₂x₂ + w₃x₃` and the
//! prediction is their argmax. The weights live in `[0, 1]³` and are fitted on
//! a development split by [`fit_weights`], which minimises the dev error rate
//! with differential evolution.
//!
//! The initial DE population always contains the unit vectors, so the fitted
//! ensemble is never worse on the fitting split than its best member.

mod backend;
mod worker;

pub use backend::{load_score_matrix, write_logits_file, BackendKind, LoadOptions, ScoreMatrix, ScorerBackend};
pub use worker::{exchange, serve_toy, WorkerClient, WorkerRequest, WorkerResponse};

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::de::{de_minimize, DEConfig, DEResult};
use crate::error::{Error, Result};
use crate::scorer::{softmax, ScoreVector};

/// How single-model scores are turned into the vectors that get summed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTransform {
    /// Raw scores (logits) as produced by the model.
    #[default]
    Raw,
    /// Softmax over the choices of each sample first.
    Softmax,
}

impl ScoreTransform {
    pub fn apply(self, scores: &[f64]) -> Vec<f64> {
        match self {
            ScoreTransform::Raw => scores.to_vec(),
            ScoreTransform::Softmax => softmax(scores),
        }
    }
}

/// Fitted ensemble weights, one per backend, in backend order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub weights: Vec<f64>,
    pub backends: Vec<String>,
    /// Accuracy on the fitting split; absent for hand-set weights.
    #[serde(default)]
    pub dev_accuracy: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub transform: ScoreTransform,
    /// Resolved configuration that produced the weights.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

impl EnsembleWeights {
    /// Weights with no fitting metadata, e.g. hand-set for evaluation.
    pub fn new(weights: Vec<f64>, backends: Vec<String>) -> Result<Self> {
        let w = Self {
            weights,
            backends,
            dev_accuracy: None,
            seed: 0,
            transform: ScoreTransform::Raw,
            config: serde_json::Value::Null,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.backends.len() || self.weights.is_empty() {
            return Err(Error::Shape(format!("{} weights for {} backends", self.weights.len(), self.backends.len())));
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidInput(format!("weight {w} outside [0, 1]")));
        }
        if self.weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput("all ensemble weights are zero".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.backends.iter().find(|b| !seen.insert(b.as_str())) {
            return Err(Error::DuplicateId(dup.clone()));
        }
        Ok(())
    }

    /// Weights rescaled to sum to one, for display.
    pub fn normalized(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let w: Self = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        w.validate()?;
        Ok(w)
    }
}

/// `Σ wᵢ xᵢ`, elementwise.
pub fn combine(weights: &[f64], xs: &[&[f64]]) -> Result<Vec<f64>> {
    if weights.len() != xs.len() {
        return Err(Error::Shape(format!("{} weights for {} score vectors", weights.len(), xs.len())));
    }
    let len = xs.first().map_or(0, |x| x.len());
    if xs.iter().any(|x| x.len() != len) {
        return Err(Error::Shape("score vectors of different lengths".into()));
    }
    let mut out = vec![0.0; len];
    for (w, x) in weights.iter().zip(xs) {
        for (o, v) in out.iter_mut().zip(x.iter()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Combines one score vector per backend. `xs` pairs each vector with the id
/// of the backend that produced it; the order must match `weights.backends`.
pub fn combine_scores(weights: &EnsembleWeights, xs: &[(&str, &ScoreVector)]) -> Result<ScoreVector> {
    let order: Vec<&str> = xs.iter().map(|(b, _)| *b).collect();
    if order != weights.backends.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::InvalidInput(format!(
            "backend order {order:?} does not match weights {:?}",
            weights.backends
        )));
    }
    let sample_id = xs.first().map_or("", |(_, v)| v.sample_id.as_str());
    if xs.iter().any(|(_, v)| v.sample_id != sample_id) {
        return Err(Error::InvalidInput("score vectors belong to different samples".into()));
    }
    let transformed: Vec<Vec<f64>> = xs.iter().map(|(_, v)| weights.transform.apply(&v.scores)).collect();
    let refs: Vec<&[f64]> = transformed.iter().map(Vec::as_slice).collect();
    Ok(ScoreVector { sample_id: sample_id.to_string(), scores: combine(&weights.weights, &refs)? })
}

/// Index of the highest score, ties to the lowest index.
pub fn predict_label(x: &ScoreVector) -> usize {
    x.argmax()
}

/// Strict-majority label, or the label of backend `fallback` when no label
/// has more than half of the votes.
pub fn majority_vote(labels: &[usize], fallback: usize) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts.into_iter().find(|&(_, c)| 2 * c > labels.len()).map_or(labels[fallback], |(l, _)| l)
}

/// Dev-split data in the shape the weight search needs: per sample, the
/// transformed score vector of every backend, plus the gold label.
struct Aligned {
    rows: Vec<(Vec<Vec<f64>>, usize)>,
}

impl Aligned {
    fn new(matrices: &[ScoreMatrix], labels: &BTreeMap<String, usize>, transform: ScoreTransform) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty dev set".into()));
        }
        if matrices.is_empty() {
            return Err(Error::InvalidInput("no score matrices".into()));
        }
        let mut rows = Vec::with_capacity(labels.len());
        for m in matrices {
            let missing: Vec<String> = labels.keys().filter(|id| m.get(id).is_none()).cloned().collect();
            if !missing.is_empty() {
                return Err(Error::MissingIds(missing));
            }
        }
        for (id, &label) in labels {
            let vectors: Vec<Vec<f64>> =
                matrices.iter().map(|m| transform.apply(m.get(id).expect("coverage checked"))).collect();
            if vectors.iter().any(|v| v.len() != vectors[0].len()) {
                return Err(Error::Shape(format!("{id}: backends disagree on choice count")));
            }
            if label >= vectors[0].len() {
                return Err(Error::InvalidInput(format!("{id}: label {label} out of range")));
            }
            rows.push((vectors, label));
        }
        Ok(Self { rows })
    }

    fn errors(&self, weights: &[f64]) -> usize {
        // Same arithmetic as `combine` followed by `argmax`, without allocating.
        self.rows
            .iter()
            .filter(|(vectors, label)| {
                let mut best = (0, f64::NEG_INFINITY);
                for c in 0..vectors[0].len() {
                    let s: f64 = weights.iter().zip(vectors).map(|(w, v)| w * v[c]).sum();
                    if s > best.1 {
                        best = (c, s);
                    }
                }
                best.0 != *label
            })
            .count()
    }
}

/// Accuracy of a single matrix against gold labels over the label ids.
pub fn matrix_accuracy(matrix: &ScoreMatrix, labels: &BTreeMap<String, usize>) -> Result<f64> {
    let aligned = Aligned::new(std::slice::from_ref(matrix), labels, ScoreTransform::Raw)?;
    Ok((labels.len() - aligned.errors(&[1.0])) as f64 / labels.len() as f64)
}

/// Fits weights in `[0, 1]ⁿ` that minimise the dev error rate.
///
/// The DE population is seeded with every unit vector and the uniform vector;
/// any seed points already in `de_config` follow those. The all-zero weight
/// vector is scored as worse than any real outcome so it is never selected.
pub fn fit_weights(
    matrices: &[ScoreMatrix],
    labels: &BTreeMap<String, usize>,
    de_config: &DEConfig,
    transform: ScoreTransform,
) -> Result<EnsembleWeights> {
    fit_weights_traced(matrices, labels, de_config, transform).map(|(w, _)| w)
}

/// [`fit_weights`], also returning the search itself.
pub fn fit_weights_traced(
    matrices: &[ScoreMatrix],
    labels: &BTreeMap<String, usize>,
    de_config: &DEConfig,
    transform: ScoreTransform,
) -> Result<(EnsembleWeights, DEResult)> {
    let aligned = Aligned::new(matrices, labels, transform)?;
    let n = matrices.len();
    let mut config = de_config.clone();
    if config.bounds.len() != n {
        config.bounds = vec![[0.0, 1.0]; n];
    }
    let mut seeds: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    seeds.push(vec![1.0 / n as f64; n]);
    seeds.extend(config.seed_points.iter().cloned());
    config.seed_points = seeds;

    let total = labels.len() as f64;
    let result = de_minimize(
        |w| {
            if w.iter().all(|&v| v == 0.0) {
                2.0
            } else {
                aligned.errors(w) as f64 / total
            }
        },
        &config,
    )?;
    if result.best_x.iter().all(|&v| v == 0.0) {
        return Err(Error::Numeric("weight search returned the all-zero vector".into()));
    }
    let correct = labels.len() - aligned.errors(&result.best_x);
    let weights = EnsembleWeights {
        weights: result.best_x.clone(),
        backends: matrices.iter().map(|m| m.backend_id.clone()).collect(),
        dev_accuracy: Some(correct as f64 / total),
        seed: config.seed,
        transform,
        config: serde_json::json!({
            "de": de_config,
            "iterations_used": result.iterations_used,
            "converged": result.converged,
        }),
    };
    Ok((weights, result))
}
