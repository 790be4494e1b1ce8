use std::borrow::Borrow;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::Rng;

use super::loss::{loss_single, score_gradient};
use super::params::{ToyScorerParams, Weights};
use super::ScoreVector;
use crate::dataset::{tokenize, ReconstructedInput, Sample, TokenSequence};
use crate::error::{Error, Result};

/// Mean-pooled token embedding; stands in for the sequence representation a
/// pretrained encoder would produce.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Eval,
    /// Training forward pass with the given dropout rate.
    Train {
        dropout: f64,
    },
}

impl Mode {
    fn dropout(self) -> Option<f64> {
        match self {
            Mode::Eval => None,
            Mode::Train { dropout } => Some(dropout),
        }
    }
}

/// Embedding row a token hashes to (64-bit FNV-1a of its UTF-8 bytes).
pub fn bucket_of(token: &str, buckets: usize) -> usize {
    let mut hasher = FnvHasher::default();
    hasher.write(token.as_bytes());
    (hasher.finish() % buckets as u64) as usize
}

fn buckets_of(params: &ToyScorerParams, tokens: &TokenSequence) -> Vec<usize> {
    let n = params.dims().buckets;
    tokens.tokens.iter().map(|t| bucket_of(t, n)).collect()
}

fn pool(weights: &Weights, buckets: &[usize]) -> Vec<f64> {
    let d = weights.dims().embedding_dim;
    let mut pooled = vec![0.0; d];
    if buckets.is_empty() {
        return pooled;
    }
    for &b in buckets {
        for (p, e) in pooled.iter_mut().zip(weights.embedding_row(b)) {
            *p += e;
        }
    }
    let n = buckets.len() as f64;
    pooled.iter_mut().for_each(|p| *p /= n);
    pooled
}

/// Hash every token, look up its embedding row and average the rows. An empty
/// sequence gives the zero vector.
pub fn encode(params: &ToyScorerParams, tokens: &TokenSequence) -> FeatureVector {
    FeatureVector { values: pool(&params.weights, &buckets_of(params, tokens)) }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`. `None` when dropout is off.
fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: Option<f64>, rng: &mut R) -> Option<Vec<f64>> {
    let rate = rate.filter(|&r| r > 0.0)?;
    let keep = 1.0 / (1.0 - rate);
    Some((0..len).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect())
}

/// Activations of one choice, kept for the backward pass.
struct Branch {
    buckets: Vec<usize>,
    /// Pooled features after dropout.
    features: Vec<f64>,
    feature_mask: Option<Vec<f64>>,
    pre_activation: Vec<f64>,
    /// ReLU output after dropout.
    hidden: Vec<f64>,
    hidden_mask: Option<Vec<f64>>,
    score: f64,
}

fn forward_branch<R: Rng + ?Sized>(
    weights: &Weights,
    buckets: Vec<usize>,
    dropout: Option<f64>,
    rng: &mut R,
) -> Branch {
    let dims = weights.dims();
    let (d, h) = (dims.embedding_dim, dims.hidden_dim);
    let mut features = pool(weights, &buckets);
    let feature_mask = dropout_mask(d, dropout, rng);
    if let Some(mask) = &feature_mask {
        features.iter_mut().zip(mask).for_each(|(f, m)| *f *= m);
    }

    let w = weights.hidden_weights();
    let mut pre_activation = weights.hidden_bias().to_vec();
    for (i, &f) in features.iter().enumerate() {
        if f != 0.0 {
            for (z, wij) in pre_activation.iter_mut().zip(&w[i * h..(i + 1) * h]) {
                *z += f * wij;
            }
        }
    }
    let mut hidden: Vec<f64> = pre_activation.iter().map(|&z| z.max(0.0)).collect();
    let hidden_mask = dropout_mask(h, dropout, rng);
    if let Some(mask) = &hidden_mask {
        hidden.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
    }
    let score = weights.output_bias() + hidden.iter().zip(weights.output_weights()).map(|(a, w)| a * w).sum::<f64>();
    Branch { buckets, features, feature_mask, pre_activation, hidden, hidden_mask, score }
}

/// Score of one reconstructed input: `w_out · ReLU(W c + b) + b_out` with `c`
/// the pooled embedding. Dropout (training only) is applied to `c` and to the
/// hidden layer.
pub fn score_input<R: Rng + ?Sized>(
    params: &ToyScorerParams,
    input: &ReconstructedInput,
    dropout: Option<f64>,
    rng: &mut R,
) -> f64 {
    let tokens = tokenize(&input.text, params.max_sequence_length);
    forward_branch(&params.weights, buckets_of(params, &tokens), dropout, rng).score
}

fn forward_branches<R: Rng + ?Sized>(
    params: &ToyScorerParams,
    sample: &Sample,
    dropout: Option<f64>,
    rng: &mut R,
) -> Result<Vec<Branch>> {
    Ok(sample
        .reconstruct(&params.template)?
        .iter()
        .map(|input| {
            let tokens = tokenize(&input.text, params.max_sequence_length);
            forward_branch(&params.weights, buckets_of(params, &tokens), dropout, rng)
        })
        .collect())
}

/// Scores every choice of a sample with the same parameters. Each branch
/// draws its own dropout masks in training mode.
pub fn forward_sample<R: Rng + ?Sized>(
    params: &ToyScorerParams,
    sample: &Sample,
    mode: Mode,
    rng: &mut R,
) -> Result<ScoreVector> {
    let branches = forward_branches(params, sample, mode.dropout(), rng)?;
    Ok(ScoreVector { sample_id: sample.id().to_string(), scores: branches.iter().map(|b| b.score).collect() })
}

/// Eval-mode forward pass that needs no RNG.
pub fn score_sample(params: &ToyScorerParams, sample: &Sample) -> Result<ScoreVector> {
    forward_sample(params, sample, Mode::Eval, &mut rand::rngs::mock::StepRng::new(0, 0))
}

fn accumulate_branch(weights: &Weights, branch: &Branch, upstream: f64, grads: &mut Weights) {
    let dims = weights.dims();
    let (d, h) = (dims.embedding_dim, dims.hidden_dim);
    let out_w = weights.output_weights();
    let hid_w = weights.hidden_weights();
    let g = grads.parts_mut();

    *g.output_bias += upstream;
    let mut d_pre = vec![0.0; h];
    for j in 0..h {
        g.output_weights[j] += upstream * branch.hidden[j];
        if branch.pre_activation[j] > 0.0 {
            let mask = branch.hidden_mask.as_ref().map_or(1.0, |m| m[j]);
            d_pre[j] = upstream * out_w[j] * mask;
        }
    }
    for (gb, dz) in g.hidden_bias.iter_mut().zip(&d_pre) {
        *gb += dz;
    }
    let mut d_pooled = vec![0.0; d];
    for i in 0..d {
        let row = &hid_w[i * h..(i + 1) * h];
        let grow = &mut g.hidden_weights[i * h..(i + 1) * h];
        let mut acc = 0.0;
        for j in 0..h {
            grow[j] += branch.features[i] * d_pre[j];
            acc += row[j] * d_pre[j];
        }
        d_pooled[i] = acc * branch.feature_mask.as_ref().map_or(1.0, |m| m[i]);
    }
    if branch.buckets.is_empty() {
        return;
    }
    let inv_n = 1.0 / branch.buckets.len() as f64;
    for &b in &branch.buckets {
        let row = &mut g.embedding[b * d..(b + 1) * d];
        for (r, dp) in row.iter_mut().zip(&d_pooled) {
            *r += dp * inv_n;
        }
    }
}

/// Batch loss and its exact gradient with respect to every parameter.
///
/// Dropout masks are drawn once per branch in the forward pass and reused in
/// the backward pass. Gradients accumulate in sample order, so the result is
/// reproducible for a given RNG state.
pub fn backward<S: Borrow<Sample>, R: Rng + ?Sized>(
    params: &ToyScorerParams,
    batch: &[S],
    dropout: Option<f64>,
    rng: &mut R,
) -> Result<(f64, Weights)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut grads = Weights::zeros(params.dims());
    let mut total = 0.0;
    for sample in batch {
        let sample = sample.borrow();
        let branches = forward_branches(params, sample, dropout, rng)?;
        let scores: Vec<f64> = branches.iter().map(|b| b.score).collect();
        total += loss_single(&scores, sample.label())?;
        let upstream = score_gradient(&scores, sample.label())?;
        for (branch, g) in branches.iter().zip(upstream) {
            accumulate_branch(&params.weights, branch, g / n, &mut grads);
        }
    }
    Ok((total / n, grads))
}

/// Eval-mode mean loss over a batch.
pub fn batch_loss<S: Borrow<Sample>>(params: &ToyScorerParams, batch: &[S]) -> Result<f64> {
    let scores =
        batch.iter().map(|s| score_sample(params, s.borrow()).map(|v| v.scores)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = batch.iter().map(|s| s.borrow().label()).collect();
    super::loss_batch(&scores, &labels)
}
