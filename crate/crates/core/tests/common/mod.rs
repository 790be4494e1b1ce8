//! Generators and oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sensemble::analysis::{CorrectnessBitmap, VennReport};
use sensemble::dataset::{ExplanationSample, Sample, ValidationSample};
use sensemble::ensemble::ScoreMatrix;
use sensemble::scorer::ScoreVector;
use sensemble::scorer::{batch_loss, ToyScorerParams};

/// Three backends over one split, each favouring the gold choice with its own
/// probability. Scores are uniform in [-2, 2] plus a bonus of 1.5 on the
/// favoured choice.
pub fn random_triple(rng: &mut ChaCha8Rng) -> (Vec<ScoreMatrix>, BTreeMap<String, usize>) {
    let n = rng.gen_range(20..80);
    let k = rng.gen_range(2..4);
    let labels: BTreeMap<String, usize> = (0..n).map(|i| (format!("q{i:03}"), rng.gen_range(0..k))).collect();
    let matrices = (0..3)
        .map(|b| {
            let skill: f64 = rng.gen_range(0.3..0.9);
            let vectors: Vec<ScoreVector> = labels
                .iter()
                .map(|(id, &y)| {
                    let mut scores: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let favoured = if rng.gen_bool(skill) { y } else { rng.gen_range(0..k) };
                    scores[favoured] += 1.5;
                    ScoreVector::new(id.clone(), scores).unwrap()
                })
                .collect();
            ScoreMatrix::from_vectors(format!("m{b}"), vectors).unwrap()
        })
        .collect();
    (matrices, labels)
}

pub fn random_bitmap(rng: &mut ChaCha8Rng, system: &str, n: usize, p: f64) -> CorrectnessBitmap {
    CorrectnessBitmap {
        system: system.into(),
        correct: (0..n).map(|i| (format!("s{i:04}"), rng.gen_bool(p))).collect(),
    }
}

/// Region counts by a direct test per sample and per region: a sample belongs
/// to a region when exactly the region's members were correct on it.
pub fn venn_oracle(
    singles: &[CorrectnessBitmap],
    ensemble: &CorrectnessBitmap,
    report: &VennReport,
) -> Vec<(usize, usize)> {
    report
        .regions
        .iter()
        .map(|region| {
            let mut alpha = 0;
            let mut beta = 0;
            for (id, &ens) in &ensemble.correct {
                let inside = singles.iter().all(|s| s.correct[id] == region.members.contains(&s.system));
                if inside {
                    alpha += 1;
                    beta += usize::from(ens);
                }
            }
            (alpha, beta)
        })
        .collect()
}

/// Bitmaps that put `alpha` samples in the region of exactly `members`, with
/// the ensemble correct on the first `beta` of them. Ids continue from
/// `start`.
pub fn fill_region(
    systems: &[&str],
    members: &[&str],
    alpha: usize,
    beta: usize,
    start: usize,
    singles: &mut [CorrectnessBitmap],
    ensemble: &mut CorrectnessBitmap,
) -> usize {
    for j in 0..alpha {
        let id = format!("t{:05}", start + j);
        for (s, name) in singles.iter_mut().zip(systems) {
            s.correct.insert(id.clone(), members.contains(name));
        }
        ensemble.correct.insert(id, j < beta);
    }
    start + alpha
}

const WORDS: &[&str] = &["the", "cat", "sat", "on", "a", "mat", "fridge", "elephant", "turkey", "big"];

pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..6);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn random_batch(rng: &mut ChaCha8Rng) -> Vec<Sample> {
    (0..4)
        .map(|i| {
            if i % 2 == 0 {
                ValidationSample::new(format!("v{i}"), [random_text(rng), random_text(rng)], rng.gen_range(0..2))
                    .unwrap()
                    .into()
            } else {
                let options = [random_text(rng), random_text(rng), random_text(rng)];
                ExplanationSample::new(format!("e{i}"), random_text(rng), options, rng.gen_range(0..3)).unwrap().into()
            }
        })
        .collect()
}

/// Central differences of the eval-mode batch loss, one parameter at a time.
pub fn numeric_gradient(params: &ToyScorerParams, batch: &[Sample], eps: f64) -> Vec<f64> {
    let mut probe = params.clone();
    (0..params.weights.len())
        .map(|k| {
            let original = probe.weights.as_slice()[k];
            probe.weights.as_mut_slice()[k] = original + eps;
            let up = batch_loss(&probe, batch).unwrap();
            probe.weights.as_mut_slice()[k] = original - eps;
            let down = batch_loss(&probe, batch).unwrap();
            probe.weights.as_mut_slice()[k] = original;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}
