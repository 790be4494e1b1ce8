//! A linearly separable validation set for exercising the training loop.
//!
//! Sensical statements draw their content words from one vocabulary,
//! non-sensical ones from a disjoint vocabulary, and both share filler words.
//! A bag-of-words scorer can therefore separate them perfectly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Sample, ValidationSample};

const VOCABULARY_SIZE: usize = 40;
const CONTENT_WORDS: usize = 2;
const FILLER_WORDS: usize = 3;

fn statement(rng: &mut ChaCha8Rng, prefix: &str) -> String {
    let mut words = Vec::with_capacity(FILLER_WORDS + CONTENT_WORDS);
    for _ in 0..FILLER_WORDS {
        words.push(format!("filler{}", rng.gen_range(0..VOCABULARY_SIZE)));
    }
    for _ in 0..CONTENT_WORDS {
        words.push(format!("{prefix}{}", rng.gen_range(0..VOCABULARY_SIZE)));
    }
    words.shuffle(rng);
    words.join(" ")
}

/// `n` validation samples; the sensical statement sits at a random index.
pub fn separable_validation_set(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sensical = statement(&mut rng, "plausible");
            let nonsensical = statement(&mut rng, "absurd");
            let sensical_index = rng.gen_range(0..2);
            let statements = if sensical_index == 0 { [sensical, nonsensical] } else { [nonsensical, sensical] };
            ValidationSample::new(format!("syn-{seed}-{i}"), statements, sensical_index)
                .expect("generated statements are non-empty")
                .into()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabularies_are_disjoint() {
        let set = separable_validation_set(50, 4);
        assert_eq!(set, separable_validation_set(50, 4));
        for s in &set {
            let Sample::Validation(v) = s else { unreachable!() };
            assert!(v.statements[v.sensical_index].contains("plausible"));
            assert!(!v.statements[v.sensical_index].contains("absurd"));
            assert!(v.statements[v.nonsensical_index()].contains("absurd"));
        }
        let ones = set.iter().filter(|s| s.label() == 1).count();
        assert!(ones > 10 && ones < 40);
    }
}
