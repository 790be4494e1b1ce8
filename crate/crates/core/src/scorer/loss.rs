use crate::error::{Error, Result};

/// `-x[y] + log Σ exp(x[i])`, evaluated with the maximum subtracted first.
pub fn loss_single(scores: &[f64], label: usize) -> Result<f64> {
    if label >= scores.len() {
        return Err(Error::InvalidInput(format!("label {label} out of range for {} scores", scores.len())));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|&s| (s - max).exp()).sum();
    // Both terms are non-negative: max >= scores[label] and sum >= 1.
    Ok((max - scores[label]) + sum.ln())
}

/// Mean of [`loss_single`] over a batch.
pub fn loss_batch<S: AsRef<[f64]>>(batch: &[S], labels: &[usize]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if batch.len() != labels.len() {
        return Err(Error::Shape(format!("{} score vectors, {} labels", batch.len(), labels.len())));
    }
    let total = batch.iter().zip(labels).map(|(x, &y)| loss_single(x.as_ref(), y)).sum::<Result<f64>>()?;
    Ok(total / batch.len() as f64)
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient of [`loss_single`] with respect to the scores:
/// `softmax(x) - onehot(y)`.
pub fn score_gradient(scores: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= scores.len() {
        return Err(Error::InvalidInput(format!("label {label} out of range for {} scores", scores.len())));
    }
    let mut g = softmax(scores);
    g[label] -= 1.0;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn closed_forms() {
        assert!((loss_single(&[0.0, 0.0], 0).unwrap() - LN2).abs() < 1e-12);
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((expected - 0.126_928_0).abs() < 1e-7);
        assert!((loss_single(&[2.0, 0.0], 0).unwrap() - expected).abs() < 1e-12);
        let big = loss_single(&[1000.0, 0.0], 0).unwrap();
        assert!(big.is_finite() && big.abs() < 1e-300);
        assert!((loss_single(&[1000.0, 0.0], 1).unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        assert!(loss_single(&[0.0, 1.0], 2).is_err());
        assert!(score_gradient(&[0.0, 1.0, 2.0], 3).is_err());
    }

    #[test]
    fn batch_mean() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
        let single = loss_single(&x[1], 0).unwrap();
        assert_eq!(loss_batch(&x[1..], &[0]).unwrap(), single);
        assert!((loss_batch(&[x[1].clone(), x[1].clone()], &[0, 0]).unwrap() - single).abs() < 1e-15);
        let mean = loss_batch(&x, &[0, 0]).unwrap();
        assert!((mean - 0.410_037_6).abs() < 1e-7, "{mean}");
        assert!((mean - (LN2 + (1.0 + (-2.0f64).exp()).ln()) / 2.0).abs() < 1e-15);
        assert!(loss_batch::<Vec<f64>>(&[], &[]).is_err());
        assert!(loss_batch(&x, &[0]).is_err());
    }

    #[test]
    fn saturated_margin_gives_vanishing_gradient() {
        let g = score_gradient(&[60.0, 0.0, -5.0], 0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-25), "{g:?}");
    }

    proptest! {
        #[test]
        fn non_negative_and_shift_invariant(
            x in prop::collection::vec(-50.0f64..50.0, 2..4),
            c in -100.0f64..100.0,
            y in 0usize..4,
        ) {
            let y = y % x.len();
            let l = loss_single(&x, y).unwrap();
            prop_assert!(l >= 0.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            prop_assert!((loss_single(&shifted, y).unwrap() - l).abs() < 1e-9);
        }

        #[test]
        fn gradient_sums_to_zero(x in prop::collection::vec(-30.0f64..30.0, 2..4), y in 0usize..4) {
            let y = y % x.len();
            let g = score_gradient(&x, y).unwrap();
            prop_assert!(g.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}
