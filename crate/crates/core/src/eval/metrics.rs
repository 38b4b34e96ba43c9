//! Classification and association metrics.

use super::EvalError;

/// Pearson correlation via single-pass accumulated sums.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(EvalError::TooFewValues { got: a.len() });
    }
    if is_constant(a) || is_constant(b) {
        return Err(EvalError::ZeroVariance);
    }
    let n = a.len() as f64;
    let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sa += x;
        sb += y;
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    let cov = sab - sa * sb / n;
    let va = saa - sa * sa / n;
    let vb = sbb - sb * sb / n;
    if va <= 0.0 || vb <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(cov / (va * vb).sqrt())
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Probability a random positive outranks a random negative; ties count one
/// half (the rank-sum form of the Mann-Whitney statistic).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let pos = labels.iter().filter(|l| **l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("non-finite score"));
    // Average ranks across ties, then sum the positive ranks.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += rank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    let q = neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Fraction of correct predictions at the threshold: a score at or above it
/// predicts the positive class.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::TooFewValues { got: 0 });
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(s, l)| u8::from(**s >= threshold) == **l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Spearman rank correlation: Pearson over average-tied ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    pearson(&ranks(a), &ranks(b))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("non-finite value"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_correlate_perfectly() {
        let a = vec![0.3, 1.7, -2.0, 0.4];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_vector_correlates_minus_one() {
        let a = vec![1.0, -1.0, 2.0, -2.0];
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_matches_two_pass_formula() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![1.0, 2.0, 3.0, 5.0];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        let expected = cov / (va * vb).sqrt();
        assert!((pearson(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_an_error_not_nan() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::ZeroVariance)
        ));
    }

    #[test]
    fn separated_scores_give_unit_auc() {
        let scores = vec![0.1, 0.2, 0.8, 0.9];
        let labels = vec![0, 0, 1, 1];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_give_half_auc() {
        let scores = vec![0.5; 6];
        let labels = vec![0, 1, 0, 1, 0, 1];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_labels_are_rejected() {
        assert!(matches!(
            auc(&[0.1, 0.9], &[1, 1]),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn accuracy_of_exact_scores() {
        let labels = vec![1, 0, 1, 0];
        let scores = vec![1.0, 0.0, 1.0, 0.0];
        assert_eq!(accuracy(&scores, &labels, 0.5).unwrap(), 1.0);
        let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        assert_eq!(accuracy(&flipped, &labels, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_counts_the_confusion_cells() {
        // TP, TN, FP, FN — one of each.
        let labels = vec![1, 0, 0, 1];
        let scores = vec![0.9, 0.1, 0.8, 0.2];
        assert_eq!(accuracy(&scores, &labels, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn spearman_sees_monotone_relations() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![10.0, 100.0, 1000.0, 10000.0];
        assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c: Vec<f64> = b.iter().map(|v| -v).collect();
        assert!((spearman(&a, &c).unwrap() + 1.0).abs() < 1e-12);
    }
}
