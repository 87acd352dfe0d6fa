//! Log-space summation used by every partition-function-shaped quantity.

use super::scalar::Scalar;

/// `log Σᵢ exp(terms[i])`, stabilized by factoring out the maximum.
///
/// Returns negative infinity for an empty slice (the empty sum).
pub fn logsumexp<T: Scalar>(terms: &[T]) -> T {
    let m = terms
        .iter()
        .fold(T::neg_infinity(), |acc, &t| acc.max(t));
    if !m.is_finite() {
        return m;
    }
    let sum = terms
        .iter()
        .fold(T::zero(), |acc, &t| acc + (t - m).exp());
    m + sum.ln()
}

/// `log Σᵢ wᵢ · exp(terms[i])` with positive weights, in log space.
pub fn weighted_logsumexp<T: Scalar>(terms: &[T], weights: &[T]) -> T {
    debug_assert_eq!(terms.len(), weights.len());
    let m = terms
        .iter()
        .fold(T::neg_infinity(), |acc, &t| acc.max(t));
    if !m.is_finite() {
        return m;
    }
    let sum = terms
        .iter()
        .zip(weights)
        .fold(T::zero(), |acc, (&t, &w)| acc + w * (t - m).exp());
    m + sum.ln()
}

/// Normalized probabilities `exp(logits[i]) / Σⱼ exp(logits[j])` computed in
/// log space.
pub fn softmax_from_logits<T: Scalar>(logits: &[T]) -> Vec<T> {
    let z = logsumexp(logits);
    logits.iter().map(|&l| (l - z).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survives_huge_magnitudes() {
        let v = logsumexp(&[1234.0_f64, 1232.0]);
        // 1232 + log(e^2 + 1)
        assert!((v - (1232.0 + (2.0_f64.exp() + 1.0).ln())).abs() < 1e-9);
        let w = logsumexp(&[-1234.0_f64, -1232.0]);
        assert!((w - (-1234.0 + (1.0 + 2.0_f64.exp()).ln())).abs() < 1e-9);
    }

    #[test]
    fn softmax_normalizes() {
        let p = softmax_from_logits(&[0.0_f64, (2.0_f64).ln()]);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_matches_plain_with_unit_weights() {
        let t = [0.3_f64, -1.2, 4.0];
        let w = [1.0_f64, 1.0, 1.0];
        assert!((weighted_logsumexp(&t, &w) - logsumexp(&t)).abs() < 1e-14);
    }
}
