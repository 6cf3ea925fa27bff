//! Weighted isotonic regression by pool-adjacent-violators: the fast path
//! for univariate monotone projections and the independent oracle for the
//! QP solver.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IsotonicError {
    #[error("weight at index {index} is not positive")]
    NonpositiveWeight { index: usize },
    #[error("values and weights have different lengths")]
    LengthMismatch,
    #[error("isotonic regression needs at least one point")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

#[derive(Debug, Clone)]
pub struct IsotonicProblem {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub direction: Direction,
}

impl IsotonicProblem {
    pub fn nondecreasing(values: Vec<f64>, weights: Vec<f64>) -> Self {
        IsotonicProblem {
            values,
            weights,
            direction: Direction::Nondecreasing,
        }
    }
}

/// Minimizer of `sum w_j (h_j - v_j)^2` over monotone `h`.
///
/// Adjacent violating blocks are pooled into their weighted mean until the
/// block means are monotone; ties collapse into a single block, which is
/// immaterial for the output since the L2 projection is unique. The
/// nonincreasing direction is handled by negation.
pub fn pava(problem: &IsotonicProblem) -> Result<Vec<f64>, IsotonicError> {
    let n = problem.values.len();
    if n == 0 {
        return Err(IsotonicError::Empty);
    }
    if problem.weights.len() != n {
        return Err(IsotonicError::LengthMismatch);
    }
    for (index, &w) in problem.weights.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(IsotonicError::NonpositiveWeight { index });
        }
    }
    let sign = match problem.direction {
        Direction::Nondecreasing => 1.0,
        Direction::Nonincreasing => -1.0,
    };

    // blocks of (weighted mean, total weight, point count)
    let mut mean: Vec<f64> = Vec::with_capacity(n);
    let mut weight: Vec<f64> = Vec::with_capacity(n);
    let mut size: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        mean.push(sign * problem.values[i]);
        weight.push(problem.weights[i]);
        size.push(1);
        while mean.len() > 1 {
            let j = mean.len() - 1;
            if mean[j - 1] <= mean[j] {
                break;
            }
            let w = weight[j - 1] + weight[j];
            mean[j - 1] = (weight[j - 1] * mean[j - 1] + weight[j] * mean[j]) / w;
            weight[j - 1] = w;
            size[j - 1] += size[j];
            mean.pop();
            weight.pop();
            size.pop();
        }
    }

    let mut out = Vec::with_capacity(n);
    for (m, s) in mean.iter().zip(&size) {
        for _ in 0..*s {
            out.push(sign * m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Exhaustive oracle: enumerate every partition of 1..k into contiguous
    /// blocks, take block-weighted means, keep monotone candidates, return
    /// the best. Independent of the pooling logic above.
    fn brute_force(values: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = values.len();
        assert!((1..=16).contains(&n));
        let mut best: Option<(f64, Vec<f64>)> = None;
        // bit i of mask set => a block boundary after position i
        for mask in 0u32..(1 << (n - 1)) {
            let mut fitted = Vec::with_capacity(n);
            let mut start = 0;
            let mut prev_mean = f64::NEG_INFINITY;
            let mut monotone = true;
            for end in 0..n {
                if end + 1 == n || mask & (1 << end) != 0 {
                    let wsum: f64 = weights[start..=end].iter().sum();
                    let m: f64 = values[start..=end]
                        .iter()
                        .zip(&weights[start..=end])
                        .map(|(v, w)| v * w)
                        .sum::<f64>()
                        / wsum;
                    if m < prev_mean - 1e-14 {
                        monotone = false;
                        break;
                    }
                    prev_mean = m;
                    for _ in start..=end {
                        fitted.push(m);
                    }
                    start = end + 1;
                }
            }
            if !monotone {
                continue;
            }
            let sse: f64 = fitted
                .iter()
                .zip(values)
                .zip(weights)
                .map(|((f, v), w)| w * (f - v) * (f - v))
                .sum();
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((sse, fitted));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn feasible_input_unchanged() {
        let p = IsotonicProblem::nondecreasing(vec![1.0, 2.0, 3.0], vec![1.0; 3]);
        assert_eq!(pava(&p).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_point_pool() {
        let p = IsotonicProblem::nondecreasing(vec![2.0, 1.0], vec![1.0, 1.0]);
        assert_eq!(pava(&p).unwrap(), vec![1.5, 1.5]);
    }

    #[test]
    fn three_point_pool_matches_brute_force() {
        let v = vec![3.0, 1.0, 2.0];
        let w = vec![1.0; 3];
        let p = IsotonicProblem::nondecreasing(v.clone(), w.clone());
        let fit = pava(&p).unwrap();
        assert_eq!(fit, vec![2.0, 2.0, 2.0]);
        assert_eq!(fit, brute_force(&v, &w));
    }

    #[test]
    fn weighted_pool_matches_brute_force() {
        // trapezoid weights on 3 points
        let v = vec![3.0, 1.0, 2.0];
        let w = vec![0.25, 0.5, 0.25];
        let fit = pava(&IsotonicProblem::nondecreasing(v.clone(), w.clone())).unwrap();
        let oracle = brute_force(&v, &w);
        for (a, b) in fit.iter().zip(&oracle) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert_relative_eq!(fit[0], 5.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn nonincreasing_by_negation() {
        let p = IsotonicProblem {
            values: vec![3.0, 1.0, 2.0],
            weights: vec![1.0; 3],
            direction: Direction::Nonincreasing,
        };
        assert_eq!(pava(&p).unwrap(), vec![3.0, 1.5, 1.5]);
    }

    #[test]
    fn rejects_bad_weights() {
        let p = IsotonicProblem::nondecreasing(vec![1.0, 2.0], vec![1.0, 0.0]);
        assert_eq!(
            pava(&p).unwrap_err(),
            IsotonicError::NonpositiveWeight { index: 1 }
        );
        assert_eq!(
            pava(&IsotonicProblem::nondecreasing(vec![], vec![])).unwrap_err(),
            IsotonicError::Empty
        );
    }

    proptest! {
        #[test]
        fn output_is_monotone_and_mean_preserving(
            values in proptest::collection::vec(-10.0f64..10.0, 1..40),
            raw_weights in proptest::collection::vec(0.1f64..5.0, 40),
        ) {
            let weights = raw_weights[..values.len()].to_vec();
            let fit = pava(&IsotonicProblem::nondecreasing(values.clone(), weights.clone())).unwrap();
            for w in fit.windows(2) {
                prop_assert!(w[1] - w[0] >= -1e-12);
            }
            let lhs: f64 = fit.iter().zip(&weights).map(|(h, w)| h * w).sum();
            let rhs: f64 = values.iter().zip(&weights).map(|(v, w)| v * w).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn agrees_with_exhaustive_oracle(
            values in proptest::collection::vec(-5.0f64..5.0, 1..9),
            raw_weights in proptest::collection::vec(0.2f64..3.0, 9),
        ) {
            let weights = raw_weights[..values.len()].to_vec();
            let fit = pava(&IsotonicProblem::nondecreasing(values.clone(), weights.clone())).unwrap();
            let oracle = brute_force(&values, &weights);
            for (a, b) in fit.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
