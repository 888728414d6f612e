//! Small numeric helpers shared across modules.

use serde::{Deserialize, Serialize};

/// Linear-interpolation percentile of ascending-sorted values:
/// rank `p/100·(n−1)`, interpolated between its neighbouring order statistics.
///
/// ```
/// let xs: Vec<f64> = (1..=10).map(f64::from).collect();
/// assert!((leadopt::stats::percentile_linear(&xs, 80.0) - 8.2).abs() < 1e-12);
/// ```
pub fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Smallest order statistic whose rank covers `p` percent of the sample.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let n = sorted.len();
    let k = ((p / 100.0).clamp(0.0, 1.0) * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Min, quartiles and max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(xs: &[f64]) -> Option<FiveNumber> {
        if xs.is_empty() {
            return None;
        }
        let s = sorted_copy(xs);
        Some(FiveNumber {
            min: s[0],
            q1: percentile_linear(&s, 25.0),
            median: percentile_linear(&s, 50.0),
            q3: percentile_linear(&s, 75.0),
            max: s[s.len() - 1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile_linear(&xs, 0.0), 1.0);
        assert_eq!(percentile_linear(&xs, 100.0), 10.0);
        assert_eq!(percentile_linear(&[3.5], 80.0), 3.5);
        assert_eq!(percentile_nearest_rank(&xs, 80.0), 8.0);
        assert_eq!(FiveNumber::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap().median, 3.0);
    }
}
