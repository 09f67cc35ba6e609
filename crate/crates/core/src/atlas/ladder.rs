use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensitivity::log_log_slope;

/// One diagnostic value per truncation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationLadder {
    pub name: String,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
}

impl TruncationLadder {
    pub fn new(name: impl Into<String>, levels: Vec<usize>, values: Vec<f64>) -> Self {
        Self { name: name.into(), levels, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub name: String,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
    /// `values[i+1] / values[i]`.
    pub ratios: Vec<f64>,
    /// Least-squares slope of `ln |value|` against `ln N`.
    pub exponent: f64,
    pub strictly_increasing: bool,
    pub strictly_decreasing: bool,
}

pub fn divergence_report(ladder: &TruncationLadder) -> Result<DivergenceReport> {
    if ladder.levels.len() < 3 || ladder.levels.len() != ladder.values.len() {
        return Err(Error::Precondition(format!(
            "divergence report needs at least three levels, got {}",
            ladder.levels.len()
        )));
    }
    if ladder.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("truncation levels must increase".into()));
    }
    let v = &ladder.values;
    let pts: Vec<(f64, f64)> = ladder
        .levels
        .iter()
        .zip(v)
        .filter(|(_, y)| **y != 0.0)
        .map(|(n, y)| ((*n as f64).ln(), y.abs().ln()))
        .collect();
    Ok(DivergenceReport {
        name: ladder.name.clone(),
        levels: ladder.levels.clone(),
        values: v.clone(),
        ratios: v.windows(2).map(|w| w[1] / w[0]).collect(),
        exponent: log_log_slope(&pts).unwrap_or(f64::NAN),
        strictly_increasing: v.windows(2).all(|w| w[1] > w[0]),
        strictly_decreasing: v.windows(2).all(|w| w[1] < w[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_diagnostic_has_zero_exponent() {
        let r = divergence_report(&TruncationLadder::new("c", vec![10, 20, 40], vec![2.0; 3])).unwrap();
        assert!(r.exponent.abs() < 1e-12);
        assert!(!r.strictly_increasing && !r.strictly_decreasing);
    }

    #[test]
    fn sum_of_squares_grows_cubically() {
        let levels = vec![10, 20, 40];
        let values = levels.iter().map(|&n| (5..=n).map(|k| (k * k) as f64).sum()).collect();
        let r = divergence_report(&TruncationLadder::new("sq", levels, values)).unwrap();
        assert!((r.exponent - 3.0).abs() < 0.1, "{}", r.exponent);
        assert!(r.strictly_increasing);
    }

    #[test]
    fn two_levels_are_rejected() {
        let l = TruncationLadder::new("x", vec![10, 20], vec![1.0, 2.0]);
        assert!(matches!(divergence_report(&l), Err(Error::Precondition(_))));
    }
}
