//! Log-log regression of census sizes against the torus side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excursion::thick_gap;
use crate::stats::ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Points used (nonzero counts).
    pub points: usize,
    /// Zero counts left out of the regression.
    pub dropped_zero: usize,
    pub distinct_sides: usize,
}

/// Least squares of `log count` on `log N` over `(N, count)` pairs. Zero
/// counts are dropped and reported; at least three distinct sides must
/// remain.
pub fn exponent_fit_pairs(pairs: &[(usize, usize)]) -> Result<ExponentFit> {
    let kept: Vec<(f64, f64)> = pairs.iter().filter(|p| p.1 > 0).map(|&(n, c)| ((n as f64).ln(), (c as f64).ln())).collect();
    let dropped_zero = pairs.len() - kept.len();
    let mut sides: Vec<usize> = pairs.iter().filter(|p| p.1 > 0).map(|p| p.0).collect();
    sides.sort_unstable();
    sides.dedup();
    if sides.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need nonzero counts at >= 3 distinct sides, have {} ({} zero counts dropped)",
            sides.len(),
            dropped_zero
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    let fit = ols(&xs, &ys);
    Ok(ExponentFit { slope: fit.slope, intercept: fit.intercept, stderr: fit.stderr, points: xs.len(), dropped_zero, distinct_sides: sides.len() })
}

pub fn exponent_fit(results: &[super::PointCensus]) -> Result<ExponentFit> {
    exponent_fit_pairs(&results.iter().map(|c| (c.side, c.count)).collect::<Vec<_>>())
}

/// `2 − 2(√(θ + 2η√θ) − √θ)²`.
pub fn thick_exponent(theta: f64, eta: f64) -> f64 {
    let g = thick_gap(theta, eta);
    2.0 - 2.0 * g * g
}

/// `2 − 2(√θ − √(θ − 2η√θ))²`; `None` when `θ − 2η√θ < 0`.
pub fn thin_exponent(theta: f64, eta: f64) -> Option<f64> {
    let inner = theta - 2.0 * eta * theta.sqrt();
    if inner < 0.0 {
        return None;
    }
    let g = theta.sqrt() - inner.sqrt();
    Some(2.0 - 2.0 * g * g)
}

/// `2 − 2η`.
pub fn late_exponent(eta: f64) -> f64 {
    2.0 - 2.0 * eta
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<(usize, usize)> = [8usize, 16, 32, 64].iter().map(|&n| (n, n * n)).collect();
        let f = exponent_fit_pairs(&pairs).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-9);
        assert_eq!(f.dropped_zero, 0);
    }

    #[test]
    fn zeros_dropped_and_too_few_sides() {
        let f = exponent_fit_pairs(&[(8, 0), (16, 4), (32, 8), (64, 16)]).unwrap();
        assert_eq!(f.dropped_zero, 1);
        assert!((f.slope - 1.0).abs() < 1e-9);
        assert!(matches!(exponent_fit_pairs(&[(8, 0), (16, 4), (32, 8)]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn predicted_exponents() {
        assert!((thick_exponent(1.0, 0.5) - 1.656_854_249).abs() < 1e-8);
        assert!((thin_exponent(4.0, 0.5).unwrap() - 1.313_708_499).abs() < 1e-8);
        assert_eq!(thin_exponent(1.0, 0.8), None);
        assert_eq!(late_exponent(0.5), 1.0);
    }
}
