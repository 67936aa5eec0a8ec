//! Exponential rate fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through `(x, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    /// Standard error of the slope; zero when fewer than three points.
    pub stderr: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Fit `value ~ C e^{slope x}` by ordinary least squares on `ln value`.
///
/// Non-positive or non-finite values are rejected.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    fit_rate_min(points, 3)
}

pub(crate) fn fit_rate_min(points: &[(f64, f64)], min_points: usize) -> Result<RateFit> {
    if points.len() < min_points.max(2) {
        return Err(Error::InsufficientPoints {
            needed: min_points.max(2),
            got: points.len(),
        });
    }
    if let Some(&(x, v)) = points
        .iter()
        .find(|(x, v)| !(*v > 0.0) || !v.is_finite() || !x.is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs finite positive values, got {v} at {x}"
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two distinct abscissae".into(),
        ));
    }
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if points.len() > 2 {
        let rss = points
            .iter()
            .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
            .sum::<f64>();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        stderr,
        intercept,
        n: points.len(),
    })
}

/// `|fit / target - 1|`.
pub fn relative_deviation(slope: f64, target: f64) -> f64 {
    (slope / target - 1.0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponentials() {
        let pts: Vec<_> = [1.0f64, 2.0, 3.0, 4.0]
            .iter()
            .map(|&m| (m, (-2.0 * m).exp()))
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && f.stderr < 1e-12);
        let pts: Vec<_> = [6.0f64, 8.0, 10.0]
            .iter()
            .map(|&m| (m, 7.0 * (-3.0 * m).exp()))
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fit_rate(&[(1.0, 1.0), (2.0, 0.5)]),
            Err(Error::InsufficientPoints { needed: 3, got: 2 })
        ));
        assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }
}
