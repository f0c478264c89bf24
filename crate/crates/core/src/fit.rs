//! Ordinary least squares for rate fitting.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Straight-line fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
    /// Two-sided 95% confidence interval for the slope; absent with two points.
    pub slope_ci95: Option<(f64, f64)>,
}

/// Least-squares line through `(x, y)`. `None` with fewer than two points or
/// when every `x` coincides.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len(), "fit needs paired samples");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };

    let slope_ci95 = (n > 2).then(|| {
        let dof = nf - 2.0;
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    });

    Some(LineFit {
        slope,
        intercept,
        r2,
        n_points: n,
        slope_ci95,
    })
}

/// Fit of `ln y` against `ln x`.
pub fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        let (lo, hi) = f.slope_ci95.unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_line_interval() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.1, 0.9, 2.2, 2.8, 4.1];
        let f = linear_fit(&x, &y).unwrap();
        // hand-computed: sxy = 9.9, sxx = 10
        assert!((f.slope - 0.99).abs() < 1e-12);
        assert!((f.intercept - 0.04).abs() < 1e-12);
        // sse = 0.107, se = sqrt(0.107/3/10), t(0.975, 3) = 3.182446305
        let half = 3.182_446_305_284_263 * (0.107f64 / 30.0).sqrt();
        let (lo, hi) = f.slope_ci95.unwrap();
        assert!((lo - (0.99 - half)).abs() < 1e-9);
        assert!((hi - (0.99 + half)).abs() < 1e-9);
        assert!(f.r2 > 0.98 && f.r2 < 1.0);
    }

    #[test]
    fn power_law_slope() {
        let x: Vec<f64> = (10..17).map(|k| 2f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| 5.0 / v).collect();
        let f = log_log_fit(&x, &y).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        let f = linear_fit(&[1.0, 2.0], &[2.0, 3.0]).unwrap();
        assert!(f.slope_ci95.is_none());
    }
}
