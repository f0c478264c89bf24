//! Histogram and Gaussian-kernel density estimates built from finite-difference
//! derivative samples, scored by integrated squared error against the true
//! density.
//!
//! Sample locations are the fixed grid `y_n`, not random draws, so the score
//! is the ISE of one deterministic design rather than an expected error.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{log_log_fit, LineFit};
use crate::functions::{sample, AnalyticFunction, SampledFunction};
use crate::truth;

/// Name of the error metric in reports.
pub const METRIC_LABEL: &str = "ISE (fixed design)";

/// Default number of evaluation points for [`ise`].
pub const DEFAULT_ISE_GRID: usize = 4000;

/// Forward differences `(S(y_{n+1}) - S(y_n)) / delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeSamples {
    values: Vec<f64>,
    source: String,
}

impl DerivativeSamples {
    pub fn from_samples(samples: &SampledFunction, source: impl Into<String>) -> Result<Self> {
        let d = samples.delta();
        let values: Vec<f64> = samples.values().windows(2).map(|w| (w[1] - w[0]) / d).collect();
        Self::from_values(values, source)
    }

    pub fn from_values(values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("derivative sample set is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("derivative samples must be finite".into()));
        }
        Ok(Self {
            values,
            source: source.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn source(&self) -> &str {
        &self.source
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Piecewise-constant density on `[lo, hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    density: Vec<f64>,
    counts: Vec<usize>,
    dropped: usize,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }
    pub fn densities(&self) -> &[f64] {
        &self.density
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    /// Samples that fell outside the range.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn evaluate(&self, u: f64) -> f64 {
        if !(u >= self.lo && u < self.hi) {
            return 0.0;
        }
        let k = ((u - self.lo) / self.bin_width()) as usize;
        self.density[k.min(self.density.len() - 1)]
    }

    /// Integral of the density over its range.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Normalized histogram with `bins` equal bins on `[lo, hi)`; the upper end
/// is closed so a sample at `hi` lands in the last bin.
pub fn histogram_density(ds: &DerivativeSamples, bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::Parameter {
            name: "bins",
            value: bins as f64,
            reason: "need at least two bins",
        });
    }
    if !(lo < hi) {
        return Err(Error::Parameter {
            name: "range",
            value: hi,
            reason: "histogram range must have lo < hi",
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut dropped = 0;
    for &v in ds.values() {
        if v < lo || v > hi {
            dropped += 1;
            continue;
        }
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = ds.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    Ok(Histogram {
        lo,
        hi,
        density,
        counts,
        dropped,
    })
}

/// `ceil(N^(1/3))` bins.
pub fn default_bins(n: usize) -> usize {
    let c = (n as f64).cbrt();
    // guard against cbrt landing a hair above an exact cube
    let r = c.round();
    let bins = if (c - r).abs() < 1e-9 { r } else { c.ceil() };
    (bins as usize).max(2)
}

/// Gaussian kernel estimate `(1/(n h)) sum K((u - v_i) / h)`.
pub fn kernel_density(ds: &DerivativeSamples, bandwidth: f64, u: f64) -> Result<f64> {
    check_bandwidth(bandwidth)?;
    Ok(kde_at(ds.values(), bandwidth, u))
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter {
            name: "bandwidth",
            value: h,
            reason: "kernel bandwidth must be positive",
        });
    }
    Ok(())
}

fn kde_at(values: &[f64], h: f64, u: f64) -> f64 {
    let s: f64 = values
        .iter()
        .map(|v| {
            let z = (u - v) / h;
            (-0.5 * z * z).exp()
        })
        .sum();
    s / (values.len() as f64 * h * (2.0 * PI).sqrt())
}

/// Kernel estimate with a fixed bandwidth, evaluated on demand.
#[derive(Clone, Debug)]
pub struct KernelDensity {
    values: Vec<f64>,
    bandwidth: f64,
}

impl KernelDensity {
    pub fn new(ds: &DerivativeSamples, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Self {
            values: ds.values().to_vec(),
            bandwidth,
        })
    }
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
    pub fn evaluate(&self, u: f64) -> f64 {
        kde_at(&self.values, self.bandwidth, u)
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Silverman's rule `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(ds: &DerivativeSamples) -> f64 {
    let v = ds.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Riemann approximation of `integral (P - estimate)^2 du` over
/// `(-B + eps_C, B - eps_C)`, skipping points within `eps_C` of a critical value.
pub fn ise(est: impl Fn(f64) -> f64 + Sync, func: &AnalyticFunction, grid: usize) -> Result<f64> {
    if grid < 1000 {
        return Err(Error::Parameter {
            name: "grid",
            value: grid as f64,
            reason: "ISE grid needs at least 1000 points",
        });
    }
    let eps = func.exclusion_margin();
    let lo = -func.bound() + eps;
    let du = 2.0 * (func.bound() - eps) / grid as f64;
    let parts = (0..grid)
        .into_par_iter()
        .map(|i| {
            let u = lo + (i as f64 + 0.5) * du;
            if func.near_critical(u, eps).is_some() {
                return Ok(0.0);
            }
            let d = truth::density(func, u)? - est(u);
            Ok(d * d)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>() * du)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Histogram,
    Kernel,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Histogram => "histogram",
            Method::Kernel => "kernel",
        }
    }

    /// Slope band for the ISE-versus-N fit.
    pub fn slope_band(self) -> (f64, f64) {
        match self {
            Method::Histogram => (-0.9, -0.45),
            Method::Kernel => (-1.1, -0.55),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BaselineRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub method: &'static str,
    pub ise: f64,
}

/// Slope of log ISE against log N for one method.
#[derive(Clone, Debug, Serialize)]
pub struct MethodRate {
    pub method: Method,
    pub fit: Option<LineFit>,
    pub band: (f64, f64),
    pub pass: bool,
}

/// ISE of both baselines over a range of sample counts.
#[derive(Clone, Debug, Serialize)]
pub struct RateStudy {
    pub metric: &'static str,
    pub function: String,
    pub rows: Vec<BaselineRow>,
    pub rates: Vec<MethodRate>,
}

impl RateStudy {
    /// Writes `N,method,ise` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rate(&self, method: Method) -> Option<&MethodRate> {
        self.rates.iter().find(|r| r.method == method)
    }
}

/// Both baselines at each `N`: histogram with `ceil(N^(1/3))` bins on
/// `[-B, B]`, kernel with Silverman's bandwidth.
pub fn rate_study(func: &AnalyticFunction, ns: &[usize], grid: usize) -> Result<RateStudy> {
    rate_study_with_progress(func, ns, grid, |_| {})
}

/// [`rate_study`] that reports each finished row.
pub fn rate_study_with_progress(
    func: &AnalyticFunction,
    ns: &[usize],
    grid: usize,
    progress: impl Fn(&BaselineRow),
) -> Result<RateStudy> {
    if ns.is_empty() {
        return Err(Error::Config("N list is empty".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("N list must be strictly ascending".into()));
    }
    let b = func.bound();
    let mut rows = Vec::with_capacity(2 * ns.len());
    for &n in ns {
        let ds = DerivativeSamples::from_samples(&sample(func, n)?, func.name())?;
        let hist = histogram_density(&ds, default_bins(n), -b, b)?;
        let row = BaselineRow {
            n,
            method: Method::Histogram.label(),
            ise: ise(|u| hist.evaluate(u), func, grid)?,
        };
        progress(&row);
        rows.push(row);
        let kde = KernelDensity::new(&ds, silverman_bandwidth(&ds))?;
        let row = BaselineRow {
            n,
            method: Method::Kernel.label(),
            ise: ise(|u| kde.evaluate(u), func, grid)?,
        };
        progress(&row);
        rows.push(row);
    }
    let rates = [Method::Histogram, Method::Kernel]
        .into_iter()
        .map(|m| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.method == m.label() && r.ise > 0.0)
                .map(|r| (r.n as f64, r.ise))
                .unzip();
            let fit = log_log_fit(&x, &y);
            let band = m.slope_band();
            MethodRate {
                method: m,
                pass: fit.is_some_and(|f| f.slope >= band.0 && f.slope <= band.1),
                fit,
                band,
            }
        })
        .collect();
    Ok(RateStudy {
        metric: METRIC_LABEL,
        function: func.name().to_string(),
        rows,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::builtin_quadratic;

    fn quadratic_samples(n: usize) -> DerivativeSamples {
        DerivativeSamples::from_samples(&sample(&builtin_quadratic(), n).unwrap(), "quadratic").unwrap()
    }

    #[test]
    fn forward_differences_of_quadratic() {
        let ds = quadratic_samples(8);
        assert_eq!(ds.len(), 7);
        // (y_{n+1}^2 - y_n^2) / (2 delta) = (n + 1) delta
        for (i, v) in ds.values().iter().enumerate() {
            assert!((v - (i + 1) as f64 / 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn histogram_of_uniform_derivative() {
        let ds = quadratic_samples(1 << 12);
        let h = histogram_density(&ds, 64, 0.0, 1.0).unwrap();
        assert!(h.densities().iter().all(|d| (d - 1.0).abs() < 0.2));
        assert!(h.mass() <= 1.0 + 1e-12);
        assert_eq!(h.dropped(), 0);
    }

    #[test]
    fn histogram_trivial_cases() {
        let one = DerivativeSamples::from_values(vec![0.25], "t").unwrap();
        let h = histogram_density(&one, 2, 0.0, 1.0).unwrap();
        assert_eq!(h.densities(), &[2.0, 0.0]);
        let same = DerivativeSamples::from_values(vec![0.7; 10], "t").unwrap();
        let h = histogram_density(&same, 4, 0.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[0, 0, 10, 0]);
        assert!((h.mass() - 1.0).abs() < 1e-12);
        let out = DerivativeSamples::from_values(vec![0.5, 3.0], "t").unwrap();
        let h = histogram_density(&out, 2, 0.0, 1.0).unwrap();
        assert_eq!(h.dropped(), 1);
        assert!((h.mass() - 0.5).abs() < 1e-12);
        assert!(DerivativeSamples::from_values(vec![], "t").is_err());
        assert!(histogram_density(&one, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_cases() {
        let one = DerivativeSamples::from_values(vec![0.3], "t").unwrap();
        let h = 0.05;
        let peak = kernel_density(&one, h, 0.3).unwrap();
        assert!((peak - 1.0 / (h * (2.0 * PI).sqrt())).abs() < 1e-12);
        assert!(kernel_density(&one, h, 0.3 + 11.0 * h).unwrap() < 1e-20);
        assert!(kernel_density(&one, 0.0, 0.3).is_err());

        let ds = quadratic_samples(1 << 12);
        let bw = silverman_bandwidth(&ds);
        assert!((kernel_density(&ds, bw, 0.5).unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn silverman_for_uniform_grid() {
        let ds = quadratic_samples(1 << 12);
        // sd of U(0,1) = 0.2887 < IQR / 1.34 = 0.373
        let expected = 0.9 * (1.0f64 / 12.0).sqrt() * (4095f64).powf(-0.2);
        assert!((silverman_bandwidth(&ds) - expected).abs() < 1e-3 * expected);
    }

    #[test]
    fn bin_rule() {
        assert_eq!(default_bins(1000), 10);
        assert_eq!(default_bins(1024), 11);
        assert_eq!(default_bins(1 << 15), 32);
        assert_eq!(default_bins(1 << 16), 41);
    }

    #[test]
    fn ise_of_oracle_is_zero() {
        let q = builtin_quadratic();
        let e = ise(|u| if u > 0.0 && u < 1.0 { 1.0 } else { 0.0 }, &q, 2000).unwrap();
        assert_eq!(e, 0.0);
        let e = ise(|_| 0.0, &q, 2000).unwrap();
        // unit density on (eps, B - eps); the margin at 1 lies past B - eps
        assert!((e - (1.0 - 2.0 * q.exclusion_margin())).abs() < 2e-3);
        assert!(ise(|_| 0.0, &q, 999).is_err());
    }

    #[test]
    fn baselines_are_nonnegative() {
        let ds = quadratic_samples(1 << 10);
        let h = histogram_density(&ds, default_bins(1 << 10), -1.0, 1.0).unwrap();
        assert!(h.densities().iter().all(|d| *d >= 0.0));
        let k = KernelDensity::new(&ds, silverman_bandwidth(&ds)).unwrap();
        assert!((-20..=20).all(|i| k.evaluate(i as f64 * 0.1) >= 0.0));
    }

    #[test]
    fn study_layout() {
        let s = rate_study(&builtin_quadratic(), &[1024, 2048], 1000).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert_eq!(s.metric, "ISE (fixed design)");
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N,method,ise\n1024,histogram,"));
        assert!(s.rate(Method::Kernel).unwrap().fit.is_some());
    }
}
