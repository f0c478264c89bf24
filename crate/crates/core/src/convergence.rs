//! Neighborhood measures, the averaged error statistic and parameter sweeps.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, log_log_fit, LineFit};
use crate::functions::{sample, AnalyticFunction};
use crate::spectrum::{estimate, tau_lower_bound, SpectrumEstimate};
use crate::truth;

/// Default neighborhood half-width as a fraction of the center spacing.
pub const DEFAULT_ALPHA_FRACTION: f64 = 0.4;

/// Fixed, pairwise disjoint frequency intervals `[c - alpha, c + alpha]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborhoodSet {
    centers: Vec<f64>,
    half_width: f64,
    bound: f64,
    forbidden: Vec<f64>,
    margin: f64,
}

impl NeighborhoodSet {
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }
    pub fn len(&self) -> usize {
        self.centers.len()
    }
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.centers[j] - self.half_width, self.centers[j] + self.half_width)
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(|j| self.interval(j))
    }

    /// Neighborhoods whose interval lies inside `[lo, hi]`.
    pub fn restricted_to(&self, lo: f64, hi: f64) -> Self {
        let centers = self
            .centers
            .iter()
            .copied()
            .filter(|c| c - self.half_width >= lo && c + self.half_width <= hi)
            .collect();
        Self {
            centers,
            ..self.clone()
        }
    }

    /// Standard layout for a catalog function, dropping neighborhoods that
    /// would touch a critical value.
    pub fn for_function(func: &AnalyticFunction, k: usize, alpha: Option<f64>) -> Result<Self> {
        Self::for_function_with_margin(func, k, alpha, func.exclusion_margin())
    }

    pub fn for_function_with_margin(
        func: &AnalyticFunction,
        k: usize,
        alpha: Option<f64>,
        eps_c: f64,
    ) -> Result<Self> {
        build_neighborhoods_skipping(func.bound(), k, alpha, func.critical_values(), eps_c)
    }
}

fn uniform_centers(bound: f64, k: usize, eps_c: f64) -> (Vec<f64>, f64) {
    let spacing = 2.0 * (bound - eps_c) / k as f64;
    let centers = (1..=k)
        .map(|j| -bound + eps_c + (j as f64 - 0.5) * spacing)
        .collect();
    (centers, spacing)
}

fn checked_layout(
    bound: f64,
    k: usize,
    alpha: Option<f64>,
    eps_c: f64,
) -> Result<(Vec<f64>, f64)> {
    if k == 0 {
        return Err(Error::Parameter {
            name: "K",
            value: 0.0,
            reason: "need at least one neighborhood",
        });
    }
    if !(eps_c >= 0.0 && eps_c < bound) {
        return Err(Error::Parameter {
            name: "eps_C",
            value: eps_c,
            reason: "margin must lie in [0, B)",
        });
    }
    let (centers, spacing) = uniform_centers(bound, k, eps_c);
    let alpha = alpha.unwrap_or(DEFAULT_ALPHA_FRACTION * spacing);
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter {
            name: "alpha",
            value: alpha,
            reason: "half-width must be positive",
        });
    }
    if 2.0 * alpha * k as f64 > 2.0 * (bound - eps_c) {
        return Err(Error::Parameter {
            name: "alpha",
            value: alpha,
            reason: "K neighborhoods of this half-width do not fit inside (-B + eps_C, B - eps_C)",
        });
    }
    Ok((centers, alpha))
}

/// `K` uniformly spaced neighborhoods; fails on any overlap or collision with
/// the forbidden set.
pub fn build_neighborhoods(
    bound: f64,
    k: usize,
    alpha: Option<f64>,
    forbidden: &[f64],
    eps_c: f64,
) -> Result<NeighborhoodSet> {
    let (centers, alpha) = checked_layout(bound, k, alpha, eps_c)?;
    build_neighborhoods_at(centers, alpha, bound, forbidden, eps_c)
}

/// Like [`build_neighborhoods`] but silently drops neighborhoods that touch
/// the forbidden set.
pub fn build_neighborhoods_skipping(
    bound: f64,
    k: usize,
    alpha: Option<f64>,
    forbidden: &[f64],
    eps_c: f64,
) -> Result<NeighborhoodSet> {
    let (centers, alpha) = checked_layout(bound, k, alpha, eps_c)?;
    let kept: Vec<f64> = centers
        .into_iter()
        .filter(|c| collision(*c, alpha, forbidden, eps_c).is_none())
        .collect();
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "every one of the {k} neighborhoods touches a critical value"
        )));
    }
    build_neighborhoods_at(kept, alpha, bound, forbidden, eps_c)
}

fn collision(center: f64, alpha: f64, forbidden: &[f64], eps_c: f64) -> Option<f64> {
    forbidden
        .iter()
        .copied()
        .find(|z| (center - z).abs() < alpha + eps_c)
}

/// Neighborhoods at caller-chosen centers.
pub fn build_neighborhoods_at(
    mut centers: Vec<f64>,
    alpha: f64,
    bound: f64,
    forbidden: &[f64],
    eps_c: f64,
) -> Result<NeighborhoodSet> {
    if centers.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config("neighborhood centers must be finite".into()));
    }
    centers.sort_by(f64::total_cmp);
    for (j, &c) in centers.iter().enumerate() {
        if c - alpha <= -bound + eps_c || c + alpha >= bound - eps_c {
            return Err(Error::Neighborhood {
                center: c,
                reason: format!(
                    "interval [{}, {}] leaves (-B + eps_C, B - eps_C)",
                    c - alpha,
                    c + alpha
                ),
            });
        }
        if let Some(z) = collision(c, alpha, forbidden, eps_c) {
            return Err(Error::Neighborhood {
                center: c,
                reason: format!("interval touches the critical value {z} (margin {eps_c})"),
            });
        }
        if j + 1 < centers.len() && centers[j + 1] - c <= 2.0 * alpha {
            return Err(Error::Neighborhood {
                center: c,
                reason: format!("overlaps the neighborhood at {}", centers[j + 1]),
            });
        }
    }
    Ok(NeighborhoodSet {
        centers,
        half_width: alpha,
        bound,
        forbidden: forbidden.to_vec(),
        margin: eps_c,
    })
}

/// Riemann sum `du * sum P_k` over bins with `u_k` in `[a, b]`.
pub fn estimated_interval_measure(spec: &SpectrumEstimate, a: f64, b: f64) -> Result<f64> {
    let (min, max) = (spec.frequency(0), spec.frequency(spec.len() - 1));
    if a < min || b > max || a > b {
        return Err(Error::OutOfRange { a, b, min, max });
    }
    let bins = spec.bins_in(a, b);
    Ok(spec.bin_width() * spec.power()[bins].iter().sum::<f64>())
}

/// How the true-density term of the error statistic is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueTerm {
    /// Riemann sum of the density at the same bin centers.
    #[default]
    BinCenters,
    /// Exact integral of the density over each neighborhood.
    ExactIntegral,
}

/// Averaged neighborhood error between the estimated and true measures.
pub fn delta_stat(
    spec: &SpectrumEstimate,
    func: &AnalyticFunction,
    nbs: &NeighborhoodSet,
    term: TrueTerm,
) -> Result<f64> {
    match term {
        TrueTerm::BinCenters => delta_stat_with(spec, nbs, |u| truth::density(func, u)),
        TrueTerm::ExactIntegral => {
            let per = |j: usize| -> Result<f64> {
                let (a, b) = nbs.interval(j);
                let est = neighborhood_sum(spec, nbs, j, |_| Ok(0.0))?;
                Ok((est - truth::true_interval_measure(func, a, b)?).abs())
            };
            let mut total = 0.0;
            for j in 0..nbs.len() {
                total += per(j)?;
            }
            Ok(total / nbs.len() as f64)
        }
    }
}

/// Error statistic against an arbitrary reference density sampled at bin
/// centers.
pub fn delta_stat_with(
    spec: &SpectrumEstimate,
    nbs: &NeighborhoodSet,
    density: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if nbs.is_empty() {
        return Err(Error::Config("no neighborhoods to average over".into()));
    }
    let mut total = 0.0;
    for j in 0..nbs.len() {
        total += neighborhood_sum(spec, nbs, j, &density)?.abs();
    }
    Ok(total / nbs.len() as f64)
}

fn neighborhood_sum(
    spec: &SpectrumEstimate,
    nbs: &NeighborhoodSet,
    j: usize,
    density: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let (a, b) = nbs.interval(j);
    let (min, max) = (spec.frequency(0), spec.frequency(spec.len() - 1));
    if a < min || b > max {
        return Err(Error::OutOfRange { a, b, min, max });
    }
    let bins = spec.bins_in(a, b);
    if bins.is_empty() {
        return Err(Error::DegenerateNeighborhood {
            center: nbs.centers[j],
        });
    }
    let power = spec.power();
    let mut sum = 0.0;
    for k in bins {
        sum += power[k] - density(spec.frequency(k))?;
    }
    Ok(spec.bin_width() * sum)
}

/// One sweep row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    pub delta: f64,
    /// Set when `tau` is below the lower bound for this `N`.
    #[serde(skip)]
    pub below_bound: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    N,
    Tau,
}

/// Result of an `N` or `tau` sweep.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRecord {
    pub kind: SweepKind,
    pub rows: Vec<ConvergenceRow>,
    /// Log-log fit against `N`, or linear fit against `tau`.
    pub fit: Option<LineFit>,
    pub config: Value,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    slope: Option<f64>,
    intercept: Option<f64>,
    r2: Option<f64>,
    n_points: usize,
    slope_ci95: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    halving_ratios: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    argmin_tau: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    below_bound_taus: Vec<f64>,
    config: &'a Value,
}

impl ConvergenceRecord {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    /// `delta(N_{i+1}) / delta(N_i)` for consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].delta / w[0].delta).collect()
    }

    /// Row with the smallest error.
    pub fn argmin(&self) -> Option<usize> {
        (0..self.rows.len()).min_by(|&a, &b| self.rows[a].delta.total_cmp(&self.rows[b].delta))
    }

    /// Writes `N,tau,delta` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the fit summary as pretty JSON.
    pub fn write_fit_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let summary = FitSummary {
            slope: self.fit.map(|f| f.slope),
            intercept: self.fit.map(|f| f.intercept),
            r2: self.fit.map(|f| f.r2),
            n_points: self.rows.len(),
            slope_ci95: self.fit.and_then(|f| f.slope_ci95),
            note: self
                .fit
                .is_none()
                .then_some("slope undefined: fewer than two usable rows"),
            halving_ratios: match self.kind {
                SweepKind::N => self.ratios(),
                SweepKind::Tau => Vec::new(),
            },
            argmin_tau: match self.kind {
                SweepKind::Tau => self.argmin().map(|i| self.rows[i].tau),
                SweepKind::N => None,
            },
            below_bound_taus: self
                .rows
                .iter()
                .filter(|r| r.below_bound)
                .map(|r| r.tau)
                .collect(),
            config: &self.config,
        };
        serde_json::to_writer_pretty(&mut writer, &summary)?;
        writeln!(writer)?;
        Ok(())
    }
}

/// Shared sweep settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub k: usize,
    pub alpha: Option<f64>,
    /// Margin around `+-B` and the critical values; defaults to the function's.
    pub eps_c: Option<f64>,
    pub term: TrueTerm,
}

impl SweepOptions {
    fn neighborhoods(&self, func: &AnalyticFunction) -> Result<NeighborhoodSet> {
        let eps = self.eps_c.unwrap_or_else(|| func.exclusion_margin());
        NeighborhoodSet::for_function_with_margin(func, self.k, self.alpha, eps)
    }
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            k: 255,
            alpha: None,
            eps_c: None,
            term: TrueTerm::BinCenters,
        }
    }
}

fn delta_at(
    func: &AnalyticFunction,
    nbs: &NeighborhoodSet,
    n: usize,
    tau: f64,
    term: TrueTerm,
) -> Result<ConvergenceRow> {
    let floor = tau_lower_bound(func.bound(), func.length(), n)?;
    let below_bound = tau < floor * (1.0 - 1e-12);
    let spec = estimate(&sample(func, n)?, tau)?;
    let delta = if below_bound {
        let usable = nbs.restricted_to(spec.frequency(0), spec.frequency(n - 1));
        if usable.is_empty() {
            return Err(Error::OutOfRange {
                a: nbs.interval(0).0,
                b: nbs.interval(nbs.len() - 1).1,
                min: spec.frequency(0),
                max: spec.frequency(n - 1),
            });
        }
        delta_stat(&spec, func, &usable, term)?
    } else {
        delta_stat(&spec, func, nbs, term)?
    };
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::Invariant(format!(
            "error statistic {delta} at N = {n}, tau = {tau} is not a finite nonnegative number"
        )));
    }
    Ok(ConvergenceRow {
        n,
        tau,
        delta,
        below_bound,
    })
}

fn check_even(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::Sizing {
            n,
            reason: "sample counts must be even and at least 4",
        });
    }
    Ok(())
}

/// Error statistic for each `N` with `tau` at its lower bound.
pub fn n_sweep(
    func: &AnalyticFunction,
    ns: &[usize],
    opts: SweepOptions,
) -> Result<ConvergenceRecord> {
    n_sweep_with_progress(func, ns, opts, |_| {})
}

/// [`n_sweep`] that reports each finished row.
pub fn n_sweep_with_progress(
    func: &AnalyticFunction,
    ns: &[usize],
    opts: SweepOptions,
    progress: impl Fn(&ConvergenceRow) + Sync,
) -> Result<ConvergenceRecord> {
    if ns.is_empty() {
        return Err(Error::Config("N list is empty".into()));
    }
    for &n in ns {
        check_even(n)?;
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("N list must be strictly ascending".into()));
    }
    let nbs = opts.neighborhoods(func)?;
    let rows = ns
        .par_iter()
        .map(|&n| {
            let tau = tau_lower_bound(func.bound(), func.length(), n)?;
            let row = delta_at(func, &nbs, n, tau, opts.term)?;
            progress(&row);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let fit = log_log_fit(&x, &rows.iter().map(|r| r.delta).collect::<Vec<_>>());
    Ok(ConvergenceRecord {
        kind: SweepKind::N,
        rows,
        fit,
        config: json!({
            "command": "converge",
            "function": func.name(),
            "Ns": ns,
            "K": opts.k,
            "K_used": nbs.len(),
            "alpha": nbs.half_width(),
            "eps_C": opts.eps_c.unwrap_or_else(|| func.exclusion_margin()),
            "B": func.bound(),
            "true_term": opts.term,
        }),
    })
}

/// `n` values of `tau` spaced logarithmically from `hi` down to `lo`.
pub fn log_spaced_descending(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| match i {
            0 => hi,
            i if i == n - 1 => lo,
            i => (lh + (ll - lh) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Error statistic at fixed `N0` for each `tau`.
pub fn tau_sweep(
    func: &AnalyticFunction,
    n0: usize,
    taus: &[f64],
    opts: SweepOptions,
) -> Result<ConvergenceRecord> {
    tau_sweep_with_progress(func, n0, taus, opts, |_| {})
}

/// [`tau_sweep`] that reports each finished row.
pub fn tau_sweep_with_progress(
    func: &AnalyticFunction,
    n0: usize,
    taus: &[f64],
    opts: SweepOptions,
    progress: impl Fn(&ConvergenceRow) + Sync,
) -> Result<ConvergenceRecord> {
    check_even(n0)?;
    if taus.is_empty() {
        return Err(Error::Config("tau list is empty".into()));
    }
    if let Some(&t) = taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Parameter {
            name: "tau",
            value: t,
            reason: "must be positive and finite",
        });
    }
    if taus.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Config("tau list must be strictly descending".into()));
    }
    let nbs = opts.neighborhoods(func)?;
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let row = delta_at(func, &nbs, n0, tau, opts.term)?;
            progress(&row);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<&ConvergenceRow> = rows.iter().filter(|r| !r.below_bound).collect();
    let fit = linear_fit(
        &usable.iter().map(|r| r.tau).collect::<Vec<_>>(),
        &usable.iter().map(|r| r.delta).collect::<Vec<_>>(),
    );
    Ok(ConvergenceRecord {
        kind: SweepKind::Tau,
        rows,
        fit,
        config: json!({
            "command": "tausweep",
            "function": func.name(),
            "N0": n0,
            "taus": taus,
            "tau_lower_bound": tau_lower_bound(func.bound(), func.length(), n0)?,
            "K": opts.k,
            "K_used": nbs.len(),
            "alpha": nbs.half_width(),
            "eps_C": opts.eps_c.unwrap_or_else(|| func.exclusion_margin()),
            "B": func.bound(),
            "true_term": opts.term,
        }),
    })
}
