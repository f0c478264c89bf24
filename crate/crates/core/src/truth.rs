//! Ground-truth derivative densities.
//!
//! For `X ~ U[0, L]` the density of `s(X)` at `u` is
//! `(1/L) * sum_m 1 / |S''(x_m)|` over the roots `x_m` of `s(x) = u`.
//! Roots are found by scanning a uniform grid for sign changes and refining
//! each bracket by bisection.

use crate::error::{Error, Result};
use crate::functions::AnalyticFunction;

/// Default scan resolution for [`find_roots`].
pub const DEFAULT_GRID: usize = 100_000;

/// Smallest scan resolution accepted by [`find_roots`].
pub const MIN_GRID: usize = 1_000;

/// Pre-image of a derivative value.
#[derive(Clone, Debug, PartialEq)]
pub struct RootSet {
    pub u: f64,
    pub roots: Vec<f64>,
    pub curvature_at_roots: Vec<f64>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

fn check_admissible(func: &AnalyticFunction, u: f64) -> Result<()> {
    let margin = func.exclusion_margin();
    match func.near_critical(u, margin) {
        Some(singular) => Err(Error::NearSingular { u, singular, margin }),
        None => Ok(()),
    }
}

/// All `x` in `[0, L]` with `s(x) = u`.
pub fn find_roots(func: &AnalyticFunction, u: f64, grid_size: usize) -> Result<RootSet> {
    check_admissible(func, u)?;
    if grid_size < MIN_GRID {
        return Err(Error::Parameter {
            name: "grid_size",
            value: grid_size as f64,
            reason: "root scan needs at least 1000 grid points",
        });
    }
    let tol = 1e-12 * (1.0 + u.abs());
    let length = func.length();
    let step = length / (grid_size - 1) as f64;
    let g = |x: f64| func.slope(x) - u;

    let mut roots = Vec::new();
    let mut x0 = 0.0;
    let mut g0 = g(x0);
    for i in 1..grid_size {
        let x1 = if i == grid_size - 1 { length } else { i as f64 * step };
        let g1 = g(x1);
        if g0 == 0.0 {
            roots.push(x0);
        } else if g0 * g1 < 0.0 {
            roots.push(bisect(&g, x0, x1, g0, tol, u, func)?);
        }
        x0 = x1;
        g0 = g1;
    }
    if g0 == 0.0 {
        roots.push(x0);
    }

    let curvature_at_roots: Vec<f64> = roots.iter().map(|&x| func.curvature(x)).collect();
    for (&x, &spp) in roots.iter().zip(&curvature_at_roots) {
        if spp == 0.0 || !spp.is_finite() {
            return Err(Error::SingularRoot { u, x, spp });
        }
    }
    Ok(RootSet {
        u,
        roots,
        curvature_at_roots,
    })
}

fn bisect(
    g: &impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut g_lo: f64,
    tol: f64,
    u: f64,
    func: &AnalyticFunction,
) -> Result<f64> {
    loop {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid.abs() <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            // Bracket collapsed to adjacent floats without meeting the
            // tolerance: s is too flat here to pin the root down.
            return Err(Error::SingularRoot {
                u,
                x: mid,
                spp: func.curvature(mid),
            });
        }
        if (g_lo < 0.0) == (g_mid < 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
}

/// Density of `s(X)` at `u` by root enumeration.
pub fn density_bruteforce(func: &AnalyticFunction, u: f64, grid_size: usize) -> Result<f64> {
    let roots = find_roots(func, u, grid_size)?;
    Ok(roots
        .curvature_at_roots
        .iter()
        .map(|c| 1.0 / c.abs())
        .sum::<f64>()
        / func.length())
}

/// Closed-form density when the catalog has one, root enumeration otherwise.
pub fn density(func: &AnalyticFunction, u: f64) -> Result<f64> {
    match func.closed_form_density(u) {
        Some(d) => Ok(d),
        None => density_bruteforce(func, u, DEFAULT_GRID),
    }
}

/// Absolute tolerance of [`true_interval_measure`].
pub const MEASURE_TOLERANCE: f64 = 1e-9;

/// `integral_a^b P(u) du` for the true density.
pub fn true_interval_measure(func: &AnalyticFunction, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::Parameter {
            name: "b",
            value: b,
            reason: "interval must have a < b",
        });
    }
    let bound = func.bound();
    if a <= -bound || b >= bound {
        return Err(Error::Config(format!(
            "interval [{a}, {b}] must lie inside (-B, B) = ({}, {bound})",
            -bound
        )));
    }
    let margin = func.exclusion_margin();
    for &c in func.critical_values() {
        if c > a - margin && c < b + margin {
            let u = if c < a { a } else if c > b { b } else { c };
            return Err(Error::NearSingular {
                u,
                singular: c,
                margin,
            });
        }
    }
    let f = |u: f64| density(func, u);
    adaptive_simpson(&f, a, b, MEASURE_TOLERANCE)
}

fn adaptive_simpson(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
