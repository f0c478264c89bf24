//! Continuous scaled Fourier transform of the windowed wave function, and the
//! identities that tie it to the discrete spectrum.
//!
//! The integrand is `H(x) exp(i S(x) / tau) / sqrt(L)` on `[rho1, rho2]`,
//! with `rho1 = -delta/2`, `rho2 = L + delta/2`, `H` the trapezoid window and
//! `S` continued linearly past the domain ends. Integrals use composite
//! Simpson on a grid that puts nodes on `rho1`, `0`, `L` and `rho2`, with a
//! step small enough that the phase advances less than 0.05 rad per step.
//! Every result is recomputed at half the step and rejected if it moves by
//! more than [`QUADRATURE_TOLERANCE`].

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::functions::{builtin_quadratic, builtin_sine, sample, AnalyticFunction, SampledFunction};
use crate::spectrum::{estimate, tau_lower_bound};
use crate::truth;

/// Upper limit on Simpson panels for the refined pass.
pub const MAX_PANELS: usize = 1 << 22;

/// Largest change allowed between the two quadrature resolutions.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

/// Largest sample count accepted by the Poisson residual.
pub const POISSON_MAX_N: usize = 256;

/// Default number of aliasing terms on each side.
pub const DEFAULT_L_MAX: usize = 50;

/// Step is at most `tau / (STEP_DIVISOR (B + |u|))`.
const STEP_DIVISOR: f64 = 20.0;

/// The windowed wave function for a given `N` and `tau`.
#[derive(Clone, Debug)]
pub struct WindowedIntegrand<'a> {
    func: &'a AnalyticFunction,
    n: usize,
    tau: f64,
    delta: f64,
}

impl<'a> WindowedIntegrand<'a> {
    pub fn new(func: &'a AnalyticFunction, n: usize, tau: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Sizing {
                n,
                reason: "sample counts must be even and at least 4",
            });
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Parameter {
                name: "tau",
                value: tau,
                reason: "tau must be positive",
            });
        }
        Ok(Self {
            func,
            n,
            tau,
            delta: func.length() / n as f64,
        })
    }

    pub fn function(&self) -> &AnalyticFunction {
        self.func
    }
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn rho1(&self) -> f64 {
        -0.5 * self.delta
    }
    pub fn rho2(&self) -> f64 {
        self.func.length() + 0.5 * self.delta
    }

    /// The trapezoid window.
    pub fn window(&self, x: f64) -> f64 {
        let l = self.func.length();
        let ramp = 0.5 * self.delta;
        if x <= self.rho1() || x >= self.rho2() {
            0.0
        } else if x < 0.0 {
            (x + ramp) / ramp
        } else if x > l {
            (l + ramp - x) / ramp
        } else {
            1.0
        }
    }

    /// `H(x) exp(i S(x) / tau) / sqrt(L)`.
    pub fn wave(&self, x: f64) -> Complex64 {
        let (sin, cos) = (self.func.value_extended(x) / self.tau).sin_cos();
        Complex64::new(cos, sin) * (self.window(x) / self.func.length().sqrt())
    }

    /// Frequency spacing of the discrete spectrum, `2 pi tau / L`.
    pub fn bin_width(&self) -> f64 {
        2.0 * PI * self.tau / self.func.length()
    }

    /// Alias offset `gamma_l = 2 pi tau l / delta`.
    pub fn gamma(&self, l: i64) -> f64 {
        2.0 * PI * self.tau * l as f64 / self.delta
    }

    /// Panels over `[0, L]` resolving frequencies up to `u_max`; a power of two
    /// and a multiple of `4N`, so each ramp holds an even number of panels.
    fn panels_for(&self, u_max: f64) -> Result<usize> {
        let h_max = self.tau / (STEP_DIVISOR * (self.func.bound() + u_max));
        let mut m = (4 * self.n).next_power_of_two();
        while self.func.length() / m as f64 > h_max {
            m *= 2;
            if 2 * m > MAX_PANELS {
                break;
            }
        }
        if 2 * m > MAX_PANELS {
            let needed = ((self.func.length() / h_max).ceil() as usize).next_power_of_two() * 2;
            return Err(Error::Infeasible {
                needed: needed.max(2 * m),
                limit: MAX_PANELS,
            });
        }
        Ok(m)
    }

    /// Nodes `x_j = rho1 + j h` with Simpson weight times window.
    fn weighted_nodes(&self, m: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let h = self.func.length() / m as f64;
        let total = m + m / self.n;
        let rho1 = self.rho1();
        let ramp_panels = m / (2 * self.n);
        (0..=total).map(move |j| {
            let x = if j == ramp_panels {
                0.0
            } else if j == ramp_panels + m {
                self.func.length()
            } else {
                rho1 + j as f64 * h
            };
            let w = if j == 0 || j == total {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (j, x, w * h / 3.0 * self.window(x))
        })
    }

    fn normalization(&self) -> f64 {
        1.0 / (2.0 * PI * self.tau * self.func.length()).sqrt()
    }

    fn simpson_at(&self, u: f64, m: usize) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for (_, x, w) in self.weighted_nodes(m) {
            if w == 0.0 {
                continue;
            }
            let (sin, cos) = ((self.func.value_extended(x) - u * x) / self.tau).sin_cos();
            sum += Complex64::new(cos, sin) * w;
        }
        sum * self.normalization()
    }

    /// `F(u0 + m * 2 pi tau / (P L))` for each `m`, from one FFT per resolution.
    fn lattice_at(&self, u0: f64, oversample: usize, ms: &[i64], panels: usize) -> Vec<Complex64> {
        let q = oversample * panels;
        let mut buf = vec![Complex64::new(0.0, 0.0); q];
        for (j, x, w) in self.weighted_nodes(panels) {
            if w == 0.0 {
                continue;
            }
            let (sin, cos) = ((self.func.value_extended(x) - u0 * x) / self.tau).sin_cos();
            buf[j % q] += Complex64::new(cos, sin) * w;
        }
        FftPlanner::<f64>::new().plan_fft_forward(q).process(&mut buf);
        let norm = self.normalization();
        let rho1 = self.rho1();
        let period = oversample as f64 * self.func.length();
        ms.iter()
            .map(|&m| {
                // x_j = rho1 + j h: pull the rho1 phase out of the FFT sum
                let (sin, cos) = (-2.0 * PI * (m as f64) * rho1 / period).sin_cos();
                buf[m.rem_euclid(q as i64) as usize] * Complex64::new(cos, sin) * norm
            })
            .collect()
    }
}

fn settled(coarse: Complex64, fine: Complex64) -> Result<Complex64> {
    let change = (fine - coarse).norm();
    if change.is_finite() && change < QUADRATURE_TOLERANCE {
        Ok(fine)
    } else {
        Err(Error::QuadratureUnsettled {
            change,
            limit: QUADRATURE_TOLERANCE,
        })
    }
}

/// `F_tau(u) = (1/sqrt(2 pi tau)) integral H(x) exp(i (S(x) - u x) / tau) / sqrt(L) dx`.
pub fn quadrature_scaled_ft(wi: &WindowedIntegrand, u: f64) -> Result<Complex64> {
    let m = wi.panels_for(u.abs())?;
    settled(wi.simpson_at(u, m), wi.simpson_at(u, 2 * m))
}

/// Continuous transform on the lattice `u0 + m * 2 pi tau / (P L)`.
///
/// Equivalent to calling [`quadrature_scaled_ft`] at each point, at the cost
/// of two FFTs.
pub fn lattice_scaled_ft(
    wi: &WindowedIntegrand,
    u0: f64,
    oversample: usize,
    ms: &[i64],
) -> Result<Vec<Complex64>> {
    if oversample == 0 {
        return Err(Error::Parameter {
            name: "oversample",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if ms.is_empty() {
        return Ok(Vec::new());
    }
    let spacing = wi.bin_width() / oversample as f64;
    let (lo, hi) = (*ms.iter().min().unwrap(), *ms.iter().max().unwrap());
    let u_max = (u0 + lo as f64 * spacing).abs().max((u0 + hi as f64 * spacing).abs());
    let mut m = wi.panels_for(u_max)?;
    while ((oversample * m) as i64) <= hi - lo {
        m *= 2;
    }
    if 2 * m > MAX_PANELS {
        return Err(Error::Infeasible {
            needed: 2 * m,
            limit: MAX_PANELS,
        });
    }
    let coarse = wi.lattice_at(u0, oversample, ms, m);
    let fine = wi.lattice_at(u0, oversample, ms, 2 * m);
    coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| settled(c, f))
        .collect()
}

/// Partial aliasing series at one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AliasingSum {
    /// `sum_{0 < |l| <= l_max} (-1)^l F_tau(u - gamma_l)`.
    #[serde(serialize_with = "ser_complex")]
    pub sum: Complex64,
    /// Estimated magnitude of the omitted terms.
    pub tail_estimate: f64,
    pub l_max: usize,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

fn alias_offsets(l_max: usize) -> Vec<i64> {
    let l = l_max as i64;
    (-l..=l).filter(|&v| v != 0).collect()
}

/// `(-1)^l`: the half-sample grid `y_n = (n + 1/2) delta` gives each alias a
/// phase `exp(-i gamma_l delta / (2 tau)) = (-1)^l`.
fn alias_sign(l: i64) -> f64 {
    if l % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Tail of the `1/l^2` envelope `c sqrt(tau) / (B (|l| - 1) + beta)^2`, with
/// `c` fitted to the largest computed terms.
fn tail_estimate(wi: &WindowedIntegrand, terms: &[(i64, Complex64)], l_max: usize) -> f64 {
    let b = wi.func.bound();
    let beta = wi.func.beta();
    let sqrt_tau = wi.tau.sqrt();
    let lo = (l_max as i64 / 2).max(2);
    let c = terms
        .iter()
        .filter(|(l, _)| l.abs() >= lo)
        .map(|(l, f)| f.norm() * (b * (l.abs() - 1) as f64 + beta).powi(2) / sqrt_tau)
        .fold(0.0, f64::max);
    // sum_{l > l_max} g(l) <= integral_{l_max}^inf g for decreasing g, both signs
    2.0 * c * sqrt_tau / (b * (b * (l_max as f64 - 1.0) + beta))
}

fn check_l_max(l_max: usize) -> Result<()> {
    if l_max == 0 {
        return Err(Error::Parameter {
            name: "l_max",
            value: 0.0,
            reason: "need at least one alias on each side",
        });
    }
    Ok(())
}

/// Aliasing series at an arbitrary frequency.
pub fn aliasing_sum(wi: &WindowedIntegrand, u: f64, l_max: usize) -> Result<AliasingSum> {
    check_l_max(l_max)?;
    let ls = alias_offsets(l_max);
    // gamma_l = l N * (2 pi tau / L): alias l sits at lattice index -l N around u
    let ms: Vec<i64> = ls.iter().map(|l| -l * wi.n as i64).collect();
    let values = lattice_scaled_ft(wi, u, 1, &ms)?;
    let terms: Vec<(i64, Complex64)> = ls.into_iter().zip(values).collect();
    Ok(AliasingSum {
        sum: terms.iter().map(|(l, f)| f * alias_sign(*l)).sum(),
        tail_estimate: tail_estimate(wi, &terms, l_max),
        l_max,
    })
}

/// One bin of the Poisson identity check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PoissonBin {
    pub k: usize,
    pub u: f64,
    #[serde(serialize_with = "ser_complex")]
    pub discrete: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub continuous: Complex64,
    pub aliasing: AliasingSum,
    /// `|F^D(u_k) - F_tau(u_k) - aliasing|`.
    pub residual: f64,
}

impl PoissonBin {
    /// Residual relative to `1 + |F^D(u_k)|`.
    pub fn relative_residual(&self) -> f64 {
        self.residual / (1.0 + self.discrete.norm())
    }
}

fn check_poisson_inputs(
    samples: &SampledFunction,
    func: &AnalyticFunction,
    tau: f64,
    l_max: usize,
) -> Result<()> {
    let n = samples.len();
    if n > POISSON_MAX_N {
        // report the resolution problem when that is what rules N out
        let wi = WindowedIntegrand::new(func, n, tau)?;
        wi.panels_for(wi.gamma(l_max as i64 + 1))?;
        return Err(Error::Sizing {
            n,
            reason: "the Poisson check is limited to N <= 256",
        });
    }
    if (samples.length() - func.length()).abs() > 1e-12 * func.length() {
        return Err(Error::Config(format!(
            "samples cover length {} but the function has length {}",
            samples.length(),
            func.length()
        )));
    }
    Ok(())
}

/// Poisson identity residual at every bin.
pub fn poisson_residuals(
    samples: &SampledFunction,
    func: &AnalyticFunction,
    tau: f64,
    l_max: usize,
) -> Result<Vec<PoissonBin>> {
    check_l_max(l_max)?;
    check_poisson_inputs(samples, func, tau, l_max)?;
    let n = samples.len();
    let spec = estimate(samples, tau)?;
    let wi = WindowedIntegrand::new(func, n, tau)?;
    let ls = alias_offsets(l_max);
    let half = (n / 2) as i64;
    let ni = n as i64;
    let mut ms = Vec::with_capacity(n * (2 * l_max + 1));
    for k in 0..ni {
        ms.push(k - half);
        ms.extend(ls.iter().map(|l| k - half - l * ni));
    }
    let values = lattice_scaled_ft(&wi, 0.0, 1, &ms)?;
    let stride = 2 * l_max + 1;
    Ok((0..n)
        .map(|k| {
            let row = &values[k * stride..(k + 1) * stride];
            let continuous = row[0];
            let terms: Vec<(i64, Complex64)> = ls.iter().copied().zip(row[1..].iter().copied()).collect();
            let aliasing = AliasingSum {
                sum: terms.iter().map(|(l, f)| f * alias_sign(*l)).sum(),
                tail_estimate: tail_estimate(&wi, &terms, l_max),
                l_max,
            };
            let discrete = spec.amplitudes()[k];
            PoissonBin {
                k,
                u: spec.frequency(k),
                discrete,
                continuous,
                aliasing,
                residual: (discrete - continuous - aliasing.sum).norm(),
            }
        })
        .collect())
}

/// Poisson identity residual at bin `k`.
pub fn poisson_residual(
    samples: &SampledFunction,
    func: &AnalyticFunction,
    tau: f64,
    k: usize,
    l_max: usize,
) -> Result<f64> {
    check_l_max(l_max)?;
    check_poisson_inputs(samples, func, tau, l_max)?;
    let n = samples.len();
    if k >= n {
        return Err(Error::Parameter {
            name: "k",
            value: k as f64,
            reason: "bin index must be below N",
        });
    }
    let spec = estimate(samples, tau)?;
    let wi = WindowedIntegrand::new(func, n, tau)?;
    let u = spec.frequency(k);
    let continuous = quadrature_scaled_ft(&wi, u)?;
    let aliasing = aliasing_sum(&wi, u, l_max)?;
    Ok((spec.amplitudes()[k] - continuous - aliasing.sum).norm())
}

/// Leading stationary-phase approximation of `F_tau(u)`.
pub fn stationary_phase_main_term(func: &AnalyticFunction, tau: f64, u: f64) -> Result<Complex64> {
    let roots = truth::find_roots(func, u, truth::DEFAULT_GRID)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for (&x, &spp) in roots.roots.iter().zip(&roots.curvature_at_roots) {
        let phase = (func.value(x) - u * x) / tau + spp.signum() * PI / 4.0;
        let (sin, cos) = phase.sin_cos();
        sum += Complex64::new(cos, sin) / spp.abs().sqrt();
    }
    Ok(sum / func.length().sqrt())
}

/// Nearest frequency to `target` of the form `(S(L) - S(0))/L + j 2 pi tau0 / L`.
///
/// On this lattice the two boundary contributions to the transform keep the
/// same relative phase at `tau0 / 2^q`, so halving sequences are not polluted
/// by boundary interference.
pub fn lock_to_boundary_lattice(func: &AnalyticFunction, tau0: f64, target: f64) -> f64 {
    let l = func.length();
    let step = 2.0 * PI * tau0 / l;
    let base = (func.value(l) - func.value(0.0)) / l;
    base + ((target - base) / step).round() * step
}

/// Phase gap `T(x2) - T(x1)`, `T(x) = S(x) - e x`, between the two roots of
/// `s(x) = e`, and their separation.
fn cross_phase(func: &AnalyticFunction, e: f64) -> Result<Option<(f64, f64)>> {
    let r = truth::find_roots(func, e, truth::DEFAULT_GRID)?;
    if r.len() != 2 {
        return Ok(None);
    }
    let t = |x: f64| func.value(x) - e * x;
    Ok(Some((t(r.roots[1]) - t(r.roots[0]), r.roots[1] - r.roots[0])))
}

/// Moves `e` so that the two-root phase gap is a multiple of `2 pi tau0`.
/// Frequencies with other root counts are returned unchanged.
pub fn lock_cross_phase(func: &AnalyticFunction, tau0: f64, e: f64) -> Result<f64> {
    let mut e = e;
    let period = 2.0 * PI * tau0;
    let Some((phi, _)) = cross_phase(func, e)? else {
        return Ok(e);
    };
    let target = period * (phi / period).round();
    for _ in 0..60 {
        let Some((phi, gap)) = cross_phase(func, e)? else {
            break;
        };
        let miss = phi - target;
        if miss.abs() <= 1e-13 * (1.0 + target.abs()) {
            break;
        }
        // d(phase gap)/de = -(x2 - x1)
        e += miss / gap;
    }
    Ok(e)
}

/// A scale-free decay check over successive halvings of `tau`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayCheck {
    pub name: String,
    /// Frequency (or interval endpoints) actually probed.
    pub probe: Vec<f64>,
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    pub ratios: Vec<f64>,
    pub band: (f64, f64),
}

impl DecayCheck {
    fn new(name: String, probe: Vec<f64>, ns: Vec<usize>, values: Vec<f64>, band: (f64, f64)) -> Self {
        let ratios = values.windows(2).map(|w| w[1] / w[0]).collect();
        Self {
            name,
            probe,
            ns,
            values,
            ratios,
            band,
        }
    }

    pub fn pass(&self) -> bool {
        !self.ratios.is_empty()
            && self
                .ratios
                .iter()
                .all(|r| r.is_finite() && *r >= self.band.0 && *r <= self.band.1)
    }
}

fn doubling(n0: usize, halvings: usize) -> Vec<usize> {
    (0..=halvings).map(|q| n0 << q).collect()
}

fn tau_at(func: &AnalyticFunction, n: usize) -> Result<f64> {
    tau_lower_bound(func.bound(), func.length(), n)
}

/// Ratio band for the transform magnitude away from stationary points.
pub const NO_STATIONARY_BAND: (f64, f64) = (0.4, 0.6);
/// Ratio band for the stationary-phase remainder.
pub const STATIONARY_RESIDUAL_BAND: (f64, f64) = (0.6, 0.82);
/// Ratio band for the neighborhood-integrated power error.
pub const CROSS_TERM_BAND: (f64, f64) = (0.35, 0.7);

/// `|F_tau(u)| sqrt(2 pi tau L)` for a frequency outside the range of `s`,
/// with `tau` at its lower bound for `N = n0, 2 n0, ...`.
pub fn no_stationary_decay(
    func: &AnalyticFunction,
    u: f64,
    n0: usize,
    halvings: usize,
) -> Result<DecayCheck> {
    if u.abs() <= func.bound() {
        return Err(Error::Config(format!(
            "u = {u} must lie outside [-B, B] = [-{b}, {b}] to avoid stationary points",
            b = func.bound()
        )));
    }
    let ns = doubling(n0, halvings);
    let values = ns
        .par_iter()
        .map(|&n| {
            let tau = tau_at(func, n)?;
            let wi = WindowedIntegrand::new(func, n, tau)?;
            let f = quadrature_scaled_ft(&wi, u)?;
            Ok(f.norm() * (2.0 * PI * tau * func.length()).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayCheck::new(
        format!("no_stationary/{}/u={u}", func.name()),
        vec![u],
        ns,
        values,
        NO_STATIONARY_BAND,
    ))
}

/// `|F_tau(u) - main term|` at a lattice-locked frequency near `target`.
pub fn stationary_residual_decay(
    func: &AnalyticFunction,
    target: f64,
    n0: usize,
    halvings: usize,
) -> Result<DecayCheck> {
    let u = lock_to_boundary_lattice(func, tau_at(func, n0)?, target);
    let ns = doubling(n0, halvings);
    let values = ns
        .par_iter()
        .map(|&n| {
            let tau = tau_at(func, n)?;
            let wi = WindowedIntegrand::new(func, n, tau)?;
            let f = quadrature_scaled_ft(&wi, u)?;
            Ok((f - stationary_phase_main_term(func, tau, u)?).norm())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayCheck::new(
        format!("stationary_residual/{}/u={target}", func.name()),
        vec![u],
        ns,
        values,
        STATIONARY_RESIDUAL_BAND,
    ))
}

/// `|integral_a^b (|F_tau(u)|^2 - P(u)) du|` by the trapezoid rule on a grid
/// `oversample` times finer than the bin spacing, with the endpoints locked
/// so the cross term completes whole periods at `tau0`.
pub fn cross_term_decay(
    func: &AnalyticFunction,
    a: f64,
    b: f64,
    n0: usize,
    halvings: usize,
    oversample: usize,
) -> Result<DecayCheck> {
    if !(a < b) {
        return Err(Error::Parameter {
            name: "b",
            value: b,
            reason: "interval must have a < b",
        });
    }
    let tau0 = tau_at(func, n0)?;
    let (ea, eb) = (lock_cross_phase(func, tau0, a)?, lock_cross_phase(func, tau0, b)?);
    truth::true_interval_measure(func, ea, eb)?;
    let ns = doubling(n0, halvings);
    let values = ns
        .par_iter()
        .map(|&n| {
            let tau = tau_at(func, n)?;
            let wi = WindowedIntegrand::new(func, n, tau)?;
            let du = wi.bin_width() / oversample as f64;
            let (m1, m2) = ((ea / du).round() as i64, (eb / du).round() as i64);
            let ms: Vec<i64> = (m1..=m2).collect();
            let fs = lattice_scaled_ft(&wi, 0.0, oversample, &ms)?;
            let mut total = 0.0;
            for (i, (&m, f)) in ms.iter().zip(&fs).enumerate() {
                let w = if i == 0 || i == ms.len() - 1 { 0.5 } else { 1.0 };
                total += w * (f.norm_sqr() - truth::density(func, m as f64 * du)?);
            }
            Ok((total * du).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayCheck::new(
        format!("cross_term/{}/[{a},{b}]", func.name()),
        vec![ea, eb],
        ns,
        values,
        CROSS_TERM_BAND,
    ))
}

/// One line of the verification report.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyEntry {
    pub name: String,
    pub measured: Vec<f64>,
    pub threshold: Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_estimate: Option<f64>,
    pub details: Value,
}

impl From<DecayCheck> for VerifyEntry {
    fn from(c: DecayCheck) -> Self {
        Self {
            pass: c.pass(),
            name: c.name,
            measured: c.ratios,
            threshold: json!([c.band.0, c.band.1]),
            tail_estimate: None,
            details: json!({ "probe": c.probe, "N": c.ns, "values": c.values }),
        }
    }
}

/// Relative residual bound for the Poisson identity.
pub const POISSON_TOLERANCE: f64 = 1e-3;

/// Poisson identity summary for a builtin at the lower-bound `tau`.
pub fn poisson_entry(func: &AnalyticFunction, n: usize, l_max: usize) -> Result<VerifyEntry> {
    let tau = tau_at(func, n)?;
    let bins = poisson_residuals(&sample(func, n)?, func, tau, l_max)?;
    let worst = bins.iter().map(PoissonBin::relative_residual).fold(0.0, f64::max);
    let tail = bins.iter().map(|b| b.aliasing.tail_estimate).fold(0.0, f64::max);
    Ok(VerifyEntry {
        name: format!("poisson/{}/N={n}", func.name()),
        measured: vec![worst],
        threshold: json!(POISSON_TOLERANCE),
        pass: worst <= POISSON_TOLERANCE,
        tail_estimate: Some(tail),
        details: json!({ "tau": tau, "l_max": l_max, "max_abs_residual":
            bins.iter().map(|b| b.residual).fold(0.0, f64::max) }),
    })
}

/// Settings for [`verify_all`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyOptions {
    pub l_max: usize,
    pub halvings: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            l_max: DEFAULT_L_MAX,
            halvings: 4,
        }
    }
}

/// The standard battery of transform checks on the two builtins.
pub fn verify_all(opts: VerifyOptions) -> Result<Vec<VerifyEntry>> {
    verify_with_progress(opts, |_| {})
}

/// [`verify_all`] reporting each entry as it finishes.
pub fn verify_with_progress(
    opts: VerifyOptions,
    progress: impl Fn(&VerifyEntry),
) -> Result<Vec<VerifyEntry>> {
    let q = builtin_quadratic();
    let s = builtin_sine();
    let h = opts.halvings;
    let jobs: Vec<Box<dyn Fn() -> Result<VerifyEntry> + '_>> = vec![
        Box::new(|| poisson_entry(&q, 32, opts.l_max)),
        Box::new(|| poisson_entry(&s, 64, opts.l_max)),
        Box::new(|| Ok(no_stationary_decay(&q, 5.0, 32, h)?.into())),
        Box::new(|| Ok(stationary_residual_decay(&q, 0.3, 32, h)?.into())),
        Box::new(|| Ok(stationary_residual_decay(&q, 0.5, 32, h)?.into())),
        Box::new(|| Ok(stationary_residual_decay(&q, 0.7, 32, h)?.into())),
        Box::new(|| Ok(stationary_residual_decay(&s, -1.5, 512, h)?.into())),
        Box::new(|| Ok(stationary_residual_decay(&s, 0.0, 512, h)?.into())),
        Box::new(|| Ok(stationary_residual_decay(&s, 1.0, 512, h)?.into())),
        Box::new(|| Ok(cross_term_decay(&s, 0.5, 2.5, 64, h, 8)?.into())),
    ];
    let mut out = Vec::with_capacity(jobs.len());
    for job in jobs {
        let entry = job()?;
        progress(&entry);
        out.push(entry);
    }
    Ok(out)
}
