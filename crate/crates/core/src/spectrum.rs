//! The wave field `exp(iS/tau)/sqrt(L)` and its centered, scaled power spectrum.
//!
//! Bins sit at `u_k = 2 pi tau (k - N/2) / (N delta)`, `k = 0..N`, and the
//! transform is evaluated on the half-sample grid `y_n = (n + 1/2) delta`.
//! With `tau = B delta / pi` the bins span `[-B, B)` and the power values,
//! weighted by the bin width, integrate to one.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::SampledFunction;

/// Largest `N` accepted by [`direct_scaled_dft`].
pub const DIRECT_DFT_MAX: usize = 4096;

/// Smallest `tau` whose spectral range `[-pi tau / delta, pi tau / delta]`
/// still covers every derivative value: `B L / (pi N)`.
pub fn tau_lower_bound(bound: f64, length: f64, n: usize) -> Result<f64> {
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::Parameter {
            name: "B",
            value: bound,
            reason: "derivative bound must be positive",
        });
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Parameter {
            name: "L",
            value: length,
            reason: "domain length must be positive",
        });
    }
    if n < 4 {
        return Err(Error::Sizing {
            n,
            reason: "at least 4 samples are required",
        });
    }
    Ok(bound * length / (PI * n as f64))
}

/// `phi_n = exp(i S(y_n) / tau) / sqrt(L)`.
#[derive(Clone, Debug)]
pub struct WaveField {
    tau: f64,
    length: f64,
    delta: f64,
    phi: Vec<Complex64>,
}

impl WaveField {
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn len(&self) -> usize {
        self.phi.len()
    }
    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
    pub fn values(&self) -> &[Complex64] {
        &self.phi
    }
}

pub fn build_wavefield(samples: &SampledFunction, tau: f64) -> Result<WaveField> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter {
            name: "tau",
            value: tau,
            reason: "tau must be positive",
        });
    }
    let amp = 1.0 / samples.length().sqrt();
    let phi = samples
        .values()
        .iter()
        .map(|&s| {
            let (sin, cos) = (s / tau).sin_cos();
            Complex64::new(amp * cos, amp * sin)
        })
        .collect();
    Ok(WaveField {
        tau,
        length: samples.length(),
        delta: samples.delta(),
        phi,
    })
}

/// Discrete power spectrum on the scaled frequency grid.
#[derive(Clone, Debug)]
pub struct SpectrumEstimate {
    tau: f64,
    length: f64,
    delta: f64,
    amplitude: Vec<Complex64>,
    power: Vec<f64>,
}

impl SpectrumEstimate {
    fn from_amplitude(wf: &WaveField, amplitude: Vec<Complex64>) -> Self {
        let power = amplitude.iter().map(|a| a.norm_sqr()).collect();
        Self {
            tau: wf.tau,
            length: wf.length,
            delta: wf.delta,
            amplitude,
            power,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn len(&self) -> usize {
        self.power.len()
    }
    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Bin spacing `2 pi tau / (N delta)`.
    pub fn bin_width(&self) -> f64 {
        2.0 * PI * self.tau / (self.len() as f64 * self.delta)
    }

    /// Scaled frequency of bin `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        (k as f64 - (self.len() / 2) as f64) * self.bin_width()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.frequency(k)).collect()
    }

    /// Half-width of the spectral range, `pi tau / delta`.
    pub fn max_frequency(&self) -> f64 {
        PI * self.tau / self.delta
    }

    /// Complex scaled DFT values `F(u_k)`.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitude
    }

    /// `P(u_k) = |F(u_k)|^2`.
    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// `du * sum_k P(u_k)`; equals one for every wave field.
    pub fn total_mass(&self) -> f64 {
        self.bin_width() * self.power.iter().sum::<f64>()
    }

    /// Range of bin indices whose frequency lies in `[a, b]`.
    pub fn bins_in(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.first_bin_where(|u| u >= a);
        let hi = self.first_bin_where(|u| u > b);
        lo..hi.max(lo)
    }

    fn first_bin_where(&self, pred: impl Fn(f64) -> bool) -> usize {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if pred(self.frequency(mid)) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Writes `k,u,P` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "u", "P"])?;
        for (k, p) in self.power.iter().enumerate() {
            w.serialize((k, self.frequency(k), p))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata(&self, bound: f64) -> SpectrumMetadata {
        let lower = bound * self.delta / PI;
        SpectrumMetadata {
            n: self.len(),
            length: self.length,
            delta: self.delta,
            tau: self.tau,
            bound,
            tau_at_lower_bound: self.tau >= lower * (1.0 - 1e-12),
        }
    }
}

/// Sidecar written next to a spectrum CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub delta: f64,
    pub tau: f64,
    #[serde(rename = "B")]
    pub bound: f64,
    pub tau_at_lower_bound: bool,
}

/// `exp(-i pi m / (2N))` with `m` reduced modulo `4N` so the argument stays small.
fn quarter_twiddle(m: i64, n: usize) -> Complex64 {
    let four_n = 4 * n as i64;
    let r = m.rem_euclid(four_n);
    let (sin, cos) = (-PI * r as f64 / (2 * n) as f64).sin_cos();
    Complex64::new(cos, sin)
}

/// Scaled DFT via a length-`N` FFT.
///
/// `u_k y_n / tau = 2 pi (k - N/2)(n + 1/2) / N`, so the sum is a plain DFT of
/// `(-1)^n phi_n` followed by the factor `exp(-i pi (k - N/2) / N)`.
pub fn scaled_dft(wf: &WaveField) -> SpectrumEstimate {
    let n = wf.len();
    let scale = wf.delta / (2.0 * PI * wf.tau).sqrt();
    let mut buf: Vec<Complex64> = wf
        .phi
        .iter()
        .enumerate()
        .map(|(i, p)| if i % 2 == 0 { *p } else { -*p })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = (n / 2) as i64;
    for (k, v) in buf.iter_mut().enumerate() {
        // exp(-i pi (k - N/2) / N) = exp(-i pi * 2 (k - N/2) / (2N))
        *v *= quarter_twiddle(2 * (k as i64 - half), n) * scale;
    }
    SpectrumEstimate::from_amplitude(wf, buf)
}

/// Literal double sum over samples and bins. Reference for [`scaled_dft`].
pub fn direct_scaled_dft(wf: &WaveField) -> Result<SpectrumEstimate> {
    let n = wf.len();
    if n > DIRECT_DFT_MAX {
        return Err(Error::Sizing {
            n,
            reason: "direct evaluation is limited to N <= 4096",
        });
    }
    let scale = wf.delta / (2.0 * PI * wf.tau).sqrt();
    let half = (n / 2) as i64;
    let amplitude = (0..n)
        .map(|k| {
            let kk = 2 * (k as i64 - half);
            let sum: Complex64 = wf
                .phi
                .iter()
                .enumerate()
                // u_k y_n / tau = pi (2k - N)(2n + 1) / (2N)
                .map(|(i, p)| p * quarter_twiddle(kk * (2 * i as i64 + 1), n))
                .sum();
            sum * scale
        })
        .collect();
    Ok(SpectrumEstimate::from_amplitude(wf, amplitude))
}

/// Samples, wave field and FFT in one call.
pub fn estimate(samples: &SampledFunction, tau: f64) -> Result<SpectrumEstimate> {
    Ok(scaled_dft(&build_wavefield(samples, tau)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{builtin_quadratic, builtin_sine, sample};
    use proptest::prelude::*;

    fn constant(length: f64, n: usize, value: f64) -> SampledFunction {
        SampledFunction::from_values(length, vec![value; n]).unwrap()
    }

    #[test]
    fn lower_bound_values() {
        assert!((tau_lower_bound(PI, 2.0, 100).unwrap() - 0.02).abs() < 1e-15);
        assert!((tau_lower_bound(PI, 2.0, 1024).unwrap() - 1.953125e-3).abs() < 1e-15);
        let b = 1.0 + 1e-6;
        assert!((tau_lower_bound(b, 1.0, 64).unwrap() - b / (64.0 * PI)).abs() < 1e-18);
        assert!(tau_lower_bound(0.0, 1.0, 64).is_err());
        assert!(tau_lower_bound(1.0, -1.0, 64).is_err());
        assert!(tau_lower_bound(1.0, 1.0, 2).is_err());
    }

    #[test]
    fn wavefield_phases() {
        let wf = build_wavefield(&constant(1.0, 8, 0.0), 0.3).unwrap();
        assert!(wf.values().iter().all(|p| *p == Complex64::new(1.0, 0.0)));

        let tau = 0.25;
        let wf = build_wavefield(&constant(4.0, 8, tau * PI), tau).unwrap();
        for p in wf.values() {
            assert!((p - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        }

        let q = builtin_quadratic();
        let tau = tau_lower_bound(q.bound(), 1.0, 8).unwrap();
        let wf = build_wavefield(&sample(&q, 8).unwrap(), tau).unwrap();
        assert!(wf.values().iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));

        assert!(build_wavefield(&constant(1.0, 8, 0.0), 0.0).is_err());
    }

    #[test]
    fn zero_phase_is_a_point_mass() {
        for (length, n, tau) in [(1.0, 16, 0.1), (2.5, 64, 0.03)] {
            let spec = scaled_dft(&build_wavefield(&constant(length, n, 0.0), tau).unwrap());
            let zero = n / 2;
            assert_eq!(spec.frequency(zero), 0.0);
            let expect = length / (2.0 * PI * tau);
            assert!((spec.power()[zero] - expect).abs() < 1e-12 * expect);
            for (k, p) in spec.power().iter().enumerate() {
                if k != zero {
                    assert!(*p < 1e-24, "bin {k}: {p}");
                }
            }
            assert!((spec.bin_width() * spec.power()[zero] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_normalization() {
        let n = 1 << 12;
        let spec = estimate(&sample(&builtin_sine(), n).unwrap(), 2.0 / n as f64).unwrap();
        assert!((spec.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_power_concentrates_on_unit_interval() {
        let q = builtin_quadratic();
        let tau = 1.0 / (64.0 * PI) * (1.0 + 1e-6);
        let wf = build_wavefield(&sample(&q, 64).unwrap(), tau).unwrap();
        let spec = direct_scaled_dft(&wf).unwrap();
        let inside: f64 = spec
            .frequencies()
            .iter()
            .zip(spec.power())
            .filter(|(u, _)| **u > 0.0 && **u < 1.0)
            .map(|(_, p)| p * spec.bin_width())
            .sum();
        assert!(inside >= 0.9, "{inside}");
        let fast = scaled_dft(&wf);
        let fast_inside: f64 = fast
            .frequencies()
            .iter()
            .zip(fast.power())
            .filter(|(u, _)| **u > 0.0 && **u < 1.0)
            .map(|(_, p)| p * fast.bin_width())
            .sum();
        assert!((inside - fast_inside).abs() < 1e-12);
    }

    #[test]
    fn frequency_grid() {
        let q = builtin_quadratic();
        let n = 256;
        let tau = tau_lower_bound(q.bound(), 1.0, n).unwrap();
        let spec = estimate(&sample(&q, n).unwrap(), tau).unwrap();
        let u = spec.frequencies();
        assert_eq!(u[n / 2], 0.0);
        assert!(u.windows(2).all(|w| w[1] > w[0]));
        assert!((spec.bin_width() - 2.0 * q.bound() / n as f64).abs() < 1e-15);
        let max = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max >= q.bound() - 1e-12 && max <= q.bound() + spec.bin_width());
        assert!((spec.max_frequency() - q.bound()).abs() < 1e-12);
    }

    #[test]
    fn bins_in_interval() {
        let spec = estimate(&constant(1.0, 16, 0.0), 1.0 / (16.0 * PI)).unwrap();
        let du = spec.bin_width();
        let r = spec.bins_in(-du, du);
        assert_eq!(r, 7..10);
        let r = spec.bins_in(0.5 * du, 0.7 * du);
        assert!(r.is_empty());
        let r = spec.bins_in(-10.0, 10.0);
        assert_eq!(r, 0..16);
    }

    #[test]
    fn direct_size_guard() {
        let wf = build_wavefield(&constant(1.0, 4098, 0.0), 0.1).unwrap();
        assert!(matches!(direct_scaled_dft(&wf), Err(Error::Sizing { .. })));
    }

    #[test]
    fn csv_and_metadata() {
        let spec = estimate(&sample(&builtin_sine(), 8).unwrap(), 0.25).unwrap();
        let mut out = Vec::new();
        spec.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,u,P"));
        assert_eq!(lines.count(), 8);
        let meta = spec.metadata(PI);
        assert!(meta.tau_at_lower_bound);
        let below = estimate(&sample(&builtin_sine(), 8).unwrap(), 0.2).unwrap();
        assert!(!below.metadata(PI).tau_at_lower_bound);
        let json = serde_json::to_value(&meta).unwrap();
        for key in ["N", "L", "delta", "tau", "B", "tau_at_lower_bound"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    fn random_field(values: Vec<f64>, length: f64, tau: f64) -> WaveField {
        build_wavefield(&SampledFunction::from_values(length, values).unwrap(), tau).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn parseval_holds_for_any_phase(
            half in 2usize..600,
            seed_values in prop::collection::vec(-50.0f64..50.0, 1200),
            tau in 1e-3f64..5.0,
            length in 0.1f64..10.0,
        ) {
            let n = 2 * half;
            let spec = scaled_dft(&random_field(seed_values[..n].to_vec(), length, tau));
            prop_assert!((spec.total_mass() - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn fast_matches_direct(
            half in 4usize..200,
            seed_values in prop::collection::vec(-20.0f64..20.0, 400),
            tau in 1e-2f64..2.0,
        ) {
            let n = 2 * half;
            let wf = random_field(seed_values[..n].to_vec(), 1.0, tau);
            let fast = scaled_dft(&wf);
            let slow = direct_scaled_dft(&wf).unwrap();
            let peak = slow.power().iter().cloned().fold(0.0, f64::max);
            for (a, b) in fast.power().iter().zip(slow.power()) {
                prop_assert!((a - b).abs() <= 1e-9 * peak);
            }
        }
    }
}
