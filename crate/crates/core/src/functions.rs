//! Analytic test functions and uniform sampling.
//!
//! An [`AnalyticFunction`] carries `S`, its first two derivatives, the
//! derivative bound `B` and the critical set `C` of derivative values where
//! the derivative density is undefined. Everything downstream that needs a
//! ground truth starts here. Estimation itself only ever sees a
//! [`SampledFunction`].

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["sine", "quadratic"];

/// Relative slack added to `sup |s|` to form the strict bound `B`.
pub const BETA_FRACTION: f64 = 1e-6;

/// Slack `beta` for a derivative supremum: strictly positive, negligible for tau.
pub fn default_beta(sup_slope: f64) -> f64 {
    BETA_FRACTION * sup_slope.abs().max(1.0)
}

type RealFn = fn(f64) -> f64;

/// A closed-form phase function `S` on `[0, L]`.
#[derive(Clone, Debug)]
pub struct AnalyticFunction {
    name: String,
    length: f64,
    value: RealFn,
    slope: RealFn,
    curvature: RealFn,
    sup_slope: f64,
    critical: Vec<f64>,
    density: Option<RealFn>,
}

/// Constructor arguments for [`AnalyticFunction::new`].
pub struct FunctionDef {
    pub name: String,
    pub length: f64,
    pub value: RealFn,
    pub slope: RealFn,
    pub curvature: RealFn,
    /// `sup |s(x)|` over `[0, L]`.
    pub sup_slope: f64,
    /// Images under `s` of the zeros of `S''`. `s(0)` and `s(L)` are added.
    pub curvature_zero_images: Vec<f64>,
    pub density: Option<RealFn>,
}

const VALIDATION_GRID: usize = 4096;

impl AnalyticFunction {
    /// Registers a function after checking that the derivative density exists
    /// almost everywhere, i.e. `S''` vanishes only at isolated points.
    pub fn new(def: FunctionDef) -> Result<Self> {
        let f = Self::new_unchecked(def)?;
        let n = VALIDATION_GRID;
        let xs = (0..=n).map(|i| f.length * i as f64 / n as f64);
        let curv: Vec<f64> = xs.clone().map(|x| (f.curvature)(x).abs()).collect();
        let scale = curv.iter().cloned().fold(0.0, f64::max);
        let flat = curv.iter().filter(|&&c| c <= 1e-12 * scale.max(1e-300)).count();
        if scale == 0.0 || flat * 100 > n {
            return Err(Error::Config(format!(
                "function `{}` has S'' = 0 on a set of positive measure; its derivative density does not exist",
                f.name
            )));
        }
        let max_slope = xs.map(|x| (f.slope)(x).abs()).fold(0.0, f64::max);
        if max_slope > f.sup_slope * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Config(format!(
                "function `{}` declares sup|s| = {} but |s| reaches {}",
                f.name, f.sup_slope, max_slope
            )));
        }
        Ok(f)
    }

    /// Skips the curvature check. Used for degenerate phases (constant or
    /// linear `S`) that some transform identities are tested against.
    pub fn new_unchecked(def: FunctionDef) -> Result<Self> {
        if !(def.length > 0.0 && def.length.is_finite()) {
            return Err(Error::Parameter {
                name: "L",
                value: def.length,
                reason: "domain length must be positive and finite",
            });
        }
        let mut critical = def.curvature_zero_images;
        critical.push((def.slope)(0.0));
        critical.push((def.slope)(def.length));
        critical.sort_by(f64::total_cmp);
        critical.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        Ok(Self {
            name: def.name,
            length: def.length,
            value: def.value,
            slope: def.slope,
            curvature: def.curvature,
            sup_slope: def.sup_slope,
            critical,
            density: def.density,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `S(x)` for `x` in `[0, L]`.
    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    /// `s(x) = S'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        (self.slope)(x)
    }

    /// `S''(x)`.
    pub fn curvature(&self, x: f64) -> f64 {
        (self.curvature)(x)
    }

    /// `S` continued linearly past both ends of the domain with the end slopes.
    pub fn value_extended(&self, x: f64) -> f64 {
        if x < 0.0 {
            (self.value)(0.0) + (self.slope)(0.0) * x
        } else if x > self.length {
            (self.value)(self.length) + (self.slope)(self.length) * (x - self.length)
        } else {
            (self.value)(x)
        }
    }

    pub fn slope_extended(&self, x: f64) -> f64 {
        (self.slope)(x.clamp(0.0, self.length))
    }

    pub fn sup_slope(&self) -> f64 {
        self.sup_slope
    }

    pub fn beta(&self) -> f64 {
        default_beta(self.sup_slope)
    }

    /// The strict derivative bound `B = sup|s| + beta`.
    pub fn bound(&self) -> f64 {
        self.sup_slope + self.beta()
    }

    /// The critical set `C`, sorted ascending.
    pub fn critical_values(&self) -> &[f64] {
        &self.critical
    }

    /// Exclusion margin around each element of `C`: one percent of `B`.
    pub fn exclusion_margin(&self) -> f64 {
        0.01 * self.bound()
    }

    /// Nearest critical value within `margin` of `u`, if any.
    pub fn near_critical(&self, u: f64, margin: f64) -> Option<f64> {
        self.critical
            .iter()
            .copied()
            .filter(|c| (u - c).abs() < margin)
            .min_by(|a, b| (u - a).abs().total_cmp(&(u - b).abs()))
    }

    pub fn has_closed_form_density(&self) -> bool {
        self.density.is_some()
    }

    /// Closed-form density of `s(X)`, `X ~ U[0, L]`, when the catalog has one.
    pub fn closed_form_density(&self, u: f64) -> Option<f64> {
        self.density.map(|d| d(u))
    }
}

fn sine_value(x: f64) -> f64 {
    (PI * (x - 1.0)).sin()
}
fn sine_slope(x: f64) -> f64 {
    PI * (PI * (x - 1.0)).cos()
}
fn sine_curvature(x: f64) -> f64 {
    -PI * PI * (PI * (x - 1.0)).sin()
}
fn sine_density(u: f64) -> f64 {
    if u.abs() >= PI {
        return 0.0;
    }
    1.0 / (PI * PI * (u / PI).acos().sin())
}

fn quadratic_value(x: f64) -> f64 {
    0.5 * x * x
}
fn quadratic_slope(x: f64) -> f64 {
    x
}
fn quadratic_curvature(_x: f64) -> f64 {
    1.0
}
fn quadratic_density(u: f64) -> f64 {
    if u > 0.0 && u < 1.0 {
        1.0
    } else {
        0.0
    }
}

/// `S(x) = sin(pi (x - 1))` on `[0, 2]`; density `1 / (pi^2 sin(acos(u / pi)))`.
pub fn builtin_sine() -> AnalyticFunction {
    AnalyticFunction::new(FunctionDef {
        name: "sine".into(),
        length: 2.0,
        value: sine_value,
        slope: sine_slope,
        curvature: sine_curvature,
        sup_slope: PI,
        // S'' vanishes at x = 0, 1, 2 where s = -pi, pi, -pi.
        curvature_zero_images: vec![-PI, PI],
        density: Some(sine_density),
    })
    .expect("sine builtin is valid")
}

/// `S(x) = x^2 / 2` on `[0, 1]`; derivative uniform on `(0, 1)`.
pub fn builtin_quadratic() -> AnalyticFunction {
    AnalyticFunction::new(FunctionDef {
        name: "quadratic".into(),
        length: 1.0,
        value: quadratic_value,
        slope: quadratic_slope,
        curvature: quadratic_curvature,
        sup_slope: 1.0,
        curvature_zero_images: vec![],
        density: Some(quadratic_density),
    })
    .expect("quadratic builtin is valid")
}

/// Looks a builtin up by name.
pub fn builtin(name: &str) -> Result<AnalyticFunction> {
    match name {
        "sine" => Ok(builtin_sine()),
        "quadratic" => Ok(builtin_quadratic()),
        other => Err(Error::Config(format!(
            "unknown function `{other}`; builtins are {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// `N` samples of `S` at the cell midpoints `y_n = (n + 1/2) L / N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    length: f64,
    delta: f64,
    values: Vec<f64>,
}

fn check_size(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Sizing {
            n,
            reason: "at least 4 samples are required",
        });
    }
    if n % 2 != 0 {
        return Err(Error::Sizing {
            n,
            reason: "the sample count must be even",
        });
    }
    Ok(())
}

impl SampledFunction {
    pub fn from_values(length: f64, values: Vec<f64>) -> Result<Self> {
        check_size(values.len())?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter {
                name: "L",
                value: length,
                reason: "domain length must be positive and finite",
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parameter {
                name: "S",
                value: *bad,
                reason: "sample values must be finite",
            });
        }
        let delta = length / values.len() as f64;
        Ok(Self {
            length,
            delta,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample location `y_n`.
    pub fn node(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.delta
    }

    /// Writes `n,y,S` rows with round-trip decimal precision.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "y", "S"])?;
        for (n, v) in self.values.iter().enumerate() {
            w.write_record([n.to_string(), self.node(n).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an `n,y,S` table. Rows must be in order and uniformly spaced.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            n: usize,
            y: f64,
            #[serde(rename = "S")]
            s: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut ys = Vec::new();
        let mut values = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.n != i {
                return Err(Error::Config(format!(
                    "sample rows out of order: expected n = {i}, found {}",
                    row.n
                )));
            }
            ys.push(row.y);
            values.push(row.s);
        }
        check_size(values.len())?;
        // y_0 = delta / 2, so L = 2 N y_0; cross-check against the last node.
        let n = values.len() as f64;
        let delta = (ys[ys.len() - 1] - ys[0]) / (n - 1.0);
        let length = delta * n;
        if (ys[0] - 0.5 * delta).abs() > 1e-9 * length {
            return Err(Error::Config(
                "sample nodes must sit at cell midpoints (n + 1/2) L / N".into(),
            ));
        }
        for (i, y) in ys.iter().enumerate() {
            if (y - (i as f64 + 0.5) * delta).abs() > 1e-9 * length {
                return Err(Error::Config(format!(
                    "sample node {i} at y = {y} breaks the uniform spacing {delta}"
                )));
            }
        }
        Self::from_values(length, values)
    }
}

/// Samples `S` at `N` cell midpoints of `[0, L]`.
pub fn sample(func: &AnalyticFunction, n: usize) -> Result<SampledFunction> {
    check_size(n)?;
    let delta = func.length() / n as f64;
    let values = (0..n)
        .map(|i| func.value((i as f64 + 0.5) * delta))
        .collect();
    SampledFunction::from_values(func.length(), values)
}

/// Largest forward-difference slope magnitude plus `beta`.
pub fn estimate_bound(samples: &SampledFunction, beta: f64) -> f64 {
    let delta = samples.delta();
    samples
        .values()
        .windows(2)
        .map(|w| ((w[1] - w[0]) / delta).abs())
        .fold(0.0, f64::max)
        + beta
}
