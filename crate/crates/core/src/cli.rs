//! Command-line front end.
//!
//! Settings come from flags, a JSON file given with `--config`, and the
//! `WAVEDENSITY_OUT_DIR` environment variable. Precedence, highest first:
//! flag, environment (output directory only), file, built-in default.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::{self, DEFAULT_ISE_GRID};
use crate::convergence::{self, SweepOptions, TrueTerm};
use crate::error::{Error, Result};
use crate::functions::{builtin, default_beta, estimate_bound, sample, AnalyticFunction, SampledFunction};
use crate::oracle_ft::{self, VerifyEntry, VerifyOptions};
use crate::spectrum::{estimate, tau_lower_bound};
use crate::truth;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "WAVEDENSITY_OUT_DIR";

const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(
    name = "wavedensity",
    version,
    about = "Derivative densities from the power spectrum of exp(iS/tau)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power spectrum of one function at one N (spectrum.csv, meta.json).
    Estimate(EstimateArgs),
    /// Error statistic over a list of N with tau at its lower bound (converge.csv, fit.json).
    Converge(ConvergeArgs),
    /// Error statistic at fixed N over a list of tau (tausweep.csv, tausweep.json).
    Tausweep(TausweepArgs),
    /// Poisson identity and decay-rate checks (verify.json).
    Verify(VerifyArgs),
    /// True density at a point or true mass of an interval (truth.json).
    Truth(TruthArgs),
    /// Histogram and kernel baselines (baselines.csv, baselines.json).
    Baselines(BaselinesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON file with any of the settings below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Builtin name (sine, quadratic) or, for `estimate`, a CSV of samples.
    #[arg(long = "fn")]
    pub function: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recorded in every sidecar; the experiments themselves are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of samples (even).
    #[arg(long = "N")]
    pub n: Option<String>,
    /// `lower_bound` or a positive number.
    #[arg(long)]
    pub tau: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Number of neighborhoods.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Neighborhood half-width; defaults to 0.4 of the center spacing.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Margin around +-B and the critical values.
    #[arg(long = "eps-C")]
    pub eps_c: Option<f64>,
    /// Compare against exact interval integrals of the true density.
    #[arg(long)]
    pub exact_integral: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `1024..65536x2`, a comma list, or a single value.
    #[arg(long = "N")]
    pub n: Option<String>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TausweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fixed number of samples.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// `32x..1x` (multiples of the lower bound, log spaced) or a comma list.
    #[arg(long)]
    pub taus: Option<String>,
    /// Number of values generated by the `Ax..Bx` form.
    #[arg(long)]
    pub tau_count: Option<usize>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sample count for the Poisson check; requires `--fn`.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Aliasing terms on each side.
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Number of tau halvings in the decay checks.
    #[arg(long)]
    pub halvings: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TruthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Frequency at which to evaluate the density.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<f64>,
    /// Interval start for the true mass.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Interval end for the true mass.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Root scan resolution.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `1024..65536x2`, a comma list, or a single value.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// ISE evaluation points.
    #[arg(long)]
    pub grid: Option<usize>,
}

/// A number, a list of numbers, or the text syntax accepted on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spec<T> {
    One(T),
    Many(Vec<T>),
    Text(String),
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "fn", skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<Spec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Spec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taus: Option<Spec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_count: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "eps_C", skip_serializing_if = "Option::is_none")]
    pub eps_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_integral: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halvings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    fn overlay(mut self, flags: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(function, n, tau, taus, tau_count, k, alpha, eps_c, exact_integral, out_dir, seed, l_max, halvings, u, a, b, grid);
        self
    }
}

/// Parses `A..BxR` (geometric), a comma list, or one integer.
pub fn parse_n_list(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse N list `{text}`"));
    let t = text.trim();
    if let Some((lo, rest)) = t.split_once("..") {
        let (hi, ratio) = rest.split_once('x').unwrap_or((rest, "2"));
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        let ratio: usize = ratio.trim().parse().map_err(|_| bad())?;
        if lo == 0 || ratio < 2 || hi < lo {
            return Err(bad());
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n = n.checked_mul(ratio).ok_or_else(bad)?;
        }
        return Ok(out);
    }
    t.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect()
}

/// Parsed `--taus` value.
#[derive(Clone, Debug, PartialEq)]
pub enum TauList {
    /// Multiples of the lower bound, log spaced from the first to the second.
    Multiples(f64, f64),
    Absolute(Vec<f64>),
}

pub fn parse_tau_list(text: &str) -> Result<TauList> {
    let bad = || Error::Config(format!("cannot parse tau list `{text}`"));
    let t = text.trim();
    if let Some((hi, lo)) = t.split_once("..") {
        let strip = |s: &str| -> Result<f64> {
            s.trim()
                .strip_suffix('x')
                .ok_or_else(bad)?
                .trim()
                .parse()
                .map_err(|_| bad())
        };
        let (hi, lo) = (strip(hi)?, strip(lo)?);
        if !(hi > lo && lo > 0.0) {
            return Err(bad());
        }
        return Ok(TauList::Multiples(hi, lo));
    }
    t.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()
        .map(TauList::Absolute)
}

fn n_list(spec: &Spec<usize>) -> Result<Vec<usize>> {
    match spec {
        Spec::One(n) => Ok(vec![*n]),
        Spec::Many(v) => Ok(v.clone()),
        Spec::Text(t) => parse_n_list(t),
    }
}

fn single_n(spec: &Spec<usize>) -> Result<usize> {
    match n_list(spec)?.as_slice() {
        [n] => Ok(*n),
        _ => Err(Error::Config("this command takes a single N".into())),
    }
}

fn flag_n(text: &Option<String>) -> Option<Spec<usize>> {
    text.as_ref().map(|t| Spec::Text(t.clone()))
}

fn common_flags(c: &CommonArgs) -> RunConfig {
    RunConfig {
        function: c.function.clone(),
        out_dir: c.out.clone(),
        seed: c.seed,
        ..Default::default()
    }
}

fn sweep_flags(base: RunConfig, s: &SweepArgs) -> RunConfig {
    RunConfig {
        k: s.k,
        alpha: s.alpha,
        eps_c: s.eps_c,
        exact_integral: s.exact_integral.then_some(true),
        ..base
    }
}

/// Merges file, environment and flags.
fn resolve(common: &CommonArgs, flags: RunConfig) -> Result<RunConfig> {
    let file = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = file;
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
        cfg.out_dir = Some(PathBuf::from(dir));
    }
    Ok(cfg.overlay(flags))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn analytic(cfg: &RunConfig) -> Result<AnalyticFunction> {
    let name = cfg
        .function
        .as_deref()
        .ok_or_else(|| Error::Config("missing --fn".into()))?;
    builtin(name)
}

fn sweep_options(cfg: &RunConfig) -> SweepOptions {
    SweepOptions {
        k: cfg.k.unwrap_or(255),
        alpha: cfg.alpha,
        eps_c: cfg.eps_c,
        term: if cfg.exact_integral.unwrap_or(false) {
            TrueTerm::ExactIntegral
        } else {
            TrueTerm::BinCenters
        },
    }
}

fn snapshot(command: &str, cfg: &RunConfig) -> Value {
    json!({ "command": command, "settings": cfg })
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let flags = RunConfig {
        n: flag_n(&args.n),
        tau: args.tau.as_ref().map(|t| Spec::Text(t.clone())),
        ..common_flags(&args.common)
    };
    let cfg = resolve(&args.common, flags)?;
    let name = cfg
        .function
        .clone()
        .ok_or_else(|| Error::Config("missing --fn".into()))?;
    let (samples, bound) = match builtin(&name) {
        Ok(f) => {
            let n = single_n(cfg.n.as_ref().ok_or_else(|| Error::Config("missing --N".into()))?)?;
            (sample(&f, n)?, f.bound())
        }
        Err(_) if Path::new(&name).is_file() => {
            let s = SampledFunction::read_csv(File::open(&name)?)?;
            if let Some(spec) = &cfg.n {
                let n = single_n(spec)?;
                if n != s.len() {
                    return Err(Error::Config(format!(
                        "--N {n} disagrees with the {} samples in {name}",
                        s.len()
                    )));
                }
            }
            let raw = estimate_bound(&s, 0.0);
            (s, raw + default_beta(raw))
        }
        Err(e) => return Err(e),
    };
    let floor = tau_lower_bound(bound, samples.length(), samples.len())?;
    let tau = match &cfg.tau {
        None => floor,
        Some(Spec::One(t)) => *t,
        Some(Spec::Text(t)) if t.trim() == "lower_bound" => floor,
        Some(Spec::Text(t)) => t
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("tau must be `lower_bound` or a number, got `{t}`")))?,
        Some(Spec::Many(_)) => {
            return Err(Error::Config("estimate takes a single tau".into()));
        }
    };
    let spec = estimate(&samples, tau)?;
    let meta = spec.metadata(bound);
    if !meta.tau_at_lower_bound {
        eprintln!(
            "warning: tau = {tau} is below the lower bound {floor}; derivatives beyond +-{} alias",
            spec.max_frequency()
        );
    }
    let mass = spec.total_mass();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::Invariant(format!(
            "spectrum mass du * sum P = {mass} differs from 1"
        )));
    }
    let dir = out_dir(&cfg)?;
    let mut w = create(&dir, "spectrum.csv")?;
    spec.write_csv(&mut w)?;
    w.flush()?;
    let mut meta_json = serde_json::to_value(&meta)?;
    meta_json["config"] = snapshot("estimate", &cfg);
    write_json(&dir, "meta.json", &meta_json)?;
    eprintln!("estimate: N = {}, tau = {tau}, wrote {}", spec.len(), dir.display());
    Ok(())
}

fn progress_row(label: &'static str) -> impl Fn(&convergence::ConvergenceRow) + Sync {
    move |r| {
        let flag = if r.below_bound { " (below bound)" } else { "" };
        eprintln!("{label}: N = {}, tau = {:e}, delta = {:e}{flag}", r.n, r.tau, r.delta);
    }
}

fn cmd_converge(args: &ConvergeArgs) -> Result<()> {
    let flags = sweep_flags(
        RunConfig {
            n: flag_n(&args.n),
            ..common_flags(&args.common)
        },
        &args.sweep,
    );
    let cfg = resolve(&args.common, flags)?;
    let func = analytic(&cfg)?;
    let ns = n_list(cfg.n.as_ref().ok_or_else(|| Error::Config("missing --N".into()))?)?;
    let mut rec = convergence::n_sweep_with_progress(&func, &ns, sweep_options(&cfg), progress_row("converge"))?;
    if rec.fit.is_none() {
        eprintln!("warning: a single N gives no slope");
    }
    rec.config["run"] = snapshot("converge", &cfg);
    let dir = out_dir(&cfg)?;
    let mut w = create(&dir, "converge.csv")?;
    rec.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir, "fit.json")?;
    rec.write_fit_json(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_tausweep(args: &TausweepArgs) -> Result<()> {
    let flags = sweep_flags(
        RunConfig {
            n: flag_n(&args.n),
            taus: args.taus.as_ref().map(|t| Spec::Text(t.clone())),
            tau_count: args.tau_count,
            ..common_flags(&args.common)
        },
        &args.sweep,
    );
    let cfg = resolve(&args.common, flags)?;
    let func = analytic(&cfg)?;
    let n0 = single_n(cfg.n.as_ref().ok_or_else(|| Error::Config("missing --N".into()))?)?;
    let t0 = tau_lower_bound(func.bound(), func.length(), n0)?;
    let count = cfg.tau_count.unwrap_or(8);
    let taus = match cfg.taus.clone().unwrap_or(Spec::Text("32x..1x".into())) {
        Spec::One(t) => vec![t],
        Spec::Many(v) => v,
        Spec::Text(t) => match parse_tau_list(&t)? {
            TauList::Multiples(hi, lo) => {
                if count == 0 {
                    return Err(Error::Config("tau_count must be positive".into()));
                }
                convergence::log_spaced_descending(hi * t0, lo * t0, count)
            }
            TauList::Absolute(v) => v,
        },
    };
    let mut rec =
        convergence::tau_sweep_with_progress(&func, n0, &taus, sweep_options(&cfg), progress_row("tausweep"))?;
    let flagged = rec.rows.iter().filter(|r| r.below_bound).count();
    if flagged > 0 {
        eprintln!("warning: {flagged} tau values lie below the lower bound {t0}");
    }
    rec.config["run"] = snapshot("tausweep", &cfg);
    let dir = out_dir(&cfg)?;
    let mut w = create(&dir, "tausweep.csv")?;
    rec.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir, "tausweep.json")?;
    rec.write_fit_json(&mut w)?;
    w.flush()?;
    Ok(())
}

fn print_entry(e: &VerifyEntry) {
    let status = if e.pass { "pass" } else { "FAIL" };
    eprintln!("verify: {status} {} measured {:?} threshold {}", e.name, e.measured, e.threshold);
}

fn function_checks(func: &AnalyticFunction, opts: VerifyOptions) -> Result<Vec<VerifyEntry>> {
    let h = opts.halvings;
    let mut out = Vec::new();
    match func.name() {
        "quadratic" => {
            out.push(oracle_ft::no_stationary_decay(func, 5.0, 32, h)?.into());
            for u in [0.3, 0.5, 0.7] {
                out.push(oracle_ft::stationary_residual_decay(func, u, 32, h)?.into());
            }
        }
        "sine" => {
            for u in [-1.5, 0.0, 1.0] {
                out.push(oracle_ft::stationary_residual_decay(func, u, 512, h)?.into());
            }
            out.push(oracle_ft::cross_term_decay(func, 0.5, 2.5, 64, h, 8)?.into());
        }
        _ => {}
    }
    Ok(out)
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let flags = RunConfig {
        n: flag_n(&args.n),
        l_max: args.lmax,
        halvings: args.halvings,
        ..common_flags(&args.common)
    };
    let cfg = resolve(&args.common, flags)?;
    let opts = VerifyOptions {
        l_max: cfg.l_max.unwrap_or(oracle_ft::DEFAULT_L_MAX),
        halvings: cfg.halvings.unwrap_or(4),
    };
    if opts.halvings == 0 {
        return Err(Error::Config("halvings must be at least 1".into()));
    }
    let checks = match &cfg.function {
        None => {
            if cfg.n.is_some() {
                return Err(Error::Config("--N needs --fn".into()));
            }
            oracle_ft::verify_with_progress(opts, print_entry)?
        }
        Some(_) => {
            let func = analytic(&cfg)?;
            let n = match &cfg.n {
                Some(spec) => single_n(spec)?,
                None if func.name() == "sine" => 64,
                None => 32,
            };
            let first = oracle_ft::poisson_entry(&func, n, opts.l_max)?;
            print_entry(&first);
            let mut all = vec![first];
            for e in function_checks(&func, opts)? {
                print_entry(&e);
                all.push(e);
            }
            all
        }
    };
    let pass = checks.iter().all(|c| c.pass);
    let dir = out_dir(&cfg)?;
    write_json(
        &dir,
        "verify.json",
        &json!({ "pass": pass, "checks": checks, "config": snapshot("verify", &cfg) }),
    )?;
    Ok(pass)
}

fn cmd_truth(args: &TruthArgs) -> Result<()> {
    let flags = RunConfig {
        u: args.u,
        a: args.a,
        b: args.b,
        grid: args.grid,
        ..common_flags(&args.common)
    };
    let cfg = resolve(&args.common, flags)?;
    let func = analytic(&cfg)?;
    let grid = cfg.grid.unwrap_or(truth::DEFAULT_GRID);
    let mut report = json!({ "fn": func.name(), "B": func.bound(), "critical_values": func.critical_values() });
    match (cfg.u, cfg.a, cfg.b) {
        (None, None, None) => {
            return Err(Error::Config("give --u, or --a and --b".into()));
        }
        (_, Some(_), None) | (_, None, Some(_)) => {
            return Err(Error::Config("--a and --b must be given together".into()));
        }
        (u, a, b) => {
            if let Some(u) = u {
                let roots = truth::find_roots(&func, u, grid)?;
                let brute = truth::density_bruteforce(&func, u, grid)?;
                report["u"] = json!(u);
                report["roots"] = json!(roots.roots);
                report["curvature_at_roots"] = json!(roots.curvature_at_roots);
                report["density"] = json!(brute);
                report["closed_form_density"] = json!(func.closed_form_density(u));
                eprintln!("truth: P({u}) = {brute}");
            }
            if let (Some(a), Some(b)) = (a, b) {
                let m = truth::true_interval_measure(&func, a, b)?;
                report["interval"] = json!([a, b]);
                report["measure"] = json!(m);
                eprintln!("truth: mass of [{a}, {b}] = {m}");
            }
        }
    }
    report["config"] = snapshot("truth", &cfg);
    write_json(&out_dir(&cfg)?, "truth.json", &report)
}

fn cmd_baselines(args: &BaselinesArgs) -> Result<()> {
    let flags = RunConfig {
        n: flag_n(&args.n),
        grid: args.grid,
        ..common_flags(&args.common)
    };
    let cfg = resolve(&args.common, flags)?;
    let func = analytic(&cfg)?;
    let ns = match &cfg.n {
        Some(spec) => n_list(spec)?,
        None => parse_n_list("1024..65536x2")?,
    };
    let study = baselines::rate_study_with_progress(
        &func,
        &ns,
        cfg.grid.unwrap_or(DEFAULT_ISE_GRID),
        |r| eprintln!("baselines: N = {}, {} ISE = {:e}", r.n, r.method, r.ise),
    )?;
    for r in &study.rates {
        match r.fit {
            Some(f) => eprintln!(
                "baselines: {:?} slope {:.3} (band {:?})",
                r.method, f.slope, r.band
            ),
            None => eprintln!("baselines: {:?} slope undefined", r.method),
        }
    }
    eprintln!("baselines: {} on a fixed grid; cited rates assume random designs", baselines::METRIC_LABEL);
    let dir = out_dir(&cfg)?;
    let mut w = create(&dir, "baselines.csv")?;
    study.write_csv(&mut w)?;
    w.flush()?;
    write_json(
        &dir,
        "baselines.json",
        &json!({
            "metric": study.metric,
            "fn": study.function,
            "rates": study.rates,
            "note": "fixed-design ISE of one deterministic sample; slopes are not expected errors",
            "config": snapshot("baselines", &cfg),
        }),
    )
}

/// Runs one parsed command. `Ok(false)` means a verification check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a).map(|_| true),
        Command::Converge(a) => cmd_converge(a).map(|_| true),
        Command::Tausweep(a) => cmd_tausweep(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Truth(a) => cmd_truth(a).map(|_| true),
        Command::Baselines(a) => cmd_baselines(a).map(|_| true),
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        2
    } else {
        3
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more verification checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_list_forms() {
        assert_eq!(
            parse_n_list("1024..65536x2").unwrap(),
            vec![1024, 2048, 4096, 8192, 16384, 32768, 65536]
        );
        assert_eq!(parse_n_list("8..100x4").unwrap(), vec![8, 32]);
        assert_eq!(parse_n_list("64").unwrap(), vec![64]);
        assert_eq!(parse_n_list("64, 128").unwrap(), vec![64, 128]);
        assert!(parse_n_list("abc").is_err());
        assert!(parse_n_list("64..32x2").is_err());
        assert!(parse_n_list("64..128x1").is_err());
    }

    #[test]
    fn tau_list_forms() {
        assert_eq!(parse_tau_list("32x..1x").unwrap(), TauList::Multiples(32.0, 1.0));
        assert_eq!(
            parse_tau_list("0.1,0.05").unwrap(),
            TauList::Absolute(vec![0.1, 0.05])
        );
        assert!(parse_tau_list("1x..32x").is_err());
        assert!(parse_tau_list("32..1").is_err());
    }

    #[test]
    fn config_file_and_flags_merge() {
        let file: RunConfig =
            serde_json::from_str(r#"{"fn":"sine","N":"1024..4096x2","K":63,"alpha":0.01}"#).unwrap();
        let flags = RunConfig {
            k: Some(31),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.k, Some(31));
        assert_eq!(merged.alpha, Some(0.01));
        assert_eq!(n_list(merged.n.as_ref().unwrap()).unwrap(), vec![1024, 2048, 4096]);
        let listed: RunConfig = serde_json::from_str(r#"{"N":[32,64],"tau":0.5}"#).unwrap();
        assert_eq!(listed.n, Some(Spec::Many(vec![32, 64])));
        assert_eq!(listed.tau, Some(Spec::One(0.5)));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Sizing { n: 3, reason: "odd" }), 2);
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
        assert_eq!(exit_code(&Error::DegenerateNeighborhood { center: 0.0 }), 3);
    }
}
