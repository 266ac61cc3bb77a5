//! Command-line front end.
//!
//! Every command produces a [`Report`]: a results table, a list of checks and
//! the resolved configuration. CSV output writes the table (and, when checks
//! exist, a blank line followed by the check table); JSON writes
//! `{config, results, checks, version}`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analysis::{
    boundary_curve_decay, cone_scan, geometric_samples, verify_fixed_x_decay, verify_uniform_decay,
    Region, EXPONENTIAL_THRESHOLD,
};
use crate::dynamics::{commutator_report, evolve, reduce_degenerate, symplectic_form};
use crate::error::Error;
use crate::finitevol::compare_finite_infinite;
use crate::kernels::{
    bessel_oracle_1d, gaussian_quadratic_bound, gaussian_quadratic_selftest, kernel_table,
    kernel_value, KernelIndex, QuadratureSpec,
};
use crate::lattice::{LatticeFunction, LatticeSite};
use crate::model::ModelParams;

/// Largest dimension accepted without `--allow-large-d`.
pub const MAX_DEFAULT_D: usize = 4;

#[derive(Debug, Parser)]
#[command(
    name = "harmonic-lattice",
    version,
    about = "Harmonic lattice dynamics on Z^d"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Comma-separated couplings, or a single value broadcast to every axis.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub base_points: Option<usize>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub max_doublings: Option<u32>,
    #[arg(long, global = true)]
    pub truncation_tolerance: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Accept d > 4.
    #[arg(long, global = true)]
    pub allow_large_d: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate H^(-1), H^(0), H^(1) on a box for each time.
    Kernel {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        t: Option<Vec<f64>>,
        #[arg(long)]
        radius: Option<usize>,
    },
    /// Commutator norm, a-priori bound and symplectic phase of two probes.
    Commutator {
        /// Probe literal, e.g. `0:1,3:0.5-1.25i` (sites are `;`-joined in d > 1).
        #[arg(long, allow_hyphen_values = true)]
        f: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        g: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        t: Option<Vec<f64>>,
    },
    /// Numerical check of a decay statement.
    Verify {
        #[arg(value_enum)]
        target: Target,
        /// Explicit time samples.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        /// `t_min,t_max` for geometric sampling.
        #[arg(long, value_delimiter = ',')]
        t_range: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
        /// Fixed site for `thm-2.3`, e.g. `1;0`.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        /// Largest l1 radius of the `figure-1` scan.
        #[arg(long)]
        x_max: Option<usize>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Target {
    #[value(name = "thm-2.1")]
    #[serde(rename = "thm-2.1")]
    Uniform2,
    #[value(name = "thm-2.2")]
    #[serde(rename = "thm-2.2")]
    Uniform1,
    #[value(name = "thm-2.3")]
    #[serde(rename = "thm-2.3")]
    FixedX,
    #[value(name = "figure-1")]
    #[serde(rename = "figure-1")]
    Cone,
}

impl Target {
    fn default_d(self) -> usize {
        match self {
            Target::Uniform2 => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    quadrature: QuadratureSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    commutator: CommutatorSection,
    #[serde(default)]
    verify: VerifySection,
    allow_large_d: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    d: Option<usize>,
    omega: Option<f64>,
    lambda: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureSection {
    base_points: Option<usize>,
    tolerance: Option<f64>,
    max_doublings: Option<u32>,
    truncation_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    format: Option<Format>,
    path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    t: Option<Vec<f64>>,
    radius: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommutatorSection {
    f: Option<String>,
    g: Option<String>,
    t: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifySection {
    t: Option<Vec<f64>>,
    t_range: Option<Vec<f64>>,
    samples: Option<usize>,
    x: Option<String>,
    x_max: Option<usize>,
}

/// Fully resolved and validated configuration of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub quadrature: QuadratureSpec,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub command: CommandConfig,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum CommandConfig {
    Kernel {
        t: Vec<f64>,
        radius: usize,
    },
    Commutator {
        f: String,
        g: String,
        t: Vec<f64>,
    },
    Verify {
        target: Target,
        t: Vec<f64>,
        x: Vec<i64>,
        x_max: usize,
        curve_t: Vec<f64>,
    },
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    /// Exit code 2.
    Usage(String),
    /// Exit code 1.
    Compute(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Compute(e) => write!(f, "{}: {e}", variant_name(e)),
        }
    }
}

fn variant_name(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `re+imi` literal: `1`, `-2.5`, `0.5-1.25i`, `3i`, `-i`, `1e-3+2e-1i`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let s = s.trim();
    let bad = || format!("malformed complex literal {s:?}");
    let num = |p: &str| p.parse::<f64>().map_err(|_| bad());
    let z = match s.strip_suffix('i') {
        None => Complex64::new(num(s)?, 0.0),
        Some(body) => {
            let bytes = body.as_bytes();
            let split = (1..bytes.len())
                .rev()
                .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
            let (re, im) = match split {
                Some(i) => (num(&body[..i])?, &body[i..]),
                None => (0.0, body),
            };
            let im = match im {
                "" | "+" => 1.0,
                "-" => -1.0,
                other => num(other)?,
            };
            Complex64::new(re, im)
        }
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(bad())
    }
}

/// `3;-2` into a site of dimension `d`.
pub fn parse_site(s: &str, d: usize) -> Result<LatticeSite, String> {
    let coords = s
        .trim()
        .split(';')
        .map(|c| {
            c.trim()
                .parse::<i64>()
                .map_err(|_| format!("malformed site {s:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if coords.len() != d {
        return Err(format!(
            "site {s:?} has {} coordinates, expected {d}",
            coords.len()
        ));
    }
    Ok(LatticeSite::new(coords))
}

/// Comma-separated `site:value` entries, e.g. `0:1,3:0.5-1.25i`.
pub fn parse_probe(s: &str, d: usize) -> Result<LatticeFunction, String> {
    let mut f = LatticeFunction::zero(d);
    for entry in s.split(',').filter(|e| !e.trim().is_empty()) {
        let (site, value) = entry
            .split_once(':')
            .ok_or_else(|| format!("probe entry {entry:?} is not site:value"))?;
        f.add_at(parse_site(site, d)?, parse_complex(value)?)
            .map_err(|e| e.to_string())?;
    }
    if f.is_empty() {
        return Err(format!("probe {s:?} is zero"));
    }
    Ok(f)
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
}

fn resolve_model(
    d: Option<usize>,
    omega: Option<f64>,
    lambda: Option<Vec<f64>>,
    default_d: usize,
    allow_large_d: bool,
) -> Result<ModelParams, CliError> {
    let lambda = lambda.unwrap_or_else(|| vec![1.0]);
    let d = d.unwrap_or(if lambda.len() > 1 {
        lambda.len()
    } else {
        default_d
    });
    if d == 0 {
        return Err(usage("d must be at least 1"));
    }
    if d > MAX_DEFAULT_D && !allow_large_d {
        return Err(usage(format!(
            "d = {d} exceeds {MAX_DEFAULT_D}; pass --allow-large-d"
        )));
    }
    let lambdas = match lambda.len() {
        1 => vec![lambda[0]; d],
        n if n == d => lambda,
        n => return Err(usage(format!("{n} couplings given for d = {d}"))),
    };
    ModelParams::new(omega.unwrap_or(1.0), lambdas).map_err(|e| usage(e.to_string()))
}

fn check_times(t: &[f64]) -> Result<(), CliError> {
    if t.is_empty() {
        return Err(usage("at least one time is required"));
    }
    match t.iter().find(|t| !t.is_finite()) {
        Some(bad) => Err(usage(format!("time must be finite, got {bad}"))),
        None => Ok(()),
    }
}

/// Merges flags over the file configuration and validates the result.
pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let Cli { common: c, command } = cli;
    let file = match &c.config {
        Some(path) => read_file_config(path)?,
        None => FileConfig::default(),
    };
    let allow_large_d = c.allow_large_d || file.allow_large_d.unwrap_or(false);
    let default_d = match &command {
        Command::Verify { target, .. } => target.default_d(),
        _ => 1,
    };
    let model = resolve_model(
        c.d.or(file.model.d),
        c.omega.or(file.model.omega),
        c.lambda.or(file.model.lambda),
        default_d,
        allow_large_d,
    )?;
    let defaults = QuadratureSpec::default();
    let q = &file.quadrature;
    let quadrature = QuadratureSpec {
        base_points: c
            .base_points
            .or(q.base_points)
            .unwrap_or(defaults.base_points),
        tolerance: c.tolerance.or(q.tolerance).unwrap_or(defaults.tolerance),
        max_doublings: c
            .max_doublings
            .or(q.max_doublings)
            .unwrap_or(defaults.max_doublings),
        truncation_tolerance: c
            .truncation_tolerance
            .or(q.truncation_tolerance)
            .unwrap_or(defaults.truncation_tolerance),
        ..defaults
    };
    quadrature.validate().map_err(|e| usage(e.to_string()))?;
    let d = model.d();

    let command = match command {
        Command::Kernel { t, radius } => {
            let t = t
                .or(file.kernel.t)
                .ok_or_else(|| usage("kernel needs --t"))?;
            check_times(&t)?;
            CommandConfig::Kernel {
                t,
                radius: radius.or(file.kernel.radius).unwrap_or(4),
            }
        }
        Command::Commutator { f, g, t } => {
            let f = f
                .or(file.commutator.f)
                .ok_or_else(|| usage("commutator needs --f"))?;
            let g = g
                .or(file.commutator.g)
                .ok_or_else(|| usage("commutator needs --g"))?;
            parse_probe(&f, d).map_err(usage)?;
            parse_probe(&g, d).map_err(usage)?;
            let t = t
                .or(file.commutator.t)
                .ok_or_else(|| usage("commutator needs --t"))?;
            check_times(&t)?;
            CommandConfig::Commutator { f, g, t }
        }
        Command::Verify {
            target,
            t,
            t_range,
            samples,
            x,
            x_max,
        } => {
            let v = file.verify;
            let explicit = t.or(v.t);
            let range = t_range.or(v.t_range);
            let samples = samples.or(v.samples);
            let t = match (explicit, range) {
                (Some(_), Some(_)) => return Err(usage("give either --t or --t-range")),
                (Some(t), None) => t,
                (None, range) => default_times(target, d, range, samples)?,
            };
            check_times(&t)?;
            let x = match x.or(v.x) {
                Some(s) => parse_site(&s, d).map_err(usage)?.coords().to_vec(),
                None => vec![0; d],
            };
            let t_max = t.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let x_max = x_max.or(v.x_max).unwrap_or_else(|| {
                (2.0 * t_max * model.coupling_sum() / model.omega()).ceil() as usize + 16
            });
            let curve_t = match target {
                Target::Cone => geometric_samples(1.0, if d == 1 { 1000.0 } else { 100.0 }, 30),
                _ => Vec::new(),
            };
            CommandConfig::Verify {
                target,
                t,
                x,
                x_max,
                curve_t,
            }
        }
        Command::Selftest => CommandConfig::Selftest,
    };
    Ok(RunConfig {
        model,
        quadrature,
        format: c.format.or(file.output.format).unwrap_or(Format::Csv),
        output: c.output.or(file.output.path),
        command,
    })
}

fn default_times(
    target: Target,
    d: usize,
    range: Option<Vec<f64>>,
    samples: Option<usize>,
) -> Result<Vec<f64>, CliError> {
    if target == Target::Cone {
        if range.is_some() || samples.is_some() {
            return Err(usage("figure-1 takes an explicit --t list"));
        }
        return Ok(vec![0.0, 5.0, 10.0, 20.0, 40.0]);
    }
    if matches!(target, Target::Uniform1 | Target::Uniform2) && range.is_none() && samples.is_none()
    {
        return Ok(vec![10.0, 20.0, 40.0, 80.0]);
    }
    let (lo, hi) = match range {
        Some(r) if r.len() == 2 => (r[0], r[1]),
        Some(r) => {
            return Err(usage(format!(
                "--t-range takes two values, got {}",
                r.len()
            )))
        }
        None if target == Target::FixedX && d == 1 => (20.0, 200.0),
        None => (10.0, 100.0),
    };
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(usage(format!("bad time range [{lo}, {hi}]")));
    }
    let n = samples.unwrap_or(if target == Target::FixedX { 25 } else { 4 });
    if n < 2 {
        return Err(usage("need at least two samples"));
    }
    Ok(geometric_samples(lo, hi, n))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn write_csv(&self, out: &mut String) {
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: String,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, value: f64, threshold: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
            threshold: threshold.into(),
            detail: String::new(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self::new(name, false, f64::NAN, "").with_detail(CliError::Compute(err.clone()).to_string())
    }

    fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value < limit, value, format!("< {}", fmt_num(limit)))
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: RunConfig,
    pub results: Table,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn checks_table(&self) -> Table {
        let mut t = Table::new(&["check", "status", "value", "threshold", "detail"]);
        for c in &self.checks {
            t.rows.push(vec![
                Cell::Text(c.name.clone()),
                Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
                Cell::Num(c.value),
                Cell::Text(c.threshold.clone()),
                Cell::Text(c.detail.clone()),
            ]);
        }
        t
    }

    pub fn render(&self) -> String {
        match self.config.format {
            Format::Csv => {
                let mut out = String::new();
                if !self.results.columns.is_empty() {
                    self.results.write_csv(&mut out);
                    if !self.checks.is_empty() {
                        out.push('\n');
                    }
                }
                if !self.checks.is_empty() {
                    self.checks_table().write_csv(&mut out);
                }
                out
            }
            Format::Json => {
                let doc = json!({
                    "config": serde_json::to_value(&self.config).expect("config serializes"),
                    "results": self.results.to_json(),
                    "checks": serde_json::to_value(&self.checks).expect("checks serialize"),
                    "version": env!("CARGO_PKG_VERSION"),
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("json");
                s.push('\n');
                s
            }
        }
    }
}

fn model_cells(p: &ModelParams) -> [Cell; 3] {
    [
        Cell::Int(p.d() as i64),
        Cell::Num(p.omega()),
        Cell::Text(fmt_list(p.lambdas())),
    ]
}

fn cmd_kernel(cfg: &RunConfig, t: &[f64], radius: usize) -> Result<Table, CliError> {
    let mut table = Table::new(&[
        "d",
        "omega",
        "lambdas",
        "m",
        "t",
        "x",
        "value",
        "resolution",
        "est_error",
    ]);
    for &ti in t {
        let k = kernel_table(&cfg.model, ti, radius, &cfg.quadrature)?;
        for m in KernelIndex::ALL {
            for (x, v) in k.sites().zip(k.values(m)) {
                let mut row = model_cells(&cfg.model).to_vec();
                row.extend([
                    Cell::Int(m.order() as i64),
                    Cell::Num(ti),
                    Cell::Text(x.to_string()),
                    Cell::Num(*v),
                    Cell::Int(k.resolution() as i64),
                    Cell::Num(k.est_error()),
                ]);
                table.rows.push(row);
            }
        }
    }
    Ok(table)
}

fn cmd_commutator(
    cfg: &RunConfig,
    f: &str,
    g: &str,
    t: &[f64],
) -> Result<(Table, Vec<Check>), CliError> {
    let d = cfg.model.d();
    let f = parse_probe(f, d).map_err(usage)?;
    let g = parse_probe(g, d).map_err(usage)?;
    let mut table = Table::new(&["d", "omega", "lambdas", "t", "norm", "bound", "phase"]);
    let mut checks = Vec::new();
    for &ti in t {
        let r = commutator_report(&cfg.model, &f, &g, ti, &cfg.quadrature)?;
        let mut row = model_cells(&cfg.model).to_vec();
        row.extend([
            Cell::Num(ti),
            Cell::Num(r.norm),
            Cell::Num(r.bound),
            Cell::Num(r.phase),
        ]);
        table.rows.push(row);
        let limit = r.bound.min(2.0) + 1e-8;
        checks.push(Check::new(
            format!("norm-le-bound t={}", fmt_num(ti)),
            r.norm <= limit,
            r.norm,
            format!("<= {}", fmt_num(limit)),
        ));
    }
    Ok((table, checks))
}

fn cmd_verify(
    cfg: &RunConfig,
    target: Target,
    t: &[f64],
    x: &[i64],
    x_max: usize,
    curve_t: &[f64],
) -> Result<(Table, Vec<Check>), CliError> {
    let p = &cfg.model;
    let spec = &cfg.quadrature;
    match target {
        Target::Uniform1 | Target::Uniform2 => {
            let effective = reduce_degenerate(p).active_axes.len();
            let wanted_two = target == Target::Uniform2;
            if effective == 0 || (effective >= 2) != wanted_two {
                return Err(usage(format!(
                    "model has {effective} coupled axes; thm-2.1 needs at least 2, thm-2.2 exactly 1"
                )));
            }
            let r = verify_uniform_decay(p, t, spec)?;
            let mut table = Table::new(&["t", "sup", "rescaled"]);
            for row in &r.rows {
                table.rows.push(vec![
                    Cell::Num(row.t),
                    Cell::Num(row.sup),
                    Cell::Num(row.rescaled),
                ]);
            }
            let check = Check::new(
                "rescaled-slope",
                r.pass,
                r.slope,
                format!("<= {}", fmt_num(r.threshold)),
            )
            .with_detail(format!(
                "effective d {}, rate {}, max rescaled {}",
                r.effective_d,
                fmt_num(r.rate),
                fmt_num(r.max_rescaled)
            ));
            Ok((table, vec![check]))
        }
        Target::FixedX => {
            let site = LatticeSite::new(x.to_vec());
            let r = verify_fixed_x_decay(p, &site, t, spec)?;
            let mut table = Table::new(&["t", "kernel", "commutator"]);
            for s in &r.samples {
                table.rows.push(vec![
                    Cell::Num(s.t),
                    Cell::Num(s.kernel),
                    Cell::Num(s.commutator),
                ]);
            }
            let d = p.d() as f64;
            let tol = if p.d() == 1 { 0.1 } else { 0.15 };
            let (lo, hi) = (-d / 2.0 - tol, -d / 2.0 + tol);
            let warn = if r.oscillation_warning {
                "oscillating; envelope fit"
            } else {
                "envelope fit"
            };
            let within = |e: f64| (lo..=hi).contains(&e);
            let range = format!("[{}, {}]", fmt_num(lo), fmt_num(hi));
            let checks = vec![
                Check::new(
                    "kernel-exponent",
                    within(r.kernel_fit.exponent),
                    r.kernel_fit.exponent,
                    &range,
                )
                .with_detail(format!("{warn}, {} points", r.kernel_fit.n_points)),
                Check::new(
                    "commutator-exponent",
                    within(r.commutator_fit.exponent),
                    r.commutator_fit.exponent,
                    &range,
                )
                .with_detail(format!("{warn}, {} points", r.commutator_fit.n_points)),
            ];
            Ok((table, checks))
        }
        Target::Cone => {
            let scan = cone_scan(p, t, x_max, spec)?;
            let mut table = Table::new(&["t", "r", "value", "region"]);
            for (ti, row) in scan.values.iter().enumerate() {
                for (r, v) in row.iter().enumerate() {
                    table.rows.push(vec![
                        Cell::Num(scan.t_samples[ti]),
                        Cell::Int(r as i64),
                        Cell::Num(*v),
                        Cell::Text(scan.region(ti, r).label().into()),
                    ]);
                }
            }
            let mut checks = Vec::new();
            let all: Vec<f64> = scan.values.iter().flatten().copied().collect();
            let in_range = all.iter().all(|v| (0.0..=2.0).contains(v));
            checks.push(Check::new(
                "values-in-range",
                in_range,
                all.iter().fold(0.0, |a, b| a.max(*b)),
                "[0, 2]",
            ));
            if let Some(i0) = scan.t_samples.iter().position(|&t| t == 0.0) {
                let off = scan.values[i0]
                    .iter()
                    .skip(1)
                    .fold(0.0f64, |a, b| a.max(*b));
                checks.push(Check::new("t0-column-vanishes", off == 0.0, off, "= 0"));
            }
            let speed = 2.0 * p.coupling_sum() / p.omega();
            let (mut worst, mut cells) = (0.0f64, 0usize);
            for (ti, row) in scan.values.iter().enumerate() {
                let edge = 2.0 * speed * scan.t_samples[ti].abs() + 8.0;
                for (r, v) in row.iter().enumerate().filter(|(r, _)| *r as f64 >= edge) {
                    cells += 1;
                    worst = worst.max(*v);
                    debug_assert!(scan.region(ti, r) == Region::classify(*v));
                }
            }
            let cone = scan
                .empirical_cone_speed()
                .map_or("none".to_string(), fmt_num);
            checks.push(
                Check::below("outside-cone-exponential", worst, EXPONENTIAL_THRESHOLD).with_detail(
                    format!(
                    "{cells} cells with |x|_1 >= 2 v t + 8, v = {}; empirical cone speed {cone}",
                    fmt_num(speed)
                ),
                ),
            );
            let curve = boundary_curve_decay(p, curve_t, spec)?;
            let limit = -(p.d() as f64) / 2.0 + 0.15;
            checks.push(
                Check::new(
                    "boundary-curve-exponent",
                    curve.fit.exponent <= limit,
                    curve.fit.exponent,
                    format!("<= {}", fmt_num(limit)),
                )
                .with_detail(format!(
                    "|x|_1 = round(t^(1/(2(d+3)))), t in [{}, {}]",
                    fmt_num(curve_t[0]),
                    fmt_num(curve_t[curve_t.len() - 1])
                )),
            );
            Ok((table, checks))
        }
    }
}

fn probe(d: usize, entries: &[(i64, f64, f64)]) -> LatticeFunction {
    LatticeFunction::from_entries(
        d,
        entries.iter().map(|&(x, re, im)| {
            let mut c = vec![0; d];
            c[0] = x;
            if d > 1 {
                c[d - 1] = -x.signum();
            }
            (LatticeSite::new(c), Complex64::new(re, im))
        }),
    )
    .expect("fixed probe")
}

fn cmd_selftest(spec: &QuadratureSpec) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut record = |name: String, r: Result<Check, Error>| {
        checks.push(r.unwrap_or_else(|e| Check::failed(name, &e)));
    };

    for d in 1..=3 {
        let name = format!("kernel-t0-identities d={d}");
        record(
            name.clone(),
            (|| {
                let p = ModelParams::isotropic(d, 1.0, 1.0)?;
                let k = kernel_table(&p, 0.0, 4, spec)?;
                let mut dev = 0.0f64;
                for m in KernelIndex::ALL {
                    for (x, v) in k.sites().zip(k.values(m)) {
                        let want = if m == KernelIndex::Zero && x.l1_norm() == 0 {
                            1.0
                        } else {
                            0.0
                        };
                        dev = dev.max((v - want).abs());
                    }
                }
                Ok(Check::below(name, dev, 1e-10))
            })(),
        );
    }

    for d in 1..=3 {
        let name = format!("gaussian-oracle-t0 d={d}");
        record(
            name.clone(),
            (|| {
                let v = gaussian_quadratic_selftest(d, &vec![1; d], 0.0)?;
                let want = PI.powf(d as f64 / 2.0);
                Ok(Check::below(name, (v - want).abs(), 1e-14)
                    .with_detail(format!("value {} vs pi^(d/2)", fmt_num(v))))
            })(),
        );
    }

    let name = "gaussian-oracle-decay".to_string();
    record(
        name.clone(),
        (|| {
            let mut dev = 0.0f64;
            let mut above = false;
            for d in 1..=3usize {
                for t in [1.0, 5.0, 25.0] {
                    let sig: Vec<i8> = (0..d).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect();
                    let v = gaussian_quadratic_selftest(d, &sig, t)?;
                    let closed = (PI / (1.0 + t * t).sqrt()).powf(d as f64 / 2.0);
                    dev = dev.max((v - closed).abs());
                    above |= v > gaussian_quadratic_bound(d, t);
                }
            }
            let c = Check::below(name, dev, 1e-10);
            Ok(Check {
                pass: c.pass && !above,
                ..c
            })
        })(),
    );

    let name = "bessel-oracle".to_string();
    record(
        name.clone(),
        (|| {
            let p = ModelParams::massless(vec![1.0])?;
            let mut dev = 0.0f64;
            for t in [1.0, 5.0] {
                for x in -10..=10 {
                    let q =
                        kernel_value(&p, KernelIndex::Zero, t, &LatticeSite::new(vec![x]), spec)?;
                    dev = dev.max((q - bessel_oracle_1d(1.0, t, x)).abs());
                }
            }
            Ok(Check::below(name, dev, 1e-8))
        })(),
    );

    for d in 1..=2 {
        let p = ModelParams::isotropic(d, 1.0, 1.0).expect("valid model");
        let f = probe(d, &[(0, 0.6, -0.3), (2, -0.2, 0.5)]);
        let g = probe(d, &[(-1, 0.1, 0.7), (1, 0.4, 0.4), (3, -0.5, 0.0)]);

        let name = format!("symplectic-invariance d={d}");
        record(
            name.clone(),
            (|| {
                let before = symplectic_form(&f, &g)?;
                let after = symplectic_form(
                    &evolve(&p, &f, 2.0, spec)?.function,
                    &evolve(&p, &g, 2.0, spec)?.function,
                )?;
                Ok(Check::below(name, (after - before).abs(), 1e-6))
            })(),
        );

        let name = format!("group-law d={d}");
        record(
            name.clone(),
            (|| {
                let once = evolve(&p, &f, 1.0, spec)?.function;
                let twice = evolve(&p, &once, 1.0, spec)?.function;
                let direct = evolve(&p, &f, 2.0, spec)?.function;
                Ok(Check::below(name, twice.max_abs_diff(&direct), 1e-6))
            })(),
        );

        let name = format!("norm-below-bound d={d}");
        record(
            name.clone(),
            (|| {
                let mut slack = f64::INFINITY;
                for t in [0.0, 0.5, 2.0, 10.0] {
                    let r = commutator_report(&p, &f, &g, t, spec)?;
                    slack = slack.min(r.bound.min(2.0) + 1e-8 - r.norm);
                }
                Ok(Check::new(name, slack >= 0.0, slack, ">= 0"))
            })(),
        );
    }

    let name = "finite-volume-L64".to_string();
    record(
        name.clone(),
        (|| {
            let p = ModelParams::isotropic(1, 1.0, 1.0)?;
            let f = LatticeFunction::delta(LatticeSite::origin(1));
            Ok(Check::below(
                name,
                compare_finite_infinite(&p, 64, &f, 2.0, spec)?,
                1e-8,
            ))
        })(),
    );

    checks
}

/// Runs a resolved configuration.
pub fn execute(cfg: RunConfig) -> Result<Report, CliError> {
    let (results, checks) = match &cfg.command {
        CommandConfig::Kernel { t, radius } => (cmd_kernel(&cfg, t, *radius)?, Vec::new()),
        CommandConfig::Commutator { f, g, t } => cmd_commutator(&cfg, f, g, t)?,
        CommandConfig::Verify {
            target,
            t,
            x,
            x_max,
            curve_t,
        } => cmd_verify(&cfg, *target, t, x, *x_max, curve_t)?,
        CommandConfig::Selftest => (Table::default(), cmd_selftest(&cfg.quadrature)),
    };
    Ok(Report {
        config: cfg,
        results,
        checks,
    })
}

/// Parses `args`, runs the command, writes the output and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(cli).and_then(execute) {
        Ok(report) => {
            let text = report.render();
            let written = match &report.config.output {
                Some(path) => fs::write(path, &text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("cannot write output: {e}");
                return 1;
            }
            if report.passed() {
                0
            } else {
                let mut msg = String::new();
                for c in report.checks.iter().filter(|c| !c.pass) {
                    let _ = writeln!(msg, "FAIL {}: {}", c.name, c.detail);
                }
                eprint!("{msg}");
                1
            }
        }
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => 2,
                CliError::Compute(_) => 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let c = |re, im| Complex64::new(re, im);
        assert_eq!(parse_complex("1"), Ok(c(1.0, 0.0)));
        assert_eq!(parse_complex("-2.5"), Ok(c(-2.5, 0.0)));
        assert_eq!(parse_complex("0.5-1.25i"), Ok(c(0.5, -1.25)));
        assert_eq!(parse_complex("3i"), Ok(c(0.0, 3.0)));
        assert_eq!(parse_complex("-i"), Ok(c(0.0, -1.0)));
        assert_eq!(parse_complex("1+i"), Ok(c(1.0, 1.0)));
        assert_eq!(parse_complex("1e-3+2e-1i"), Ok(c(1e-3, 0.2)));
        assert_eq!(parse_complex("-1e+2-3E-1i"), Ok(c(-100.0, -0.3)));
        for bad in ["", "i1", "1+2", "abc", "1+2j", "nan", "inf"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn probes_and_sites() {
        let f = parse_probe("0:1,3:0.5-1.25i", 1).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(
            f.get(&LatticeSite::new(vec![3])),
            Complex64::new(0.5, -1.25)
        );
        assert_eq!(parse_site("3;-2", 2).unwrap().to_string(), "3;-2");
        assert!(parse_site("3", 2).is_err());
        assert!(parse_probe("1;1:1", 1).is_err());
        assert!(parse_probe("0:1,0:-1", 1).is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn model_resolution() {
        let p = resolve_model(Some(3), None, Some(vec![0.5]), 1, false).unwrap();
        assert_eq!(p.lambdas(), &[0.5, 0.5, 0.5]);
        let p = resolve_model(None, Some(2.0), Some(vec![1.0, 0.0]), 1, false).unwrap();
        assert_eq!(p.d(), 2);
        assert!(resolve_model(Some(3), None, Some(vec![1.0, 2.0]), 1, false).is_err());
        assert!(resolve_model(Some(5), None, None, 1, false).is_err());
        assert!(resolve_model(Some(5), None, None, 1, true).is_ok());
        assert!(resolve_model(None, Some(0.0), None, 1, false).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("hl-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        fs::write(
            &path,
            "[model]\nd = 2\nomega = 2.0\nlambda = [1.0]\n[kernel]\nt = [1.5]\nradius = 3\n[output]\nformat = \"json\"\n",
        )
        .unwrap();
        let cli = Cli::try_parse_from([
            "hl",
            "kernel",
            "--config",
            path.to_str().unwrap(),
            "--omega",
            "3",
        ])
        .unwrap();
        let cfg = resolve(cli).unwrap();
        assert_eq!(cfg.model.omega(), 3.0);
        assert_eq!(cfg.model.d(), 2);
        assert_eq!(cfg.format, Format::Json);
        match cfg.command {
            CommandConfig::Kernel { t, radius } => {
                assert_eq!(t, vec![1.5]);
                assert_eq!(radius, 3);
            }
            other => panic!("{other:?}"),
        }
        fs::remove_dir_all(dir).unwrap();
    }
}
