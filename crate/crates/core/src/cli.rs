//! Command-line front end. Each command reads a JSON config, rejects unknown
//! keys, and writes its output with the fully resolved config embedded.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error,
//! 3 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{self, AlphaReport, EstimateSettings, RunMeta, TailReport};
use crate::model::{CorrelationMatrix, EllipticalModel, ModelSpec};
use crate::oracle::{self, SlopeFit};
use crate::qp::{self, LemmaBranch};
use crate::sampling::{sample_elliptical, SampleMatrix};
use crate::theory::{self, Convention};
use crate::verify::{self, Level, VerifyOptions, VerifyReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "TAILDEP_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "taildep", version, about = "Residual dependence indices of elliptical distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; standard output when omitted (simulate requires a path).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample from an elliptical model and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate tail dependence from a CSV sample.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of upper order statistics.
        #[arg(long)]
        kn: Option<usize>,
    },
    /// Solve the constrained quadratic program for a correlation matrix.
    Alpha {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tabulate oracle tail probabilities, expansions and slope fits.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the acceptance battery.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        level: Option<Level>,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Adopted,
    PaperLiteral,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Adopted => Convention::Adopted,
            ConventionArg::PaperLiteral => Convention::PaperLiteral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    /// Number of rows.
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// CSV path; the sidecar is written next to it with `.json` appended.
    #[serde(default)]
    pub output: Option<String>,
}

/// Sidecar written next to a simulated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulateSidecar {
    pub tool_version: String,
    pub config: SimulateConfig,
    pub rows: usize,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// CSV input with a header row.
    pub input: String,
    #[serde(default)]
    pub output: Option<String>,
    /// Upper order statistics; defaults to `⌊n^0.4⌋`.
    #[serde(default)]
    pub kn: Option<usize>,
    /// 1-based column subsets for partial indices.
    #[serde(default)]
    pub subsets: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub chi_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub s_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub s_points: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EstimateOutput {
    pub config: EstimateConfig,
    pub report: TailReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub correlation: Vec<Vec<f64>>,
    /// 1-based index set; all coordinates when omitted.
    #[serde(default)]
    pub index_set: Option<Vec<usize>>,
    /// Weibull tail coefficient used for `η_I`; defaults to 2.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConventionValues<T> {
    /// `η_I = q^{-θ/2}`, `γ_j = μ_j α^{θ-2}`.
    pub adopted: T,
    /// `η_I = q^{-θ}`, `γ_j = μ_j q^{θ-1}`.
    pub paper_literal: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LemmaReport {
    /// `"full"` or `"pair"`.
    pub branch: String,
    /// `1 + 2ρ_min - ρ12 - ρ13 - ρ23`.
    pub condition: f64,
    /// Active pair, 1-based, for the pair branch.
    pub pair: Option<[usize; 2]>,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AlphaOutput {
    pub config: AlphaConfig,
    pub solution: AlphaReport,
    pub eta_i: ConventionValues<f64>,
    pub gamma: ConventionValues<Vec<f64>>,
    /// Closed-form cross-check when the index set has three elements.
    pub lemma: Option<LemmaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub model: ModelSpec,
    /// 1-based index set of size 2 or 3; all coordinates when omitted.
    #[serde(default)]
    pub index_set: Option<Vec<usize>>,
    /// Levels `u`; defaults to `1e2, 1e3, …, 1e6`.
    #[serde(default)]
    pub u_grid: Option<Vec<f64>>,
    /// Points `x` at which `S_u(x) = S̃_u(x)/S̃_u(1)` is tabulated.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Thresholds for `χ(u)` on bivariate models.
    #[serde(default)]
    pub chi_levels: Option<Vec<f64>>,
    /// Convention for the predicted slope of partial indices.
    #[serde(default)]
    pub convention: Option<Convention>,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OracleRow {
    pub u: f64,
    pub ln_s_tilde: f64,
    /// General expansion of `ln S̃_u(1,1)` (bivariate models).
    pub ln_expansion: Option<f64>,
    /// Closed-form expansion for Kotz Type III radii.
    pub ln_kotz_closed: Option<f64>,
    /// Oracle value divided by the general expansion.
    pub expansion_ratio: Option<f64>,
    /// `S_u(x)` for each configured point.
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SlopeReport {
    pub slope: f64,
    pub intercept: f64,
    pub max_linear_residual: f64,
    /// `-1/η` from closed forms, when the radius has a Weibull tail coefficient.
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ChiPoint {
    pub level: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OracleOutput {
    pub config: OracleConfig,
    pub rows: Vec<OracleRow>,
    /// Absent when the grid is too short for a fit.
    pub slope: Option<SlopeReport>,
    pub chi: Vec<ChiPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub level: Option<VerifyLevel>,
    #[serde(default)]
    pub convention: Option<Convention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Quick,
    Full,
}

impl From<VerifyLevel> for Level {
    fn from(l: VerifyLevel) -> Self {
        match l {
            VerifyLevel::Quick => Level::Quick,
            VerifyLevel::Full => Level::Full,
        }
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("taildep: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate { common, seed } => {
            let mut cfg: SimulateConfig = load_config(common.config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(out) = &common.out {
                cfg.output = Some(out.display().to_string());
            }
            cmd_simulate(&cfg)?;
        }
        Command::Estimate { common, kn } => {
            let mut cfg: EstimateConfig = load_config(common.config.as_deref())?;
            if kn.is_some() {
                cfg.kn = kn;
            }
            override_output(&mut cfg.output, &common.out);
            let out = cmd_estimate(&cfg)?;
            write_json(&out, out.config.output.as_deref())?;
        }
        Command::Alpha { common } => {
            let mut cfg: AlphaConfig = load_config(common.config.as_deref())?;
            override_output(&mut cfg.output, &common.out);
            let out = cmd_alpha(&cfg)?;
            write_json(&out, out.config.output.as_deref())?;
        }
        Command::Oracle { common } => {
            let mut cfg: OracleConfig = load_config(common.config.as_deref())?;
            override_output(&mut cfg.output, &common.out);
            let out = cmd_oracle(&cfg)?;
            write_json(&out, out.config.output.as_deref())?;
        }
        Command::Verify { common, level, convention } => {
            let cfg: VerifyConfig = match &common.config {
                Some(p) => load_config(Some(p))?,
                None => VerifyConfig::default(),
            };
            let opts = VerifyOptions {
                level: level.or(cfg.level.map(Level::from)).unwrap_or(Level::Quick),
                convention: convention.map(Convention::from).or(cfg.convention).unwrap_or_default(),
            };
            let report = cmd_verify(&opts, &mut std::io::stdout())?;
            if let Some(out) = &common.out {
                write_json(&report, Some(&out.display().to_string()))?;
            }
            return Ok(if report.all_passed { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn override_output(output: &mut Option<String>, out: &Option<PathBuf>) {
    if let Some(o) = out {
        *output = Some(o.display().to_string());
    }
}

/// Reads and parses a JSON config, rejecting unknown keys.
pub fn load_config<T: DeserializeOwned>(path: Option<&Path>) -> Result<T, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: Option<&str>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Runtime(format!("{p}: {e}"))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(runtime_err),
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a sample as CSV with header `x1,…,xk`.
pub fn write_csv<W: Write>(sample: &SampleMatrix, writer: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=sample.k).map(|j| format!("x{j}"))).map_err(runtime_err)?;
    for i in 0..sample.n {
        w.write_record(sample.row(i).iter().map(|&v| format_f64(v))).map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)
}

/// Reads a numeric CSV with a header row. Malformed rows are reported with
/// their line number.
pub fn read_csv(path: &Path) -> Result<SampleMatrix, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let k = r.headers().map_err(config_err)?.len();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Config(format!("{}: line {line}, column {}: {field:?} is not a number", path.display(), j + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Config(format!("{}: line {line}, column {}: non-finite value", path.display(), j + 1)));
            }
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok(SampleMatrix::from_rows(data, k))
}

pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<SimulateSidecar, CliError> {
    let model = cfg.model.build().map_err(config_err)?;
    if cfg.n == 0 {
        return Err(CliError::Config("n must be positive".into()));
    }
    let out = cfg
        .output
        .as_deref()
        .ok_or_else(|| CliError::Config("simulate needs an output path (--out or \"output\")".into()))?;
    let sample = sample_elliptical(&model, cfg.n, cfg.seed).map_err(runtime_err)?;
    let file = fs::File::create(out).map_err(|e| CliError::Runtime(format!("{out}: {e}")))?;
    write_csv(&sample, std::io::BufWriter::new(file))?;
    let sidecar = SimulateSidecar {
        tool_version: TOOL_VERSION.to_string(),
        config: SimulateConfig { model: model.spec(), ..cfg.clone() },
        rows: sample.n,
        columns: sample.k,
    };
    write_json(&sidecar, Some(&format!("{out}.json")))?;
    Ok(sidecar)
}

/// Fills defaults into an estimation config for a sample of shape `n × k`.
pub fn resolve_estimate(cfg: &EstimateConfig, n: usize, k: usize) -> EstimateConfig {
    let d = EstimateSettings::defaults(n, k);
    EstimateConfig {
        input: cfg.input.clone(),
        output: cfg.output.clone(),
        kn: Some(cfg.kn.unwrap_or(d.kn)),
        subsets: Some(cfg.subsets.clone().unwrap_or(d.subsets)),
        chi_levels: Some(cfg.chi_levels.clone().unwrap_or(d.chi_levels)),
        s_levels: Some(cfg.s_levels.clone().unwrap_or(d.s_levels)),
        s_points: Some(cfg.s_points.clone().unwrap_or(d.s_points)),
    }
}

pub fn cmd_estimate(cfg: &EstimateConfig) -> Result<EstimateOutput, CliError> {
    let input = Path::new(&cfg.input);
    let data = read_csv(input)?;
    if data.k < 2 {
        return Err(CliError::Config(format!("{}: need at least 2 columns, found {}", cfg.input, data.k)));
    }
    let resolved = resolve_estimate(cfg, data.n, data.k);
    let settings = EstimateSettings {
        kn: resolved.kn.expect("resolved"),
        subsets: resolved.subsets.clone().expect("resolved"),
        chi_levels: resolved.chi_levels.clone().expect("resolved"),
        s_levels: resolved.s_levels.clone().expect("resolved"),
        s_points: resolved.s_points.clone().expect("resolved"),
    };
    for s in &settings.subsets {
        if s.len() < 2 || s.iter().any(|&c| c == 0 || c > data.k) {
            return Err(CliError::Config(format!("subset {s:?} must hold at least 2 columns in 1..={}", data.k)));
        }
    }
    let sidecar: Option<SimulateSidecar> = fs::read_to_string(format!("{}.json", cfg.input))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let meta = RunMeta {
        tool_version: TOOL_VERSION.to_string(),
        input: Some(cfg.input.clone()),
        seed: sidecar.as_ref().map(|s| s.config.seed),
        model: sidecar.map(|s| s.config.model),
    };
    let report = estimators::estimate_report(&data, &settings, meta).map_err(runtime_err)?;
    Ok(EstimateOutput { config: resolved, report })
}

fn zero_based(index_set: &[usize], dim: usize) -> Result<Vec<usize>, CliError> {
    index_set
        .iter()
        .map(|&i| {
            if i == 0 || i > dim {
                Err(CliError::Config(format!("index {i} outside 1..={dim}")))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

pub fn cmd_alpha(cfg: &AlphaConfig) -> Result<AlphaOutput, CliError> {
    let sigma = CorrelationMatrix::new(&cfg.correlation).map_err(config_err)?;
    let index_set = cfg.index_set.clone().unwrap_or_else(|| (1..=sigma.dim()).collect());
    let theta = cfg.theta.unwrap_or(2.0);
    let idx = zero_based(&index_set, sigma.dim())?;
    let sol = qp::solve_alpha(&sigma, &idx).map_err(config_err)?;
    let pi = theory::partial_index(&sol, theta).map_err(config_err)?;
    let lemma = if idx.len() == 3 {
        let mut s = idx.clone();
        s.sort_unstable();
        let t = qp::trivariate_alpha(sigma.get(s[0], s[1]), sigma.get(s[0], s[2]), sigma.get(s[1], s[2]))
            .map_err(runtime_err)?;
        Some(match t.branch {
            LemmaBranch::Full { condition } => {
                LemmaReport { branch: "full".into(), condition, pair: None, q: t.solution.q }
            }
            LemmaBranch::Pair { i, j, condition } => LemmaReport {
                branch: "pair".into(),
                condition,
                pair: Some([s[i] + 1, s[j] + 1]),
                q: t.solution.q,
            },
        })
    } else {
        None
    };
    Ok(AlphaOutput {
        config: AlphaConfig { index_set: Some(index_set), theta: Some(theta), ..cfg.clone() },
        solution: AlphaReport::from(&sol),
        eta_i: ConventionValues { adopted: pi.eta_i, paper_literal: pi.eta_i_literal },
        gamma: ConventionValues { adopted: pi.gamma.clone(), paper_literal: pi.gamma_literal.clone() },
        lemma,
    })
}

fn default_points(m: usize) -> Vec<Vec<f64>> {
    if m == 2 {
        vec![vec![0.5, 0.5], vec![2.0, 2.0], vec![0.5, 2.0]]
    } else {
        vec![vec![0.5; m], vec![2.0; m]]
    }
}

/// Fills defaults into an oracle config.
pub fn resolve_oracle(cfg: &OracleConfig, dim: usize) -> OracleConfig {
    let index_set = cfg.index_set.clone().unwrap_or_else(|| (1..=dim).collect());
    let m = index_set.len();
    OracleConfig {
        model: cfg.model.clone(),
        u_grid: Some(cfg.u_grid.clone().unwrap_or_else(|| oracle::decade_grid(2, 6))),
        points: Some(cfg.points.clone().unwrap_or_else(|| default_points(m))),
        chi_levels: Some(cfg.chi_levels.clone().unwrap_or_default()),
        convention: Some(cfg.convention.unwrap_or_default()),
        output: cfg.output.clone(),
        index_set: Some(index_set),
    }
}

fn predicted_slope(model: &EllipticalModel, idx: &[usize], convention: Convention) -> Option<f64> {
    let theta = model.radial().weibull_tail_coefficient()?;
    let sol = qp::solve_alpha(model.sigma(), idx).ok()?;
    let pi = theory::partial_index(&sol, theta).ok()?;
    Some(-1.0 / pi.eta(convention))
}

pub fn cmd_oracle(cfg: &OracleConfig) -> Result<OracleOutput, CliError> {
    let model = cfg.model.build().map_err(config_err)?;
    let resolved = resolve_oracle(cfg, model.dim());
    let index_set = resolved.index_set.clone().expect("resolved");
    let idx = zero_based(&index_set, model.dim())?;
    if !(2..=3).contains(&idx.len()) {
        return Err(CliError::Config(format!("index set {index_set:?} must have 2 or 3 elements")));
    }
    let grid = resolved.u_grid.clone().expect("resolved");
    let points = resolved.points.clone().expect("resolved");
    if grid.is_empty() || grid.iter().any(|&u| !(u > 2.0 && u.is_finite())) {
        return Err(CliError::Config("u_grid must hold finite levels above 2".into()));
    }
    if points.iter().any(|p| p.len() != idx.len() || p.iter().any(|&x| !(x > 0.0))) {
        return Err(CliError::Config(format!("each point needs {} positive coordinates", idx.len())));
    }
    let ones = vec![1.0; idx.len()];
    let rows: Vec<OracleRow> = grid
        .par_iter()
        .map(|&u| {
            let fail = |e: oracle::OracleError| CliError::Runtime(format!("oracle failed at u = {u:e}: {e}"));
            let ln_s = oracle::s_tilde(&model, &idx, &ones, u).map_err(fail)?;
            let s = points
                .iter()
                .map(|p| Ok((oracle::s_tilde(&model, &idx, p, u).map_err(fail)? - ln_s).exp()))
                .collect::<Result<Vec<f64>, CliError>>()?;
            let bivariate = idx.len() == 2 && model.dim() == 2;
            let exp = if bivariate { theory::stilde_expansion(&model, u).ok() } else { None };
            let ln_expansion = exp.map(|e| e.ln_general);
            Ok(OracleRow {
                u,
                ln_s_tilde: ln_s,
                ln_expansion,
                ln_kotz_closed: exp.and_then(|e| e.ln_kotz_closed),
                expansion_ratio: ln_expansion.map(|l| (ln_s - l).exp()),
                s,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let slope = oracle::check_grid(&grid).ok().map(|_| {
        let fit = SlopeFit::from_values(grid.clone(), rows.iter().map(|r| r.ln_s_tilde).collect());
        SlopeReport {
            slope: fit.slope,
            intercept: fit.intercept,
            max_linear_residual: fit.max_linear_residual,
            predicted: predicted_slope(&model, &idx, resolved.convention.unwrap_or_default()),
        }
    });
    let levels = resolved.chi_levels.clone().expect("resolved");
    let chi = if levels.is_empty() {
        Vec::new()
    } else {
        if model.dim() != 2 {
            return Err(CliError::Config("chi_levels need a bivariate model".into()));
        }
        oracle::chi_curve(&model, &levels)
            .map_err(runtime_err)?
            .into_iter()
            .map(|(level, chi)| ChiPoint { level, chi })
            .collect()
    };
    Ok(OracleOutput { config: resolved, rows, slope, chi })
}

/// Runs the battery, printing one line per criterion followed by its details.
pub fn cmd_verify<W: Write>(opts: &VerifyOptions, out: &mut W) -> Result<VerifyReport, CliError> {
    let mut results = Vec::new();
    for id in 1..=verify::CRITERIA {
        let r = verify::run_criterion(id, opts);
        writeln!(out, "{}", r.line()).map_err(runtime_err)?;
        for d in &r.details {
            writeln!(out, "    {d}").map_err(runtime_err)?;
        }
        results.push(r);
    }
    let all_passed = results.iter().all(|r| r.passed);
    let passed = results.iter().filter(|r| r.passed).count();
    writeln!(out, "{passed}/{} criteria passed", results.len()).map_err(runtime_err)?;
    Ok(VerifyReport { options: *opts, results, all_passed })
}

/// JSON schemas for every config and output document, keyed by file stem.
pub fn schemas() -> Vec<(&'static str, schemars::Schema)> {
    vec![
        ("simulate_config", schemars::schema_for!(SimulateConfig)),
        ("simulate_sidecar", schemars::schema_for!(SimulateSidecar)),
        ("estimate_config", schemars::schema_for!(EstimateConfig)),
        ("estimate_output", schemars::schema_for!(EstimateOutput)),
        ("alpha_config", schemars::schema_for!(AlphaConfig)),
        ("alpha_output", schemars::schema_for!(AlphaOutput)),
        ("oracle_config", schemars::schema_for!(OracleConfig)),
        ("oracle_output", schemars::schema_for!(OracleOutput)),
        ("verify_config", schemars::schema_for!(VerifyConfig)),
    ]
}
