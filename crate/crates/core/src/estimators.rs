//! Rank-based estimators: Kendall's tau, the implied correlation, the Weibull
//! tail coefficient, the tail constant, bivariate and partial residual
//! dependence indices, and empirical tail functions.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CorrelationMatrix, ModelError, ModelSpec};
use crate::qp::{self, AlphaSolution, LemmaBranch, QpError};
use crate::sampling::SampleMatrix;
use crate::theory::{self, TheoryError};

/// Bound applied to implied correlations.
pub const RHO_CLAMP: f64 = 1.0 - 1e-9;
/// Eigenvalue floor used when repairing an estimated correlation matrix.
pub const EIGEN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("need {needed} positive observations in the tail, found {found}")]
    InsufficientTail { needed: usize, found: usize },
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

/// Pair counts behind Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KendallCounts {
    pub concordant: u64,
    pub discordant: u64,
    pub pairs: u64,
}

impl KendallCounts {
    pub fn tau(&self) -> f64 {
        (self.concordant as f64 - self.discordant as f64) / self.pairs as f64
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), EstimatorError> {
    if x.len() != y.len() {
        return Err(EstimatorError::DomainError("samples differ in length".into()));
    }
    if x.len() < 2 {
        return Err(EstimatorError::DomainError("need at least 2 observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EstimatorError::DegenerateSample("non-finite observation".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(EstimatorError::DegenerateSample("a sample is constant".into()));
    }
    Ok(())
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place, returning the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut o) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[o] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[o] = v[i];
            i += 1;
        }
        o += 1;
    }
    buf[o..o + mid - i].copy_from_slice(&v[i..mid]);
    o += mid - i;
    buf[o..o + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Concordance counts in `O(n log n)`; tied pairs count as neither.
pub fn kendall_counts(x: &[f64], y: &[f64]) -> Result<KendallCounts, EstimatorError> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let tx = tied_pairs(&xs);
    let mut txy = 0u64;
    let mut start = 0;
    for end in 1..=xs.len() {
        if end == xs.len() || xs[end] != xs[start] {
            txy += tied_pairs(&ys[start..end]);
            start = end;
        }
    }
    let mut buf = vec![0.0; ys.len()];
    let discordant = merge_count(&mut ys, &mut buf);
    let ty = tied_pairs(&ys);
    let pairs = n * (n - 1) / 2;
    let untied = pairs - tx - ty + txy;
    Ok(KendallCounts { concordant: untied - discordant, discordant, pairs })
}

/// Reference `O(n²)` pair enumeration.
pub fn kendall_counts_brute(x: &[f64], y: &[f64]) -> Result<KendallCounts, EstimatorError> {
    check_pair(x, y)?;
    let n = x.len();
    let (mut c, mut d) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let s = (x[i] - x[j]) * (y[i] - y[j]);
            if s > 0.0 {
                c += 1;
            } else if s < 0.0 {
                d += 1;
            }
        }
    }
    Ok(KendallCounts { concordant: c, discordant: d, pairs: (n * (n - 1) / 2) as u64 })
}

pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, EstimatorError> {
    Ok(kendall_counts(x, y)?.tau())
}

/// `sin(πτ/2)`, clamped to `±(1 - 1e-9)`.
pub fn rho_from_tau(tau: f64) -> f64 {
    (0.5 * std::f64::consts::PI * tau).sin().clamp(-RHO_CLAMP, RHO_CLAMP)
}

/// Default number of upper order statistics, `⌊n^0.4⌋`.
pub fn default_kn(n: usize) -> usize {
    (n as f64).powf(0.4).floor() as usize
}

/// The `k_n` largest observations, descending, after checking preconditions.
fn upper_tail(x: &[f64], kn: usize) -> Result<Vec<f64>, EstimatorError> {
    let n = x.len();
    if kn < 2 || 2 * kn > n {
        return Err(EstimatorError::DomainError(format!("k_n = {kn} must satisfy 2 <= k_n <= n/2 (n = {n})")));
    }
    let mut pos: Vec<f64> = x.iter().copied().filter(|&v| v > 0.0 && v.is_finite()).collect();
    if pos.len() < kn {
        return Err(EstimatorError::InsufficientTail { needed: kn, found: pos.len() });
    }
    pos.sort_by(|a, b| b.total_cmp(a));
    pos.truncate(kn);
    Ok(pos)
}

/// Weibull tail coefficient estimate `T_n / D_n` from the upper `k_n` order
/// statistics of the positive part of `x`:
///
/// * `D_n = (1/k_n) Σ_{i=1}^{k_n} (ln X_{n-i+1:n} - ln X_{n-k_n+1:n})`,
/// * `T_n = (1/k_n) Σ_{i=1}^{k_n} (ln ln(n/i') - ln ln(n/k_n))`, `i' = max(i, 2)`,
///
/// with `n` the full sample size.
pub fn theta_hat(x: &[f64], kn: usize) -> Result<f64, EstimatorError> {
    let tail = upper_tail(x, kn)?;
    let n = x.len() as f64;
    let k = kn as f64;
    let anchor = tail[kn - 1].ln();
    let d: f64 = tail.iter().map(|v| v.ln() - anchor).sum::<f64>() / k;
    let base = (n / k).ln().ln();
    let t: f64 = (1..=kn).map(|i| (n / i.max(2) as f64).ln().ln() - base).sum::<f64>() / k;
    if !(d > 0.0) {
        return Err(EstimatorError::DegenerateSample("upper order statistics are tied".into()));
    }
    Ok(t / d)
}

/// Tail constant estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CHat {
    /// `(1/k_n) Σ ln(n/i) / X_{n-i+1:n}`.
    pub literal: f64,
    /// `(1/k_n) Σ ln(n/i) / X_{n-i+1:n}^θ`.
    pub corrected: f64,
    pub theta: f64,
}

pub fn c_hat(x: &[f64], kn: usize, theta: f64) -> Result<CHat, EstimatorError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(EstimatorError::DomainError(format!("theta = {theta} must be positive")));
    }
    let tail = upper_tail(x, kn)?;
    let n = x.len() as f64;
    let k = kn as f64;
    let terms = tail.iter().enumerate().map(|(i, &v)| ((n / (i + 1) as f64).ln(), v));
    let literal = terms.clone().map(|(l, v)| l / v).sum::<f64>() / k;
    let corrected = terms.map(|(l, v)| l / v.powf(theta)).sum::<f64>() / k;
    Ok(CHat { literal, corrected, theta })
}

/// `((1+ρ̂)/2)^{θ̂/2}`.
pub fn eta_hat_bivariate(rho_hat: f64, theta_hat: f64) -> Result<f64, EstimatorError> {
    Ok(theory::bivariate_index(rho_hat, theta_hat)?.eta)
}

/// Pairwise `τ̂` and `ρ̂` of two columns (zero-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrelation {
    pub i: usize,
    pub j: usize,
    pub tau: f64,
    pub rho: f64,
}

/// `τ̂` and `ρ̂` for every pair drawn from `columns`, in lexicographic order.
pub fn pairwise_correlations(data: &SampleMatrix, columns: &[usize]) -> Result<Vec<PairCorrelation>, EstimatorError> {
    let cols: Vec<Vec<f64>> = columns.iter().map(|&c| data.column(c)).collect();
    let pairs: Vec<(usize, usize)> =
        (0..columns.len()).flat_map(|a| (a + 1..columns.len()).map(move |b| (a, b))).collect();
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let tau = kendall_tau(&cols[a], &cols[b])?;
            Ok(PairCorrelation { i: columns[a], j: columns[b], tau, rho: rho_from_tau(tau) })
        })
        .collect()
}

/// Correlation matrix rebuilt from `raw` with eigenvalues clipped at
/// `EIGEN_FLOOR` and the diagonal rescaled to one. Returns the matrix and
/// whether a repair was applied.
pub fn repair_correlation(raw: &[Vec<f64>]) -> Result<(CorrelationMatrix, bool), EstimatorError> {
    let k = raw.len();
    let m = DMatrix::from_fn(k, k, |i, j| raw[i][j]);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= EIGEN_FLOOR) {
        if let Ok(c) = CorrelationMatrix::new(raw) {
            return Ok((c, false));
        }
    }
    let clipped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let d: Vec<f64> = (0..k).map(|i| rebuilt[(i, i)].sqrt()).collect();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { rebuilt[(i, j)] / (d[i] * d[j]) }).collect())
        .collect();
    Ok((CorrelationMatrix::new(&rows)?, true))
}

/// Plug-in partial index estimate for the index set `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEstimate {
    /// `I`, sorted, zero-based.
    pub index_set: Vec<usize>,
    /// Estimated `Σ̂_II` after any repair.
    pub sigma_hat: Vec<Vec<f64>>,
    pub pd_repair_applied: bool,
    /// Solution with indices mapped back to data columns.
    pub solution: AlphaSolution,
    pub theta_hat: f64,
    pub kn: usize,
    /// `q̂^{-θ̂/2}`.
    pub eta_i: f64,
    /// `q̂^{-θ̂}`.
    pub eta_i_literal: f64,
    /// Trivariate closed-form branch and its `q`, for `|I| = 3`.
    pub lemma: Option<(LemmaBranch, f64)>,
}

pub fn eta_hat_partial(data: &SampleMatrix, index_set: &[usize], kn: usize) -> Result<PartialEstimate, EstimatorError> {
    let mut idx = index_set.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.len() != index_set.len() || idx.len() < 2 || idx.iter().any(|&i| i >= data.k) {
        return Err(EstimatorError::DomainError(format!(
            "index set {index_set:?} must hold at least 2 distinct columns below {}",
            data.k
        )));
    }
    if data.n < 100 {
        return Err(EstimatorError::DomainError(format!("need n >= 100, got {}", data.n)));
    }
    let m = idx.len();
    let pairs = pairwise_correlations(data, &idx)?;
    let mut raw = vec![vec![0.0; m]; m];
    for (a, row) in raw.iter_mut().enumerate() {
        row[a] = 1.0;
    }
    for p in &pairs {
        let a = idx.iter().position(|&c| c == p.i).expect("pair column");
        let b = idx.iter().position(|&c| c == p.j).expect("pair column");
        raw[a][b] = p.rho;
        raw[b][a] = p.rho;
    }
    let (sigma, repaired) = repair_correlation(&raw)?;
    let local: Vec<usize> = (0..m).collect();
    let mut sol = qp::solve_alpha(&sigma, &local)?;
    sol.index_set = idx.clone();
    sol.active_set = sol.active_set.iter().map(|&l| idx[l]).collect();
    sol.inactive_set = sol.inactive_set.iter().map(|&l| idx[l]).collect();
    // θ̂ from the first column of the index set.
    let theta = theta_hat(&data.column(index_set[0]), kn)?;
    let lemma = if m == 3 {
        let t = qp::trivariate_alpha(sigma.get(1, 0), sigma.get(2, 0), sigma.get(2, 1))?;
        Some((t.branch, t.solution.q))
    } else {
        None
    };
    Ok(PartialEstimate {
        index_set: idx,
        sigma_hat: sigma.rows(),
        pd_repair_applied: repaired,
        eta_i: sol.q.powf(-0.5 * theta),
        eta_i_literal: sol.q.powf(-theta),
        solution: sol,
        theta_hat: theta,
        kn,
        lemma,
    })
}

/// Rank-based estimate of `S̃_u(x)` with its exceedance count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalS {
    pub value: f64,
    pub count: usize,
    pub n: usize,
}

/// Per-column ranks `1..=n` (ties broken by position).
pub fn column_ranks(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; v.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

fn count_joint(ranks: &[Vec<usize>], n: usize, cut: &[f64]) -> usize {
    let scale = 1.0 / (n as f64 + 1.0);
    (0..n).filter(|&row| ranks.iter().zip(cut).all(|(r, &c)| r[row] as f64 * scale > c)).count()
}

/// Fraction of rows with `r_ij/(n+1) > 1 - x_j/u` for every `j` in `I`.
pub fn empirical_s(data: &SampleMatrix, index_set: &[usize], x: &[f64], u: f64) -> Result<EmpiricalS, EstimatorError> {
    if index_set.len() != x.len() || index_set.is_empty() || index_set.iter().any(|&i| i >= data.k) {
        return Err(EstimatorError::DomainError("index set and x must match and lie within the data".into()));
    }
    if !(u > 0.0 && u <= data.n as f64 / 10.0) {
        return Err(EstimatorError::DomainError(format!("u = {u} must lie in (0, n/10]")));
    }
    let ranks: Vec<Vec<usize>> = index_set.iter().map(|&j| column_ranks(&data.column(j))).collect();
    let cut: Vec<f64> = x.iter().map(|xi| 1.0 - xi / u).collect();
    let count = count_joint(&ranks, data.n, &cut);
    Ok(EmpiricalS { value: count as f64 / data.n as f64, count, n: data.n })
}

/// Empirical `χ` at marginal probability level `p`: the share of rows above
/// level `p` in column `i` that are also above it in column `j`.
pub fn empirical_chi(data: &SampleMatrix, i: usize, j: usize, p: f64) -> Result<(f64, usize), EstimatorError> {
    if !(p > 0.0 && p < 1.0) || i >= data.k || j >= data.k {
        return Err(EstimatorError::DomainError(format!("bad chi level {p} or columns ({i}, {j})")));
    }
    let ri = column_ranks(&data.column(i));
    let rj = column_ranks(&data.column(j));
    let scale = 1.0 / (data.n as f64 + 1.0);
    let above_i = (0..data.n).filter(|&r| ri[r] as f64 * scale > p).count();
    let both = (0..data.n).filter(|&r| ri[r] as f64 * scale > p && rj[r] as f64 * scale > p).count();
    if above_i == 0 {
        return Err(EstimatorError::DegenerateSample(format!("no exceedances at level {p}")));
    }
    Ok((both as f64 / above_i as f64, both))
}

/// Settings for a full estimation report. Column numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EstimateSettings {
    /// Upper order statistics used by the tail estimators.
    pub kn: usize,
    /// Subsets for partial indices; each holds at least 2 columns.
    pub subsets: Vec<Vec<usize>>,
    /// Marginal probability levels for the empirical χ table.
    pub chi_levels: Vec<f64>,
    /// Levels `u` for the empirical `S_u(x, y)` table on columns 1 and 2.
    pub s_levels: Vec<f64>,
    /// `(x, y)` points of the `S_u` table.
    pub s_points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    pub tau: f64,
    pub rho: f64,
    /// `((1+ρ̂)/2)^{θ̂/2}` with θ̂ of column `i`.
    pub eta: f64,
}

/// `AlphaSolution` with 1-based column numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AlphaReport {
    pub index_set: Vec<usize>,
    pub active_set: Vec<usize>,
    pub inactive_set: Vec<usize>,
    pub minimizer: Vec<f64>,
    pub q: f64,
    pub alpha: f64,
    pub mu: Vec<f64>,
}

impl From<&AlphaSolution> for AlphaReport {
    fn from(s: &AlphaSolution) -> Self {
        let one = |v: &[usize]| v.iter().map(|i| i + 1).collect();
        Self {
            index_set: one(&s.index_set),
            active_set: one(&s.active_set),
            inactive_set: one(&s.inactive_set),
            minimizer: s.minimizer.clone(),
            q: s.q,
            alpha: s.alpha,
            mu: s.mu.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SubsetReport {
    pub solution: AlphaReport,
    pub theta_hat: f64,
    /// Adopted convention `q̂^{-θ̂/2}`.
    pub eta_i: f64,
    /// Literal convention `q̂^{-θ̂}`.
    pub eta_i_literal: f64,
    pub pd_repair_applied: bool,
    /// `"full"` or `"pair"` for three columns.
    pub lemma_branch: Option<String>,
    /// Active set of the pair branch, 1-based.
    pub lemma_pair: Option<[usize; 2]>,
    pub lemma_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ThetaReport {
    pub column: usize,
    pub theta_hat: f64,
    pub c_hat: CHat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ChiRow {
    pub level: f64,
    pub chi: f64,
    pub joint_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SRow {
    pub u: f64,
    pub x: f64,
    pub y: f64,
    /// Empirical `S̃_u(x, y)`.
    pub s_tilde: EmpiricalS,
    /// `S̃_u(x, y) / S̃_u(1, 1)`, absent when the denominator count is zero.
    pub s_ratio: Option<f64>,
}

/// Run metadata embedded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub tool_version: String,
    pub input: Option<String>,
    pub seed: Option<u64>,
    pub model: Option<ModelSpec>,
}

/// Output of the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TailReport {
    pub meta: RunMeta,
    pub settings: EstimateSettings,
    pub n: usize,
    pub k: usize,
    pub theta: Vec<ThetaReport>,
    pub pairs: Vec<PairReport>,
    pub subsets: Vec<SubsetReport>,
    pub chi: Vec<ChiRow>,
    pub s_table: Vec<SRow>,
    pub pd_repair_applied: bool,
}

impl EstimateSettings {
    /// Defaults for a sample of size `n` with `k` columns.
    pub fn defaults(n: usize, k: usize) -> Self {
        Self {
            kn: default_kn(n),
            subsets: if k >= 3 { vec![(1..=k.min(3)).collect()] } else { vec![vec![1, 2]] },
            chi_levels: vec![0.9, 0.99, 0.999],
            s_levels: vec![10.0, 20.0, 50.0],
            s_points: vec![[0.5, 0.5], [2.0, 2.0], [0.5, 2.0]],
        }
    }
}

/// Runs the full estimation pipeline.
pub fn estimate_report(data: &SampleMatrix, settings: &EstimateSettings, meta: RunMeta) -> Result<TailReport, EstimatorError> {
    if data.k < 2 {
        return Err(EstimatorError::DomainError("need at least 2 columns".into()));
    }
    let kn = settings.kn;
    let theta: Vec<ThetaReport> = (0..data.k)
        .map(|c| {
            let col = data.column(c);
            let t = theta_hat(&col, kn)?;
            Ok(ThetaReport { column: c + 1, theta_hat: t, c_hat: c_hat(&col, kn, t)? })
        })
        .collect::<Result<_, EstimatorError>>()?;
    let all: Vec<usize> = (0..data.k).collect();
    let pairs = pairwise_correlations(data, &all)?
        .into_iter()
        .map(|p| {
            Ok(PairReport {
                i: p.i + 1,
                j: p.j + 1,
                tau: p.tau,
                rho: p.rho,
                eta: eta_hat_bivariate(p.rho, theta[p.i].theta_hat)?,
            })
        })
        .collect::<Result<_, EstimatorError>>()?;
    let mut subsets = Vec::new();
    for s in &settings.subsets {
        if s.iter().any(|&c| c == 0 || c > data.k) {
            return Err(EstimatorError::DomainError(format!("subset {s:?} must use columns 1..={}", data.k)));
        }
        let zero: Vec<usize> = s.iter().map(|c| c - 1).collect();
        let est = eta_hat_partial(data, &zero, kn)?;
        let (branch, pair, lq) = match est.lemma {
            Some((LemmaBranch::Full { .. }, q)) => (Some("full".to_string()), None, Some(q)),
            Some((LemmaBranch::Pair { i, j, .. }, q)) => {
                (Some("pair".to_string()), Some([est.index_set[i] + 1, est.index_set[j] + 1]), Some(q))
            }
            None => (None, None, None),
        };
        subsets.push(SubsetReport {
            solution: AlphaReport::from(&est.solution),
            theta_hat: est.theta_hat,
            eta_i: est.eta_i,
            eta_i_literal: est.eta_i_literal,
            pd_repair_applied: est.pd_repair_applied,
            lemma_branch: branch,
            lemma_pair: pair,
            lemma_q: lq,
        });
    }
    let chi = settings
        .chi_levels
        .iter()
        .map(|&p| {
            let (chi, joint_count) = empirical_chi(data, 0, 1, p)?;
            Ok(ChiRow { level: p, chi, joint_count })
        })
        .collect::<Result<_, EstimatorError>>()?;
    let mut s_table = Vec::new();
    for &u in &settings.s_levels {
        let base = empirical_s(data, &[0, 1], &[1.0, 1.0], u)?;
        for &[x, y] in &settings.s_points {
            let s = empirical_s(data, &[0, 1], &[x, y], u)?;
            let ratio = (base.count > 0).then(|| s.count as f64 / base.count as f64);
            s_table.push(SRow { u, x, y, s_tilde: s, s_ratio: ratio });
        }
    }
    let pd_repair_applied = subsets.iter().any(|s| s.pd_repair_applied);
    Ok(TailReport {
        meta,
        settings: settings.clone(),
        n: data.n,
        k: data.k,
        theta,
        pairs,
        subsets,
        chi,
        s_table,
        pd_repair_applied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EllipticalModel, RadialLaw};
    use crate::sampling::sample_elliptical;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn kendall_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&x, &x.map(|v: f64| v.exp())).unwrap(), 1.0);
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]), Err(EstimatorError::DegenerateSample(_))));
    }

    #[test]
    fn kendall_matches_brute_force_with_ties() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for n in [2, 3, 10, 257, 2000] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..40) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64).collect();
            if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
                continue;
            }
            assert_eq!(kendall_counts(&x, &y).unwrap(), kendall_counts_brute(&x, &y).unwrap());
        }
    }

    #[test]
    fn rho_from_tau_examples() {
        assert!((rho_from_tau(1.0 / 3.0) - 0.5).abs() < 1e-15);
        assert_eq!(rho_from_tau(0.0), 0.0);
        assert_eq!(rho_from_tau(-1.0), -RHO_CLAMP);
        assert_eq!(rho_from_tau(1.0), RHO_CLAMP);
    }

    fn weibull_sample(theta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln()).powf(1.0 / theta)).collect()
    }

    #[test]
    fn theta_hat_on_simulated_weibull() {
        let n = 100_000;
        let kn = default_kn(n);
        let t2 = theta_hat(&weibull_sample(2.0, n, 1), kn).unwrap();
        assert!((1.7..=2.3).contains(&t2), "theta_hat = {t2}");
        let t1 = theta_hat(&weibull_sample(1.0, n, 2), kn).unwrap();
        assert!((0.85..=1.15).contains(&t1), "theta_hat = {t1}");
    }

    #[test]
    fn theta_hat_on_ideal_quantiles() {
        let n = 100_000usize;
        let x: Vec<f64> = (1..n).map(|j| ((n as f64 / (n - j) as f64).ln()).sqrt()).collect();
        let t = theta_hat(&x, default_kn(n)).unwrap();
        assert!((t / 2.0 - 1.0).abs() < 0.1, "theta_hat = {t}");
        let scaled: Vec<f64> = x.iter().map(|v| 3.7 * v).collect();
        assert!((theta_hat(&scaled, default_kn(n)).unwrap() - t).abs() < 1e-12);
    }

    #[test]
    fn theta_hat_preconditions() {
        let x = vec![-1.0; 50].into_iter().chain(vec![2.0; 3]).collect::<Vec<_>>();
        assert!(matches!(theta_hat(&x, 5), Err(EstimatorError::InsufficientTail { needed: 5, found: 3 })));
        assert!(theta_hat(&x, 1).is_err());
        assert!(theta_hat(&x, 40).is_err());
    }

    #[test]
    fn c_hat_examples() {
        let n = 100_000;
        let kn = default_kn(n);
        let c = c_hat(&weibull_sample(1.0, n, 4), kn, 1.0).unwrap();
        assert!((0.8..=1.2).contains(&c.literal) && (0.8..=1.2).contains(&c.corrected));
        let c = c_hat(&weibull_sample(2.0, n, 5), kn, 2.0).unwrap();
        assert!((0.8..=1.2).contains(&c.corrected), "{c:?}");
        assert!(!(0.8..=1.2).contains(&c.literal), "{c:?}");
        let ideal: Vec<f64> = (1..=n).map(|i| (n as f64 / i as f64).ln()).collect();
        let c = c_hat(&ideal, kn, 1.0).unwrap();
        assert!((c.literal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_hat_bivariate_examples() {
        assert!((eta_hat_bivariate(0.5, 2.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((eta_hat_bivariate(0.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(eta_hat_bivariate(-0.4, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn repair_clips_and_flags() {
        let pd = vec![vec![1.0, 0.2], vec![0.2, 1.0]];
        assert!(!repair_correlation(&pd).unwrap().1);
        let bad = vec![vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]];
        let (c, flag) = repair_correlation(&bad).unwrap();
        assert!(flag);
        assert_eq!(c.dim(), 3);
    }

    #[test]
    fn partial_pair_matches_bivariate() {
        let m = EllipticalModel::new(
            CorrelationMatrix::equicorrelated(3, 0.5).unwrap(),
            RadialLaw::kotz(1.0, 0.0, 1.0, 2.0).unwrap(),
        );
        let s = sample_elliptical(&m, 5_000, 3).unwrap();
        let kn = default_kn(s.n);
        let est = eta_hat_partial(&s, &[0, 2], kn).unwrap();
        assert!(!est.pd_repair_applied);
        let rho = rho_from_tau(kendall_tau(&s.column(0), &s.column(2)).unwrap());
        let theta = theta_hat(&s.column(0), kn).unwrap();
        assert!((est.eta_i - eta_hat_bivariate(rho, theta).unwrap()).abs() < 1e-12);
        let est = eta_hat_partial(&s, &[0, 1, 2], kn).unwrap();
        let (_, lq) = est.lemma.unwrap();
        assert!((lq - est.solution.q).abs() < 1e-10);
    }

    #[test]
    fn empirical_s_examples() {
        let m = EllipticalModel::bivariate(0.3, RadialLaw::unit_gumbel()).unwrap();
        let s = sample_elliptical(&m, 2_000, 1).unwrap();
        let all = empirical_s(&s, &[0, 1], &[20.0, 20.0], 20.0).unwrap();
        assert_eq!(all.value, 1.0);
        let mut prev = 0;
        for x in [0.5, 1.0, 2.0, 4.0] {
            let v = empirical_s(&s, &[0, 1], &[x, 1.0], 20.0).unwrap();
            assert!(v.count >= prev);
            prev = v.count;
        }
        assert!(empirical_s(&s, &[0, 1], &[1.0, 1.0], 500.0).is_err());
    }

    #[test]
    fn report_round_trips() {
        let m = EllipticalModel::new(
            CorrelationMatrix::trivariate(0.5, 0.2, 0.3).unwrap(),
            RadialLaw::gaussian_chi(3),
        );
        let s = sample_elliptical(&m, 3_000, 2).unwrap();
        let settings = EstimateSettings::defaults(s.n, s.k);
        let meta = RunMeta { tool_version: "test".into(), input: None, seed: Some(2), model: Some(m.spec()) };
        let report = estimate_report(&s, &settings, meta).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: TailReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
        assert_eq!(report.subsets[0].lemma_branch.as_deref(), Some("full"));
    }
}
