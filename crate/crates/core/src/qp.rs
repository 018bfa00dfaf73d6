//! The constrained quadratic program behind partial residual dependence indices:
//!
//! ```text
//!     minimize  yᵀ Σ_II⁻¹ y   subject to  y_i >= 1 for i in I
//! ```
//!
//! The minimizer sits on the boundary `y_K = 1` for a unique active set `K ⊆ I`
//! characterized by
//!
//! * `μ = Σ_KK⁻¹ 1_K > 0` (the KKT multipliers, halved), and
//! * `Σ_MK Σ_KK⁻¹ 1_K >= 1_M` on the complement `M = I \ K`,
//!
//! in which case `y*_M = Σ_MK μ` and the minimum is `q = 1_Kᵀ Σ_KK⁻¹ 1_K = Σ μ_j`.
//! Only Cholesky factorizations of principal blocks are used.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CorrelationMatrix, ModelError};
use crate::numeric::Cholesky;

/// Acceptance tolerance on both certification conditions.
pub const CERT_TOL: f64 = 1e-10;
/// Largest index set the solver accepts.
pub const MAX_INDEX_SET: usize = 20;
/// Largest index set solved by exhaustive subset enumeration.
pub const MAX_ENUMERATION: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("index {index} is out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("index {0} appears twice")]
    DuplicateIndex(usize),
    #[error("index set of size {0} exceeds the supported maximum of 20")]
    TooLarge(usize),
    #[error("no active set passes certification (near-singular block)")]
    NoCertifiedSubset,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which algorithm locates the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Enumeration up to 12 indices, principal pivoting beyond.
    Auto,
    Enumeration,
    /// Least-index principal pivoting on the complementarity problem.
    ActiveSet,
}

/// Certified solution of the quadratic program for an index set `I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSolution {
    /// `I`, sorted, zero-based.
    pub index_set: Vec<usize>,
    /// `K ⊆ I`, sorted.
    pub active_set: Vec<usize>,
    /// `M = I \ K`, sorted.
    pub inactive_set: Vec<usize>,
    /// `y*`, ordered like `index_set`.
    pub minimizer: Vec<f64>,
    /// Minimum value `q = y*ᵀ Σ_II⁻¹ y*`.
    pub q: f64,
    /// `sqrt(q)`.
    pub alpha: f64,
    /// `μ_j = e_jᵀ Σ_KK⁻¹ 1_K`, ordered like `active_set`.
    pub mu: Vec<f64>,
}

/// Certification data of one candidate active set (local indices).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetCheck {
    pub active: Vec<usize>,
    pub q: f64,
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
    /// `min_j μ_j`.
    pub mu_margin: f64,
    /// `min_{j in M} (y_j - 1)`, `+inf` when `M` is empty.
    pub y_margin: f64,
}

impl SubsetCheck {
    pub fn margin(&self) -> f64 {
        self.mu_margin.min(self.y_margin)
    }

    pub fn accepted(&self) -> bool {
        self.mu_margin > -CERT_TOL && self.y_margin > -CERT_TOL
    }
}

fn sub_block(s: &[f64], m: usize, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    rows.iter().flat_map(|&i| cols.iter().map(move |&j| s[i * m + j])).collect()
}

/// Evaluates a candidate active set of a dense SPD matrix `s` (m×m).
pub(crate) fn check_subset(s: &[f64], m: usize, active: &[usize]) -> Option<SubsetCheck> {
    let kk = sub_block(s, m, active, active);
    let chol = Cholesky::new(&kk, active.len(), 0.0).ok()?;
    let mu = chol.solve(&vec![1.0; active.len()]);
    let q = mu.iter().sum();
    let mut y = vec![1.0; m];
    let mut y_margin = f64::INFINITY;
    for i in 0..m {
        if active.contains(&i) {
            continue;
        }
        let yi: f64 = active.iter().zip(&mu).map(|(&j, mj)| s[i * m + j] * mj).sum();
        y[i] = yi;
        y_margin = y_margin.min(yi - 1.0);
    }
    let mu_margin = mu.iter().copied().fold(f64::INFINITY, f64::min);
    Some(SubsetCheck { active: active.to_vec(), q, mu, y, mu_margin, y_margin })
}

fn mask_to_set(mask: usize, m: usize) -> Vec<usize> {
    (0..m).filter(|i| mask & (1 << i) != 0).collect()
}

/// Every nonempty candidate active set, in mask order.
pub(crate) fn enumerate_subsets(s: &[f64], m: usize) -> Vec<SubsetCheck> {
    (1..1usize << m).filter_map(|mask| check_subset(s, m, &mask_to_set(mask, m))).collect()
}

fn better(a: &SubsetCheck, b: &SubsetCheck) -> bool {
    let scale = a.q.abs().max(b.q.abs()).max(1.0);
    if (a.q - b.q).abs() > 1e-12 * scale {
        a.q < b.q
    } else {
        a.active < b.active
    }
}

fn solve_enumeration(s: &[f64], m: usize) -> Result<SubsetCheck, QpError> {
    let mut best: Option<SubsetCheck> = None;
    for c in enumerate_subsets(s, m).into_iter().filter(SubsetCheck::accepted) {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            best = Some(c);
        }
    }
    best.ok_or(QpError::NoCertifiedSubset)
}

/// Murty's least-index principal pivoting for the complementarity problem
/// `w = Σ μ - 1 >= 0, μ >= 0, wᵀμ = 0`; finite for positive-definite `Σ`.
fn solve_pivoting(s: &[f64], m: usize) -> Result<SubsetCheck, QpError> {
    let mut in_k = vec![true; m];
    for _ in 0..(1usize << m.min(24)).max(1000) {
        let active: Vec<usize> = (0..m).filter(|&i| in_k[i]).collect();
        let check = if active.is_empty() {
            SubsetCheck {
                active: vec![],
                q: 0.0,
                mu: vec![],
                y: vec![0.0; m],
                mu_margin: f64::INFINITY,
                y_margin: -1.0,
            }
        } else {
            check_subset(s, m, &active).ok_or(QpError::NoCertifiedSubset)?
        };
        let flip = (0..m).find(|&i| {
            if in_k[i] {
                let pos = active.iter().position(|&j| j == i).expect("active index");
                check.mu[pos] < -CERT_TOL
            } else {
                check.y[i] < 1.0 - CERT_TOL
            }
        });
        match flip {
            None => return Ok(check),
            Some(i) => in_k[i] = !in_k[i],
        }
    }
    Err(QpError::NoCertifiedSubset)
}

/// Solves the box-constrained problem for a general SPD matrix `s` (m×m,
/// row-major). Returns the certificate with local indices.
pub(crate) fn solve_dense(s: &[f64], m: usize, method: Method) -> Result<SubsetCheck, QpError> {
    if m == 0 {
        return Err(QpError::EmptyIndexSet);
    }
    if m > MAX_INDEX_SET {
        return Err(QpError::TooLarge(m));
    }
    let use_enum = match method {
        Method::Auto => m <= MAX_ENUMERATION,
        Method::Enumeration => true,
        Method::ActiveSet => false,
    };
    let check = if use_enum { solve_enumeration(s, m)? } else { solve_pivoting(s, m)? };
    if !check.accepted() {
        return Err(QpError::NoCertifiedSubset);
    }
    Ok(check)
}

fn normalize_index_set(sigma: &CorrelationMatrix, index_set: &[usize]) -> Result<Vec<usize>, QpError> {
    if index_set.is_empty() {
        return Err(QpError::EmptyIndexSet);
    }
    let mut idx = index_set.to_vec();
    idx.sort_unstable();
    for w in idx.windows(2) {
        if w[0] == w[1] {
            return Err(QpError::DuplicateIndex(w[0]));
        }
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= sigma.dim()) {
        return Err(QpError::IndexOutOfRange { index: bad, dim: sigma.dim() });
    }
    if idx.len() > MAX_INDEX_SET {
        return Err(QpError::TooLarge(idx.len()));
    }
    Ok(idx)
}

fn to_solution(index_set: Vec<usize>, check: SubsetCheck) -> AlphaSolution {
    let active_set: Vec<usize> = check.active.iter().map(|&l| index_set[l]).collect();
    let inactive_set: Vec<usize> = index_set.iter().copied().filter(|i| !active_set.contains(i)).collect();
    AlphaSolution {
        alpha: check.q.sqrt(),
        q: check.q,
        index_set,
        active_set,
        inactive_set,
        minimizer: check.y,
        mu: check.mu,
    }
}

/// Solves the program for the index set `I` (zero-based indices into `sigma`).
pub fn solve_alpha(sigma: &CorrelationMatrix, index_set: &[usize]) -> Result<AlphaSolution, QpError> {
    solve_alpha_with(sigma, index_set, Method::Auto)
}

pub fn solve_alpha_with(
    sigma: &CorrelationMatrix,
    index_set: &[usize],
    method: Method,
) -> Result<AlphaSolution, QpError> {
    let idx = normalize_index_set(sigma, index_set)?;
    let s = sigma.block(&idx, &idx);
    let check = solve_dense(&s, idx.len(), method)?;
    Ok(to_solution(idx, check))
}

/// Certification data for every nonempty subset of `I` (|I| <= 12), with
/// active sets reported as global indices.
pub fn certify_all(sigma: &CorrelationMatrix, index_set: &[usize]) -> Result<Vec<SubsetCheck>, QpError> {
    let idx = normalize_index_set(sigma, index_set)?;
    if idx.len() > MAX_ENUMERATION {
        return Err(QpError::TooLarge(idx.len()));
    }
    let s = sigma.block(&idx, &idx);
    Ok(enumerate_subsets(&s, idx.len())
        .into_iter()
        .map(|mut c| {
            c.active = c.active.iter().map(|&l| idx[l]).collect();
            c
        })
        .collect())
}

/// Which closed form of the trivariate lemma applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum LemmaBranch {
    /// `1 + 2ρ_min - ρ12 - ρ13 - ρ23 > 0`: all three constraints active.
    Full { condition: f64 },
    /// Otherwise the pair `{i, j}` carrying `ρ_min` is active and `q = 2/(1+ρ_ij)`.
    Pair { i: usize, j: usize, condition: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrivariateAlpha {
    pub solution: AlphaSolution,
    pub branch: LemmaBranch,
}

/// Closed-form solution for `I = {1,2,3}` of a 3×3 correlation matrix.
pub fn trivariate_alpha(rho12: f64, rho13: f64, rho23: f64) -> Result<TrivariateAlpha, QpError> {
    CorrelationMatrix::trivariate(rho12, rho13, rho23)?;
    let pairs = [((0, 1), rho12), ((0, 2), rho13), ((1, 2), rho23)];
    let sum = rho12 + rho13 + rho23;
    let (&((i, j), rho_min), _) = pairs
        .iter()
        .zip(0..)
        .min_by(|a, b| a.0 .1.total_cmp(&b.0 .1))
        .expect("three pairs");
    let condition = 1.0 + 2.0 * rho_min - sum;
    if condition > 0.0 {
        let sq = rho12 * rho12 + rho13 * rho13 + rho23 * rho23;
        let cross = rho12 * rho13 + rho12 * rho23 + rho13 * rho23;
        let det = 1.0 + 2.0 * rho12 * rho13 * rho23 - sq;
        let q = (3.0 - 2.0 * sum - sq + 2.0 * cross) / det;
        // Σ⁻¹1 through the adjugate: μ_i = (1 - ρ_jk)(1 + ρ_jk - ρ_ij - ρ_ik) / det.
        let mu = vec![
            (1.0 - rho23) * (1.0 + rho23 - rho12 - rho13) / det,
            (1.0 - rho13) * (1.0 + rho13 - rho12 - rho23) / det,
            (1.0 - rho12) * (1.0 + rho12 - rho13 - rho23) / det,
        ];
        Ok(TrivariateAlpha {
            solution: AlphaSolution {
                index_set: vec![0, 1, 2],
                active_set: vec![0, 1, 2],
                inactive_set: vec![],
                minimizer: vec![1.0; 3],
                q,
                alpha: q.sqrt(),
                mu,
            },
            branch: LemmaBranch::Full { condition },
        })
    } else {
        let other = 3 - i - j;
        let rho = |a: usize, b: usize| {
            pairs.iter().find(|p| p.0 == (a.min(b), a.max(b))).map(|p| p.1).expect("pair")
        };
        let q = 2.0 / (1.0 + rho_min);
        let mut minimizer = vec![1.0; 3];
        minimizer[other] = (rho(i, other) + rho(j, other)) / (1.0 + rho_min);
        Ok(TrivariateAlpha {
            solution: AlphaSolution {
                index_set: vec![0, 1, 2],
                active_set: vec![i, j],
                inactive_set: vec![other],
                minimizer,
                q,
                alpha: q.sqrt(),
                mu: vec![1.0 / (1.0 + rho_min); 2],
            },
            branch: LemmaBranch::Pair { i, j, condition },
        })
    }
}

/// Independent lattice oracle for the minimum: exhaustive search over a coarse
/// sublattice of `{1, 1+step, ..., 4}^m`, pattern search down to `step`, then
/// projected coordinate descent. Valid for `|I| <= 8`.
pub fn brute_force_alpha(sigma: &CorrelationMatrix, index_set: &[usize], step: f64) -> Result<f64, QpError> {
    assert!(step > 0.0 && step <= 0.1, "grid step must lie in (0, 0.1]");
    let idx = normalize_index_set(sigma, index_set)?;
    let m = idx.len();
    assert!(m <= 8, "lattice oracle supports at most 8 indices");
    let s = sigma.block(&idx, &idx);
    // Precision matrix by unit-vector solves; this is an oracle, not the solver.
    let chol = Cholesky::new(&s, m, 0.0).map_err(|_| QpError::NoCertifiedSubset)?;
    let mut p = vec![0.0; m * m];
    for c in 0..m {
        let mut e = vec![0.0; m];
        e[c] = 1.0;
        let col = chol.solve(&e);
        for r in 0..m {
            p[r * m + c] = col[r];
        }
    }
    let objective = |y: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..m {
            let row: f64 = (0..m).map(|j| p[i * m + j] * y[j]).sum();
            acc += y[i] * row;
        }
        acc
    };
    let n_points = (3.0 / step).round() as i64;
    let at = |g: &[i64]| -> Vec<f64> { g.iter().map(|&v| 1.0 + v as f64 * step).collect() };

    let mut stride = 1i64;
    while n_points / stride > 8 {
        stride *= 2;
    }
    let axis: Vec<i64> = (0..=n_points / stride).map(|v| v * stride).chain([n_points]).collect();
    let mut best_g = vec![0i64; m];
    let mut best = f64::INFINITY;
    let mut counter = vec![0usize; m];
    loop {
        let g: Vec<i64> = counter.iter().map(|&c| axis[c]).collect();
        let v = objective(&at(&g));
        if v < best {
            best = v;
            best_g = g;
        }
        let mut d = 0;
        while d < m {
            counter[d] += 1;
            if counter[d] < axis.len() {
                break;
            }
            counter[d] = 0;
            d += 1;
        }
        if d == m {
            break;
        }
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(m as u32))
        .map(|mut c| {
            (0..m)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    while stride >= 1 {
        loop {
            let mut improved = false;
            let centre = best_g.clone();
            for off in &offsets {
                let g: Vec<i64> =
                    centre.iter().zip(off).map(|(c, o)| (c + o * stride).clamp(0, n_points)).collect();
                let v = objective(&at(&g));
                if v < best - 1e-15 {
                    best = v;
                    best_g = g;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        stride /= 2;
    }
    // Projected coordinate descent on the convex problem.
    let mut y = at(&best_g);
    for _ in 0..200_000 {
        let mut change = 0.0f64;
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| p[i * m + j] * y[j]).sum();
            let new = (-off / p[i * m + i]).max(1.0);
            change = change.max((new - y[i]).abs());
            y[i] = new;
        }
        if change < 1e-15 {
            break;
        }
    }
    Ok(objective(&y).min(best))
}

/// Largest violation of the optimality certificate of `sol`.
pub fn kkt_check(sigma: &CorrelationMatrix, index_set: &[usize], sol: &AlphaSolution) -> f64 {
    let idx = match normalize_index_set(sigma, index_set) {
        Ok(i) => i,
        Err(_) => return f64::INFINITY,
    };
    let m = idx.len();
    let s = sigma.block(&idx, &idx);
    let chol = match Cholesky::new(&s, m, 0.0) {
        Ok(c) => c,
        Err(_) => return f64::INFINITY,
    };
    let y = &sol.minimizer;
    if y.len() != m {
        return f64::INFINITY;
    }
    let grad = chol.solve(y);
    let mut residual = sol.mu.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
    residual = residual.max(y.iter().map(|&v| (1.0 - v).max(0.0)).fold(0.0, f64::max));
    let value: f64 = y.iter().zip(&grad).map(|(a, b)| a * b).sum();
    residual = residual.max((sol.q - value).abs());
    for (local, global) in idx.iter().enumerate() {
        if sol.inactive_set.contains(global) {
            residual = residual.max(grad[local].abs());
        }
    }
    residual
}

/// Random correlation matrix `D^{-1/2} B Bᵀ D^{-1/2}` with `B` a `k × (k+2)`
/// standard normal matrix, redrawn until it validates.
pub fn random_correlation<R: Rng + ?Sized>(k: usize, rng: &mut R) -> CorrelationMatrix {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let cols = k + 2;
        let b: Vec<f64> = (0..k * cols).map(|_| StandardNormal.sample(rng)).collect();
        let mut s = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                s[i][j] = (0..cols).map(|c| b[i * cols + c] * b[j * cols + c]).sum();
            }
        }
        let d: Vec<f64> = (0..k).map(|i| s[i][i].sqrt()).collect();
        for i in 0..k {
            for j in 0..k {
                s[i][j] = if i == j { 1.0 } else { s[i][j] / (d[i] * d[j]) };
            }
        }
        if let Ok(c) = CorrelationMatrix::new(&s) {
            return c;
        }
    }
}
