//! Deterministic deep-tail survival probabilities of elliptical vectors.
//!
//! A joint exceedance `{X_i > a_i, i in I}` happens exactly when the direction
//! `v = U` lies in the cone `(L v)_i > 0` and `R > h(v) = max_i a_i / (L v)_i`,
//! so its probability is the sphere average of `P{R > h(v)}`. The minimum of
//! `h` is `sqrt(q)` where `q` is the box-constrained quadratic minimum with
//! bounds `a`; it is attained at a peak direction `v*`. The integrand is
//! parametrized by geodesic distance from `v*`, along which `h` is
//! non-decreasing, so each radial line is truncated where the log-integrand has
//! dropped 60 nats below its peak. Everything is computed as
//! `M + ln ∫ exp(g - M)` with `M = ln P{R > sqrt(q)}`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{EllipticalModel, ModelError, TAIL_CUTOFF_NATS};
use crate::numeric::{self, Cholesky};
use crate::qp::{self, Method, QpError};

/// Smallest log-probability the oracle reports.
pub const LOG_UNDERFLOW: f64 = -600.0;
const REL_TOL_1D: f64 = 1e-10;
const REL_TOL_INNER: f64 = 1e-10;
const REL_TOL_OUTER: f64 = 1e-8;
const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("root finding failed: {0}")]
    ConvergenceFailure(String),
    #[error("log-probability {log_value:.3} is below the supported floor of -600")]
    Underflow { log_value: f64 },
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("the oracle supports dimensions 2 and 3 only (got {0})")]
    UnsupportedDimension(usize),
}

fn quad_err(e: numeric::NumericError) -> OracleError {
    OracleError::QuadratureFailure(e.to_string())
}

fn check_floor(v: f64) -> Result<f64, OracleError> {
    if v.is_nan() || v < LOG_UNDERFLOW {
        Err(OracleError::Underflow { log_value: v })
    } else {
        Ok(v)
    }
}

/// `ln P{X_1 > a}`; all coordinates share this marginal.
pub fn marginal_survival(model: &EllipticalModel, a: f64) -> Result<f64, OracleError> {
    if !(a >= 0.0) {
        return Err(OracleError::DomainError(format!("threshold {a} must be >= 0")));
    }
    if a == 0.0 {
        return Ok(-std::f64::consts::LN_2);
    }
    let law = model.radial();
    let k = model.dim();
    let peak = law.log_survival(a);
    if peak < LOG_UNDERFLOW {
        return Err(OracleError::Underflow { log_value: peak });
    }
    let level = peak - TAIL_CUTOFF_NATS;
    let value = if k == 2 {
        // (1/π) ∫_0^{π/2} P{R > a / cos φ} dφ
        let g = |phi: f64| law.log_survival(a / phi.cos());
        let end = numeric::bisect_level(g, 0.0, 0.5 * PI, level, 200);
        let integral =
            numeric::integrate(|phi| (g(phi) - peak).exp(), &end_breaks(end), 0.0, REL_TOL_1D, MAX_PANELS)
                .map_err(quad_err)?;
        peak + (integral.value / PI).ln()
    } else {
        // c_k ∫_0^1 P{R > a/t} (1-t²)^{(k-3)/2} dt with s = 1 - t.
        let half = 0.5 * (k as f64 - 3.0);
        let ln_c = libm::lgamma(0.5 * k as f64) - 0.5 * PI.ln() - libm::lgamma(0.5 * (k as f64 - 1.0));
        let g = |s: f64| law.log_survival(a / (1.0 - s));
        let end = numeric::bisect_level(g, 0.0, 1.0, level, 200);
        let integral = numeric::integrate(
            |s| {
                let t = 1.0 - s;
                let weight = if half == 0.0 { 1.0 } else { (1.0 - t * t).powf(half) };
                (g(s) - peak).exp() * weight
            },
            &end_breaks(end),
            0.0,
            REL_TOL_1D,
            MAX_PANELS,
        )
        .map_err(quad_err)?;
        peak + ln_c + integral.value.ln()
    };
    check_floor(value)
}

/// Panels refined geometrically towards `end`, where small thresholds put
/// the whole drop of the integrand.
fn end_breaks(end: f64) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=40).map(|j| end - end * 0.5f64.powi(j)).collect();
    b.push(end);
    b.dedup();
    b
}

/// Threshold `a >= 0` with `ln P{X_1 > a} = log_tail`, `log_tail < ln 0.5`.
pub fn marginal_quantile_log_tail(model: &EllipticalModel, log_tail: f64) -> Result<f64, OracleError> {
    if !(log_tail < -std::f64::consts::LN_2) {
        return Err(OracleError::DomainError(format!(
            "log tail {log_tail} must be below ln 0.5"
        )));
    }
    if log_tail < LOG_UNDERFLOW {
        return Err(OracleError::Underflow { log_value: log_tail });
    }
    let f = |a: f64| match marginal_survival(model, a) {
        Ok(v) => v - log_tail,
        Err(_) => f64::NEG_INFINITY,
    };
    let mut hi = model.radial().median().max(1.0);
    let mut steps = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(OracleError::ConvergenceFailure(format!(
                "no bracket for marginal log tail {log_tail}"
            )));
        }
    }
    let mut lo = 0.0;
    // Tighten the bracket so that f stays finite on it.
    while f(0.5 * (lo + hi)) > 0.0 && hi - lo > 1e-3 * hi {
        lo = 0.5 * (lo + hi);
    }
    let mut mid_hi = hi;
    while !f(mid_hi).is_finite() {
        mid_hi = 0.5 * (lo + mid_hi);
    }
    if f(mid_hi) <= 0.0 {
        hi = mid_hi;
    }
    numeric::brent(f, lo, hi, 1e-300, 1e-13, 300).map_err(|e| OracleError::ConvergenceFailure(e.to_string()))
}

/// Threshold `a` with `P{X_1 <= a} = p`, `p ∈ (0.5, 1)`.
pub fn marginal_quantile(model: &EllipticalModel, p: f64) -> Result<f64, OracleError> {
    if !(p > 0.5 && p < 1.0) {
        return Err(OracleError::DomainError(format!("p = {p} must lie in (0.5, 1)")));
    }
    marginal_quantile_log_tail(model, (-p).ln_1p())
}

/// Peak of the cone integrand for the constraints `(index, threshold)`.
struct Peak {
    /// `ln P{R > sqrt(q)}`.
    log_peak: f64,
    /// Unit direction minimizing `h`.
    direction: Vec<f64>,
}

fn find_peak(model: &EllipticalModel, idx: &[usize], a: &[f64]) -> Result<Peak, OracleError> {
    let k = model.dim();
    let m = idx.len();
    let sigma = model.sigma();
    let s_ii = sigma.block(idx, idx);
    let scaled: Vec<f64> =
        (0..m * m).map(|p| s_ii[p] / (a[p / m] * a[p % m])).collect();
    let sol = qp::solve_dense(&scaled, m, Method::Auto)?;
    let z_i: Vec<f64> = (0..m).map(|i| a[i] * sol.y[i]).collect();
    let chol_ii = Cholesky::new(&s_ii, m, 0.0).map_err(|e| OracleError::DomainError(e.to_string()))?;
    let w = chol_ii.solve(&z_i);
    let mut z = vec![0.0; k];
    for j in 0..k {
        z[j] = match idx.iter().position(|&i| i == j) {
            Some(p) => z_i[p],
            None => idx.iter().zip(&w).map(|(&i, wi)| sigma.get(j, i) * wi).sum(),
        };
    }
    let mut v = sigma.cholesky().solve_lower(&z);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let log_peak = model.radial().log_survival(sol.q.sqrt());
    Ok(Peak { log_peak, direction: v })
}

/// `ln P{R > max_i a_i/(L v)_i}` on the cone, `-inf` outside.
fn log_integrand(model: &EllipticalModel, idx: &[usize], a: &[f64], v: &[f64]) -> f64 {
    let l = model.factor();
    let k = model.dim();
    let mut h = 0.0f64;
    for (&i, &ai) in idx.iter().zip(a) {
        let c: f64 = (0..=i).map(|j| l[i * k + j] * v[j]).sum();
        if c <= 0.0 {
            return f64::NEG_INFINITY;
        }
        h = h.max(ai / c);
    }
    model.radial().log_survival(h)
}

/// Integral over `ψ ∈ [0, ψ_c]` of `weight(ψ) exp(g(ψ) - M)` along a great circle.
fn radial_line<G, W>(mut g: G, weight: W, level: f64, peak: f64, rel_tol: f64) -> Result<f64, OracleError>
where
    G: FnMut(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let end = numeric::bisect_level(&mut g, 0.0, PI, level, 200);
    if end <= 0.0 {
        return Ok(0.0);
    }
    numeric::integrate(|psi| weight(psi) * (g(psi) - peak).exp(), &[0.0, 0.5 * end, end], 0.0, rel_tol, MAX_PANELS)
        .map(|r| r.value)
        .map_err(quad_err)
}

/// `ln P{X_i > a_i for all (i, a_i) in constraints}` for a model of dimension 2 or 3.
pub fn joint_survival(model: &EllipticalModel, constraints: &[(usize, f64)]) -> Result<f64, OracleError> {
    let k = model.dim();
    if !(k == 2 || k == 3) {
        return Err(OracleError::UnsupportedDimension(k));
    }
    if constraints.is_empty() {
        return Ok(0.0);
    }
    let mut cons = constraints.to_vec();
    cons.sort_by_key(|c| c.0);
    for w in cons.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(OracleError::DomainError(format!("index {} constrained twice", w[0].0)));
        }
    }
    for &(i, a) in &cons {
        if i >= k {
            return Err(OracleError::DomainError(format!("index {i} out of range")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(OracleError::DomainError(format!("threshold {a} must be positive")));
        }
    }
    let idx: Vec<usize> = cons.iter().map(|c| c.0).collect();
    let a: Vec<f64> = cons.iter().map(|c| c.1).collect();
    let peak = find_peak(model, &idx, &a)?;
    let m = peak.log_peak;
    if m < LOG_UNDERFLOW {
        return Err(OracleError::Underflow { log_value: m });
    }
    let level = m - TAIL_CUTOFF_NATS;
    let vs = &peak.direction;
    let value = if k == 2 {
        let e1 = [-vs[1], vs[0]];
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let g = |psi: f64| {
                let (s, c) = psi.sin_cos();
                let v = [c * vs[0] + sign * s * e1[0], c * vs[1] + sign * s * e1[1]];
                log_integrand(model, &idx, &a, &v)
            };
            total += radial_line(g, |_| 1.0, level, m, REL_TOL_1D)?;
        }
        m + (total / (2.0 * PI)).ln()
    } else {
        let (e1, e2) = orthonormal_frame(vs);
        let inner = |phi: f64| -> Result<f64, OracleError> {
            let (sp, cp) = phi.sin_cos();
            let dir = [cp * e1[0] + sp * e2[0], cp * e1[1] + sp * e2[1], cp * e1[2] + sp * e2[2]];
            let g = |psi: f64| {
                let (s, c) = psi.sin_cos();
                let v = [c * vs[0] + s * dir[0], c * vs[1] + s * dir[1], c * vs[2] + s * dir[2]];
                log_integrand(model, &idx, &a, &v)
            };
            radial_line(g, f64::sin, level, m, REL_TOL_INNER)
        };
        let mut failure = None;
        let outer = numeric::integrate(
            |phi| match inner(phi) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            &[0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI],
            0.0,
            REL_TOL_OUTER,
            MAX_PANELS,
        )
        .map_err(quad_err)?;
        if let Some(e) = failure {
            return Err(e);
        }
        m + (outer.value / (4.0 * PI)).ln()
    };
    if value == f64::NEG_INFINITY {
        return Err(OracleError::Underflow { log_value: value });
    }
    check_floor(value)
}

fn orthonormal_frame(v: &[f64]) -> ([f64; 3], [f64; 3]) {
    let axis = (0..3)
        .min_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
        .expect("three axes");
    let mut t = [0.0; 3];
    t[axis] = 1.0;
    let cross = |a: &[f64], b: &[f64]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let mut e1 = cross(v, &t);
    let n = e1.iter().map(|x| x * x).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|x| *x /= n);
    let e2 = cross(v, &e1);
    (e1, e2)
}

/// `ln P{X_1 > a, X_2 > b}` for a bivariate model.
pub fn joint_survival_2d(model: &EllipticalModel, a: f64, b: f64) -> Result<f64, OracleError> {
    if model.dim() != 2 {
        return Err(OracleError::DomainError("joint_survival_2d needs a bivariate model".into()));
    }
    joint_survival(model, &[(0, a), (1, b)])
}

/// `ln P{X_1 > a1, X_2 > a2, X_3 > a3}` for a trivariate model.
pub fn joint_survival_3d(model: &EllipticalModel, a1: f64, a2: f64, a3: f64) -> Result<f64, OracleError> {
    if model.dim() != 3 {
        return Err(OracleError::DomainError("joint_survival_3d needs a trivariate model".into()));
    }
    joint_survival(model, &[(0, a1), (1, a2), (2, a3)])
}

/// `ln S̃_u(x) = ln P{Q(X_i) > 1 - x_i/u, i in I}`.
pub fn s_tilde(model: &EllipticalModel, index_set: &[usize], x: &[f64], u: f64) -> Result<f64, OracleError> {
    if index_set.len() != x.len() || !(2..=3).contains(&index_set.len()) {
        return Err(OracleError::DomainError("need 2 or 3 indices with matching x".into()));
    }
    let mut cons = Vec::with_capacity(x.len());
    for (&i, &xi) in index_set.iter().zip(x) {
        if !(xi > 0.0) || !(xi / u < 0.5) {
            return Err(OracleError::DomainError(format!("need 0 < x_i < u/2 (x = {xi}, u = {u})")));
        }
        cons.push((i, marginal_quantile_log_tail(model, (xi / u).ln())?));
    }
    joint_survival(model, &cons)
}

/// `S_u(x) = S̃_u(x) / S̃_u(1)`.
pub fn s_ratio(model: &EllipticalModel, index_set: &[usize], x: &[f64], u: f64) -> Result<f64, OracleError> {
    let ones = vec![1.0; x.len()];
    Ok((s_tilde(model, index_set, x, u)? - s_tilde(model, index_set, &ones, u)?).exp())
}

/// `χ(u) = P{X_1 > u, X_2 > u} / P{X_1 > u}` on each level.
pub fn chi_curve(model: &EllipticalModel, levels: &[f64]) -> Result<Vec<(f64, f64)>, OracleError> {
    if model.dim() != 2 {
        return Err(OracleError::DomainError("chi curve needs a bivariate model".into()));
    }
    levels
        .par_iter()
        .map(|&u| {
            let joint = joint_survival_2d(model, u, u)?;
            let marginal = marginal_survival(model, u)?;
            Ok((u, (joint - marginal).exp().min(1.0)))
        })
        .collect()
}

/// Least-squares fit of `ln S̃_u(1)` against `ln u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub u_grid: Vec<f64>,
    pub log_values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub max_linear_residual: f64,
}

impl SlopeFit {
    pub fn from_values(u_grid: Vec<f64>, log_values: Vec<f64>) -> Self {
        let x: Vec<f64> = u_grid.iter().map(|u| u.ln()).collect();
        let (slope, intercept, max_linear_residual) = numeric::least_squares_line(&x, &log_values);
        Self { u_grid, log_values, slope, intercept, max_linear_residual }
    }
}

/// Regular-variation slope of `u ↦ S̃_u(1)` over a geometric grid.
pub fn rv_slope(model: &EllipticalModel, index_set: &[usize], u_grid: &[f64]) -> Result<SlopeFit, OracleError> {
    check_grid(u_grid)?;
    let ones = vec![1.0; index_set.len()];
    let values: Vec<f64> = u_grid
        .par_iter()
        .map(|&u| s_tilde(model, index_set, &ones, u))
        .collect::<Result<_, _>>()?;
    Ok(SlopeFit::from_values(u_grid.to_vec(), values))
}

/// Checks that a slope grid is increasing, starts above 2, has at least 5 points
/// and spans at least 4 decades.
pub fn check_grid(u_grid: &[f64]) -> Result<(), OracleError> {
    if u_grid.len() < 5 {
        return Err(OracleError::DomainError("slope grid needs at least 5 points".into()));
    }
    if u_grid.windows(2).any(|w| !(w[1] > w[0])) || !(u_grid[0] > 2.0) {
        return Err(OracleError::DomainError("slope grid must be increasing and above 2".into()));
    }
    let decades = (u_grid[u_grid.len() - 1] / u_grid[0]).log10();
    if decades < 4.0 - 1e-9 {
        return Err(OracleError::DomainError(format!("slope grid spans {decades:.2} decades, need 4")));
    }
    Ok(())
}

/// `u = 10^{lo}, 10^{lo+1}, …, 10^{hi}`.
pub fn decade_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CorrelationMatrix, RadialLaw};
    use crate::theory;
    use approx::assert_relative_eq;

    fn ln_normal_tail(x: f64) -> f64 {
        (0.5 * libm::erfc(x / std::f64::consts::SQRT_2)).ln()
    }

    fn gaussian2(rho: f64) -> EllipticalModel {
        EllipticalModel::bivariate(rho, RadialLaw::gaussian_chi(2)).unwrap()
    }

    #[test]
    fn marginal_examples() {
        let m = gaussian2(0.3);
        assert_eq!(marginal_survival(&m, 0.0).unwrap(), -std::f64::consts::LN_2);
        assert_relative_eq!(marginal_survival(&m, 2.0).unwrap(), 0.022_750_131_948_179_2f64.ln(), max_relative = 1e-10);
        let m3 = EllipticalModel::gaussian(CorrelationMatrix::identity(3).unwrap());
        for a in [0.5, 3.0, 10.0, 30.0] {
            assert_relative_eq!(marginal_survival(&m3, a).unwrap(), ln_normal_tail(a), max_relative = 1e-9);
            assert_relative_eq!(marginal_survival(&m, a).unwrap(), ln_normal_tail(a), max_relative = 1e-9);
        }
        let m4 = EllipticalModel::gaussian(CorrelationMatrix::identity(4).unwrap());
        assert_relative_eq!(marginal_survival(&m4, 4.0).unwrap(), ln_normal_tail(4.0), max_relative = 1e-9);
    }

    #[test]
    fn kotz_marginal_matches_asymptote_to_next_order() {
        let law = RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap();
        let m = EllipticalModel::bivariate(0.0, law).unwrap();
        let mut prev = f64::INFINITY;
        for a in [30.0, 100.0, 300.0] {
            let dev = marginal_survival(&m, a).unwrap() - theory::kotz_marginal_tail(&law, a).unwrap();
            // 1/cos φ = 1 + φ²/2 + 5φ⁴/24 + … leaves a relative correction of -5/(8a).
            assert!((dev + 0.625 / a).abs() < 1e-3, "a = {a}: deviation {dev}");
            assert!(dev.abs() < prev);
            prev = dev.abs();
        }
    }

    #[test]
    fn quantile_examples() {
        let m = gaussian2(0.0);
        assert!(marginal_quantile(&m, 0.5 + 1e-9).unwrap() < 1e-8);
        assert_relative_eq!(marginal_quantile(&m, 1.0 - 1e-6).unwrap(), 4.753_424_308_822_899, max_relative = 1e-9);
        for law in [RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap(), RadialLaw::exp_scaling(1.0).unwrap(), RadialLaw::lognormal(0.0, 1.0).unwrap()] {
            let m = EllipticalModel::bivariate(0.4, law).unwrap();
            for lt in [-1.0, -10.0, -40.0] {
                let a = marginal_quantile_log_tail(&m, lt).unwrap();
                assert!((marginal_survival(&m, a).unwrap() - lt).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn joint_2d_examples() {
        let m = gaussian2(0.0);
        let q = marginal_quantile(&m, 1.0 - 1e-3).unwrap();
        assert!((joint_survival_2d(&m, q, q).unwrap() - 2.0 * 1e-3f64.ln()).abs() < 1e-8);
        let m = EllipticalModel::bivariate(0.5, RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
        for (a, b) in [(1.0, 2.0), (3.0, 0.5), (10.0, 12.0)] {
            let j = joint_survival_2d(&m, a, b).unwrap();
            assert!(j <= marginal_survival(&m, a).unwrap().min(marginal_survival(&m, b).unwrap()));
            assert!((j - joint_survival_2d(&m, b, a).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_2d_matches_gaussian_reference() {
        // Bivariate normal orthant-type check through the 3-d model's pair.
        let m2 = gaussian2(0.6);
        let m3 = EllipticalModel::gaussian(CorrelationMatrix::trivariate(0.6, 0.1, 0.2).unwrap());
        for (a, b) in [(0.5, 1.0), (2.0, 3.0), (6.0, 7.0)] {
            let x = joint_survival_2d(&m2, a, b).unwrap();
            let y = joint_survival(&m3, &[(0, a), (1, b)]).unwrap();
            assert!((x - y).abs() < 1e-7 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn joint_3d_examples() {
        let m = EllipticalModel::gaussian(CorrelationMatrix::identity(3).unwrap());
        let a = marginal_quantile(&m, 1.0 - 1e-2).unwrap();
        assert!((joint_survival_3d(&m, a, a, a).unwrap() - 3.0 * 1e-2f64.ln()).abs() < 1e-7);
        let m = EllipticalModel::new(CorrelationMatrix::equicorrelated(3, 0.4).unwrap(), RadialLaw::kotz(1.0, 0.0, 1.0, 2.0).unwrap());
        let base = joint_survival_3d(&m, 1.0, 1.5, 2.0).unwrap();
        for p in [(1.5, 1.0, 2.0), (2.0, 1.5, 1.0), (1.0, 2.0, 1.5)] {
            assert!((joint_survival_3d(&m, p.0, p.1, p.2).unwrap() - base).abs() < 1e-7);
        }
    }

    #[test]
    fn factorization_near_independence() {
        for rho in [1e-4, -1e-4] {
            let m = EllipticalModel::bivariate(rho, RadialLaw::gaussian_chi(2)).unwrap();
            let (a, b) = (1.5, 2.0);
            let j = joint_survival_2d(&m, a, b).unwrap();
            let p = marginal_survival(&m, a).unwrap() + marginal_survival(&m, b).unwrap();
            assert!(((j - p).exp() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn s_tilde_examples() {
        let m = gaussian2(0.0);
        let v = s_tilde(&m, &[0, 1], &[2.0, 3.0], 1e4).unwrap();
        assert!((v - (6.0f64 / 1e8).ln()).abs() < 1e-7);
        let m = EllipticalModel::bivariate(0.3, RadialLaw::unit_gumbel()).unwrap();
        let lo = s_tilde(&m, &[0, 1], &[1.0, 1.0], 1e3).unwrap();
        let hi = s_tilde(&m, &[0, 1], &[1.0, 1.5], 1e3).unwrap();
        assert!(hi > lo);
        let a = marginal_quantile(&m, 1.0 - 1e-3).unwrap();
        assert!((lo - joint_survival_2d(&m, a, a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn chi_examples() {
        let m = gaussian2(0.0);
        for (u, chi) in chi_curve(&m, &[0.0001, 1.0, 3.0]).unwrap() {
            assert_relative_eq!(chi, ln_normal_tail(u).exp(), max_relative = 1e-8);
        }
        let m = EllipticalModel::bivariate(0.5, RadialLaw::unit_gumbel()).unwrap();
        let curve = chi_curve(&m, &[1.0, 5.0, 20.0, 80.0]).unwrap();
        assert!(curve.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(curve.iter().all(|c| c.1 > 0.0 && c.1 <= 1.0));
    }

    #[test]
    fn gaussian_independent_slope_is_exact() {
        let fit = rv_slope(&gaussian2(0.0), &[0, 1], &decade_grid(2, 6)).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-6);
        assert!(fit.max_linear_residual < 1e-6);
    }

    #[test]
    fn underflow_is_typed() {
        let m = gaussian2(0.2);
        assert!(matches!(marginal_survival(&m, 40.0), Err(OracleError::Underflow { .. })));
        assert!(matches!(joint_survival_2d(&m, 30.0, 30.0), Err(OracleError::Underflow { .. })));
        assert!(joint_survival_2d(&m, 20.0, 20.0).unwrap().is_finite());
    }

    #[test]
    fn grid_preconditions() {
        let m = gaussian2(0.0);
        assert!(rv_slope(&m, &[0, 1], &[1e3, 1e4, 1e5]).is_err());
        assert!(rv_slope(&m, &[0, 1], &[1e3, 1e4, 1e5, 1e6, 2e6]).is_err());
    }
}
