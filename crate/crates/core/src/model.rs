//! Correlation matrices, radial laws and the elliptical model container.
//!
//! An elliptical vector is `X = R * L * U` where `U` is uniform on the unit
//! sphere, `R >= 0` is the radius independent of `U`, and `L` is the lower
//! Cholesky factor of the correlation matrix (`L Lᵀ = Σ`). In the bivariate
//! case this is `R (U1, ρ U1 + sqrt(1-ρ²) U2)`.
//!
//! Radial laws are described through their exact log-survival function
//! `ln P{R > u}`. All downstream tail arithmetic stays in the log domain.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{self, Cholesky, NumericError};

/// Off-diagonal entries must satisfy `|ρ| < 1 - RHO_MARGIN`.
pub const RHO_MARGIN: f64 = 1e-6;
/// Smallest Cholesky pivot accepted for a correlation matrix.
pub const MIN_PIVOT: f64 = 1e-12;
const DIAGONAL_TOL: f64 = 1e-12;
/// Nats below the starting value at which tail integrals are truncated.
pub const TAIL_CUTOFF_NATS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("correlation matrix must be square with dimension >= 2 (got {rows} rows)")]
    BadShape { rows: usize },
    #[error("diagonal entry {index} is {value}, expected 1")]
    DiagonalNotUnit { index: usize, value: f64 },
    #[error("entry ({row}, {col}) = {value} is outside (-1, 1) by the 1e-6 margin")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("correlation matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("invalid radial law parameter: {0}")]
    InvalidParameter(String),
    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("quantile search failed: {0}")]
    ConvergenceFailure(String),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
}

/// Symmetric positive-definite matrix with unit diagonal and cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    k: usize,
    entries: Vec<f64>,
    chol: Cholesky,
}

impl CorrelationMatrix {
    /// Validates a raw square array. The lower triangle is authoritative; the
    /// upper triangle is overwritten with it.
    pub fn new(raw: &[Vec<f64>]) -> Result<Self, ModelError> {
        let k = raw.len();
        if k < 2 || raw.iter().any(|row| row.len() != k) {
            return Err(ModelError::BadShape { rows: k });
        }
        let mut entries = vec![0.0; k * k];
        for i in 0..k {
            let d = raw[i][i];
            if !((d - 1.0).abs() <= DIAGONAL_TOL) {
                return Err(ModelError::DiagonalNotUnit { index: i, value: d });
            }
            entries[i * k + i] = 1.0;
            for j in 0..i {
                let v = raw[i][j];
                if !(v.abs() < 1.0 - RHO_MARGIN) {
                    return Err(ModelError::EntryOutOfRange { row: i, col: j, value: v });
                }
                entries[i * k + j] = v;
                entries[j * k + i] = v;
            }
        }
        let chol = Cholesky::new(&entries, k, MIN_PIVOT).map_err(|e| match e {
            NumericError::NotPositiveDefinite { row, pivot } => {
                ModelError::NotPositiveDefinite { row, pivot }
            }
            other => ModelError::ConvergenceFailure(other.to_string()),
        })?;
        Ok(Self { k, entries, chol })
    }

    pub fn identity(k: usize) -> Result<Self, ModelError> {
        Self::equicorrelated(k, 0.0)
    }

    pub fn bivariate(rho: f64) -> Result<Self, ModelError> {
        Self::new(&[vec![1.0, rho], vec![rho, 1.0]])
    }

    pub fn trivariate(rho12: f64, rho13: f64, rho23: f64) -> Result<Self, ModelError> {
        Self::new(&[
            vec![1.0, rho12, rho13],
            vec![rho12, 1.0, rho23],
            vec![rho13, rho23, 1.0],
        ])
    }

    pub fn equicorrelated(k: usize, rho: f64) -> Result<Self, ModelError> {
        let raw: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        Self::new(&raw)
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Row-major block `Σ_{rows, cols}`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        rows.iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }
}

/// Parametric family of the radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialFamily {
    /// `R² ~ χ²(dof)`; with `dof` equal to the dimension the vector is Gaussian.
    GaussianChi { dof: u32 },
    /// Unit Gumbel law, with its mass below zero placed at zero.
    UnitGumbel,
    /// `P{R > u} = K u^N exp(-r u^θ)` above the support's lower endpoint.
    KotzTypeIii {
        #[serde(rename = "K")]
        k: f64,
        #[serde(rename = "N")]
        n: f64,
        r: f64,
        theta: f64,
    },
    /// `ln R ~ Normal(mu, sigma²)`.
    Lognormal { mu: f64, sigma: f64 },
    /// Hazard `e^{a u}`, i.e. `P{R > u} = exp(-(e^{a u} - 1)/a)`.
    ExpScaling { a: f64 },
}

/// A validated radial law with its support lower endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialLaw {
    family: RadialFamily,
    lower: f64,
}

impl RadialLaw {
    pub fn new(family: RadialFamily) -> Result<Self, ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidParameter(msg.to_string()));
        let lower = match family {
            RadialFamily::GaussianChi { dof } => {
                if dof == 0 {
                    return bad("GaussianChi needs dof >= 1");
                }
                0.0
            }
            RadialFamily::UnitGumbel => 0.0,
            RadialFamily::KotzTypeIii { k, n, r, theta } => {
                if !(k > 0.0 && r > 0.0 && theta > 0.0 && n.is_finite()) {
                    return bad("KotzTypeIII needs K > 0, r > 0, theta > 0 and finite N");
                }
                kotz_lower_endpoint(k, n, r, theta)?
            }
            RadialFamily::Lognormal { mu, sigma } => {
                if !(sigma > 0.0 && mu.is_finite()) {
                    return bad("Lognormal needs sigma > 0");
                }
                0.0
            }
            RadialFamily::ExpScaling { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return bad("ExpScaling needs a > 0");
                }
                0.0
            }
        };
        Ok(Self { family, lower })
    }

    pub fn gaussian_chi(dof: u32) -> Self {
        Self::new(RadialFamily::GaussianChi { dof }).expect("valid dof")
    }

    pub fn unit_gumbel() -> Self {
        Self::new(RadialFamily::UnitGumbel).expect("valid")
    }

    pub fn kotz(k: f64, n: f64, r: f64, theta: f64) -> Result<Self, ModelError> {
        Self::new(RadialFamily::KotzTypeIii { k, n, r, theta })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self, ModelError> {
        Self::new(RadialFamily::Lognormal { mu, sigma })
    }

    pub fn exp_scaling(a: f64) -> Result<Self, ModelError> {
        Self::new(RadialFamily::ExpScaling { a })
    }

    pub fn family(&self) -> RadialFamily {
        self.family
    }

    /// Lower endpoint `u₀`: `P{R > u} = 1` for `u < u₀`.
    pub fn support_lower(&self) -> f64 {
        self.lower
    }

    /// Weibull tail coefficient θ with `w(u) = u^{θ-1} L(u)`, when it exists.
    pub fn weibull_tail_coefficient(&self) -> Option<f64> {
        match self.family {
            RadialFamily::GaussianChi { .. } => Some(2.0),
            RadialFamily::UnitGumbel => Some(1.0),
            RadialFamily::KotzTypeIii { theta, .. } => Some(theta),
            RadialFamily::Lognormal { .. } => Some(0.0),
            RadialFamily::ExpScaling { .. } => None,
        }
    }

    /// `ln P{R > u}`.
    pub fn log_survival(&self, u: f64) -> f64 {
        if u < self.lower || u.is_nan() {
            return 0.0;
        }
        if u == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        match self.family {
            RadialFamily::GaussianChi { dof } => numeric::ln_gamma_q(0.5 * dof as f64, 0.5 * u * u),
            RadialFamily::UnitGumbel => {
                let t = (-u).exp();
                if t == 0.0 {
                    -u
                } else {
                    -u + (-(-t).exp_m1() / t).ln()
                }
            }
            RadialFamily::KotzTypeIii { k, n, r, theta } => kotz_log_tail(k, n, r, theta, u),
            RadialFamily::Lognormal { mu, sigma } => {
                if u <= 0.0 {
                    0.0
                } else {
                    let z = (u.ln() - mu) / (sigma * std::f64::consts::SQRT_2);
                    if z < 0.0 {
                        (-0.5 * libm::erfc(-z)).ln_1p()
                    } else {
                        -std::f64::consts::LN_2 + numeric::ln_erfc(z)
                    }
                }
            }
            RadialFamily::ExpScaling { a } => -(a * u).exp_m1() / a,
        }
    }

    /// Inverse of the distribution function: `u` with `P{R <= u} = p`.
    pub fn quantile(&self, p: f64) -> Result<f64, ModelError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ModelError::ProbabilityOutOfRange(p));
        }
        self.quantile_log_tail((-p).ln_1p())
    }

    /// `u` with `ln P{R > u} = log_tail`; use this form for deep tails.
    pub fn quantile_log_tail(&self, log_tail: f64) -> Result<f64, ModelError> {
        if !(log_tail < 0.0) || log_tail == f64::NEG_INFINITY {
            return Err(ModelError::ProbabilityOutOfRange(1.0 - log_tail.exp()));
        }
        if self.log_survival(self.lower) <= log_tail {
            // Atom at the lower endpoint.
            return Ok(self.lower);
        }
        let lo = self.lower;
        let mut hi = self.lower.max(1.0);
        let mut steps = 0;
        while self.log_survival(hi) > log_tail {
            hi *= 2.0;
            steps += 1;
            if steps > 2000 || !hi.is_finite() {
                return Err(ModelError::ConvergenceFailure(format!(
                    "no upper bracket for log tail {log_tail}"
                )));
            }
        }
        numeric::brent(|u| self.log_survival(u) - log_tail, lo, hi, 1e-300, 1e-13, 200)
            .map_err(|e| ModelError::ConvergenceFailure(e.to_string()))
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("median exists")
    }

    /// Scaling function `w(u)`; closed form where the family has one,
    /// otherwise `(1 - F(u)) / ∫_u^∞ (1 - F(s)) ds` by quadrature.
    pub fn scaling_w(&self, u: f64) -> Result<f64, ModelError> {
        match self.family {
            RadialFamily::KotzTypeIii { r, theta, .. } => Ok(r * theta * u.powf(theta - 1.0)),
            RadialFamily::ExpScaling { a } => Ok((a * u).exp()),
            _ => self.scaling_w_quadrature(u),
        }
    }

    /// Mean-residual-life form of `w(u)`, always by quadrature.
    pub fn scaling_w_quadrature(&self, u: f64) -> Result<f64, ModelError> {
        let l0 = self.log_survival(u);
        let level = l0 - TAIL_CUTOFF_NATS;
        let mut d = 1e-3 * u.abs().max(1.0);
        let mut steps = 0;
        while self.log_survival(u + d) >= level {
            d *= 2.0;
            steps += 1;
            if steps > 2000 {
                return Err(ModelError::QuadratureFailure(format!(
                    "tail of the radial law at u = {u} does not decay"
                )));
            }
        }
        let end = numeric::bisect_level(|s| self.log_survival(s), u, u + d, level, 200);
        let mut breaks: Vec<f64> = (0..=30).rev().map(|j| u + (end - u) * 0.5f64.powi(j)).collect();
        breaks.insert(0, u);
        breaks.dedup();
        let integral = numeric::integrate(
            |s| (self.log_survival(s) - l0).exp(),
            &breaks,
            0.0,
            1e-10,
            5000,
        )
        .map_err(|e| ModelError::QuadratureFailure(e.to_string()))?;
        if !(integral.value > 0.0) {
            return Err(ModelError::QuadratureFailure(format!(
                "non-positive tail integral at u = {u}"
            )));
        }
        Ok(1.0 / integral.value)
    }
}

fn kotz_log_tail(k: f64, n: f64, r: f64, theta: f64, u: f64) -> f64 {
    if n == 0.0 {
        k.ln() - r * u.powf(theta)
    } else {
        k.ln() + n * u.ln() - r * u.powf(theta)
    }
}

/// `u₀ = max(largest root of K u^N exp(-r u^θ) = 1, (max(N,0)/(rθ))^{1/θ})`.
fn kotz_lower_endpoint(k: f64, n: f64, r: f64, theta: f64) -> Result<f64, ModelError> {
    let mode = (n.max(0.0) / (r * theta)).powf(1.0 / theta);
    let g = |u: f64| kotz_log_tail(k, n, r, theta, u);
    // g decreases beyond `mode`; for N < 0 it decreases from +inf at 0.
    let start = if n < 0.0 { f64::MIN_POSITIVE } else { mode };
    let g_start = if n < 0.0 { f64::INFINITY } else { g(mode) };
    if g_start <= 0.0 {
        return Ok(mode);
    }
    let mut hi = start.max(1.0);
    while g(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(ModelError::InvalidParameter("Kotz tail never drops below 1".into()));
        }
    }
    let root = numeric::brent(g, start, hi, 1e-300, 1e-15, 200)
        .map_err(|e| ModelError::ConvergenceFailure(e.to_string()))?;
    Ok(root.max(mode))
}

/// One cell of the Gumbel max-domain diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdaCell {
    pub u: f64,
    pub x: f64,
    /// `[1 - F(u + x/w(u))] / [1 - F(u)] - e^{-x}`.
    pub deviation: f64,
}

/// Checks `[1 - F(u + x/w(u))]/[1 - F(u)] → e^{-x}` on a grid.
pub fn mda_diagnostic(
    law: &RadialLaw,
    u_grid: &[f64],
    x_grid: &[f64],
) -> Result<Vec<MdaCell>, ModelError> {
    let mut out = Vec::with_capacity(u_grid.len() * x_grid.len());
    for &u in u_grid {
        let w = law.scaling_w(u)?;
        let base = law.log_survival(u);
        for &x in x_grid {
            let ratio = (law.log_survival(u + x / w) - base).exp();
            out.push(MdaCell { u, x, deviation: ratio - (-x).exp() });
        }
    }
    Ok(out)
}

/// Serializable description of an elliptical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Rows of the correlation matrix; the lower triangle is authoritative.
    pub correlation: Vec<Vec<f64>>,
    pub radial: RadialFamily,
}

impl ModelSpec {
    pub fn build(&self) -> Result<EllipticalModel, ModelError> {
        Ok(EllipticalModel::new(CorrelationMatrix::new(&self.correlation)?, RadialLaw::new(self.radial)?))
    }
}

/// Correlation matrix plus radial law.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalModel {
    sigma: CorrelationMatrix,
    radial: RadialLaw,
}

impl EllipticalModel {
    pub fn new(sigma: CorrelationMatrix, radial: RadialLaw) -> Self {
        Self { sigma, radial }
    }

    /// Bivariate model with correlation `rho`.
    pub fn bivariate(rho: f64, radial: RadialLaw) -> Result<Self, ModelError> {
        Ok(Self::new(CorrelationMatrix::bivariate(rho)?, radial))
    }

    /// Standard Gaussian vector with correlation `sigma`.
    pub fn gaussian(sigma: CorrelationMatrix) -> Self {
        let k = sigma.dim() as u32;
        Self::new(sigma, RadialLaw::gaussian_chi(k))
    }

    pub fn sigma(&self) -> &CorrelationMatrix {
        &self.sigma
    }

    pub fn radial(&self) -> &RadialLaw {
        &self.radial
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// Row-major lower factor `L` with `L Lᵀ = Σ`.
    pub fn factor(&self) -> &[f64] {
        self.sigma.cholesky().lower()
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec { correlation: self.sigma.rows(), radial: self.radial.family() }
    }

    /// Correlation of the first two coordinates.
    pub fn rho(&self) -> f64 {
        self.sigma.get(1, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn identity_validates_with_identity_factor() {
        let c = CorrelationMatrix::identity(3).unwrap();
        let l = c.cholesky().lower();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[i * 3 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rejects_unit_correlation() {
        assert!(matches!(
            CorrelationMatrix::bivariate(1.0),
            Err(ModelError::EntryOutOfRange { .. })
        ));
        assert!(matches!(
            CorrelationMatrix::new(&[vec![1.0, 0.0], vec![0.0, 1.1]]),
            Err(ModelError::DiagonalNotUnit { index: 1, .. })
        ));
        assert!(matches!(
            CorrelationMatrix::new(&[vec![1.0, 0.0]]),
            Err(ModelError::BadShape { .. })
        ));
    }

    #[test]
    fn equicorrelated_below_minus_half_is_not_pd() {
        // Eigenvalues of the 3x3 equicorrelated matrix are 1 + 2ρ and 1 - ρ (twice).
        let raw = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.6 });
        let min_eig = raw.symmetric_eigen().eigenvalues.min();
        assert!(min_eig < 0.0);
        assert!(matches!(
            CorrelationMatrix::equicorrelated(3, -0.6),
            Err(ModelError::NotPositiveDefinite { .. })
        ));
        assert!(CorrelationMatrix::equicorrelated(3, -0.49).is_ok());
    }

    #[test]
    fn factor_reproduces_sigma() {
        let c = CorrelationMatrix::trivariate(0.3, -0.2, 0.6).unwrap();
        let l = c.cholesky().lower();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|m| l[i * 3 + m] * l[j * 3 + m]).sum();
                assert!((v - c.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn upper_triangle_is_overwritten() {
        let c = CorrelationMatrix::new(&[vec![1.0, 0.9], vec![0.2, 1.0]]).unwrap();
        assert_eq!(c.get(0, 1), 0.2);
    }

    #[test]
    fn log_survival_examples() {
        let expo = RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(expo.log_survival(2.0), -2.0, max_relative = 1e-15);
        assert_eq!(expo.support_lower(), 0.0);

        // Integrate the hazard e^s over [0, 3] numerically.
        let es = RadialLaw::exp_scaling(1.0).unwrap();
        let hazard = numeric::integrate(f64::exp, &[0.0, 3.0], 0.0, 1e-12, 100).unwrap().value;
        assert_relative_eq!(es.log_survival(3.0), -hazard, max_relative = 1e-12);
        assert_relative_eq!(es.log_survival(3.0), -19.085_536_923_187_668, max_relative = 1e-14);

        let g = RadialLaw::unit_gumbel();
        let expected = (1.0 - (-1.0f64).exp()).ln();
        assert_relative_eq!(g.log_survival(0.0), expected, max_relative = 1e-14);
        assert!((g.log_survival(0.0) + 0.4587).abs() < 1e-4);
        assert_relative_eq!(g.log_survival(800.0), -800.0, max_relative = 1e-15);
    }

    #[test]
    fn kotz_lower_endpoint_cases() {
        // K > 1, N = 0: root of ln K = r u^θ.
        let law = RadialLaw::kotz(std::f64::consts::E, 0.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(law.support_lower(), 1.0, max_relative = 1e-12);
        assert!(law.log_survival(law.support_lower()).abs() < 1e-12);
        // N > 0: the survival must be decreasing from u₀ on.
        let law = RadialLaw::kotz(3.0, 2.0, 1.0, 1.0).unwrap();
        let u0 = law.support_lower();
        assert!(u0 > 2.0);
        assert!(law.log_survival(u0).abs() < 1e-10);
        assert!(law.log_survival(u0 + 0.1) < law.log_survival(u0));
        // The mode lies above the root: u₀ is the mode and the law has an atom there.
        let law = RadialLaw::kotz(1.0, 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(law.support_lower(), 2.0, max_relative = 1e-15);
        assert!(law.log_survival(2.0) < 0.0);
        assert_eq!(law.quantile(0.1).unwrap(), 2.0);
        assert!(RadialLaw::kotz(1.0, 0.0, -1.0, 1.0).is_err());
        assert!(RadialLaw::exp_scaling(0.0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let expo = RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap();
        let p = 1.0 - (-2.0f64).exp();
        assert_relative_eq!(expo.quantile(p).unwrap(), 2.0, max_relative = 1e-12);
        let chi2 = RadialLaw::gaussian_chi(2);
        let p = 1.0 - (-0.5f64).exp();
        assert_relative_eq!(chi2.quantile(p).unwrap(), 1.0, max_relative = 1e-12);
        for law in shipped_laws() {
            assert!(law.quantile(0.5).unwrap() < law.quantile(0.9).unwrap());
        }
        assert!(matches!(expo.quantile(1.0), Err(ModelError::ProbabilityOutOfRange(_))));
    }

    #[test]
    fn scaling_w_examples() {
        let expo = RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(expo.scaling_w(5.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(expo.scaling_w_quadrature(5.0).unwrap(), 1.0, max_relative = 1e-9);
        let chi2 = RadialLaw::gaussian_chi(2);
        let w = chi2.scaling_w(10.0).unwrap();
        assert!((w / 10.0 - 1.0).abs() < 0.01, "w(10) = {w}");
        let es = RadialLaw::exp_scaling(1.0).unwrap();
        assert_relative_eq!(es.scaling_w(3.0).unwrap(), 3f64.exp(), max_relative = 1e-12);
        let wq = es.scaling_w_quadrature(3.0).unwrap();
        assert!((wq / 3f64.exp() - 1.0).abs() < 0.06, "quadrature w(3) = {wq}");
    }

    #[test]
    fn mda_examples() {
        let expo = RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap();
        let t = mda_diagnostic(&expo, &[50.0], &[1.0]).unwrap();
        assert!(t[0].deviation.abs() < 1e-14);
        let chi2 = RadialLaw::gaussian_chi(2);
        let t = mda_diagnostic(&chi2, &[100.0], &[1.0]).unwrap();
        assert!(t[0].deviation.abs() < 1e-3);
        let g = RadialLaw::unit_gumbel();
        let t = mda_diagnostic(&g, &[10.0], &[2.0]).unwrap();
        assert!(t[0].deviation.abs() < 1e-3);
    }

    pub(crate) fn shipped_laws() -> Vec<RadialLaw> {
        vec![
            RadialLaw::gaussian_chi(2),
            RadialLaw::gaussian_chi(3),
            RadialLaw::unit_gumbel(),
            RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap(),
            RadialLaw::kotz(1.0, 0.0, 0.5, 2.0).unwrap(),
            RadialLaw::kotz(2.0, 1.5, 1.0, 3.0).unwrap(),
            RadialLaw::lognormal(0.0, 1.0).unwrap(),
            RadialLaw::exp_scaling(1.0).unwrap(),
        ]
    }

    #[test]
    fn quantile_inverts_log_survival_on_tail_grid() {
        for law in shipped_laws() {
            let lo = law.support_lower() + 1e-3;
            let hi = law.quantile_log_tail(-12.0 * std::f64::consts::LN_10).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..=40 {
                let u = lo * (hi / lo).powf(i as f64 / 40.0);
                let ls = law.log_survival(u);
                assert!(ls < prev, "{:?} not strictly decreasing at {u}", law.family());
                prev = ls;
                let back = law.quantile_log_tail(ls).unwrap();
                assert!(
                    ((back - u) / u).abs() < 1e-9,
                    "{:?}: u = {u}, back = {back}",
                    law.family()
                );
            }
        }
    }

    #[test]
    fn quadrature_w_matches_closed_form_far_out() {
        let mut laws: Vec<RadialLaw> =
            [1.0, 2.0, 3.0].iter().map(|&t| RadialLaw::kotz(1.0, 0.0, 1.0, t).unwrap()).collect();
        laws.push(RadialLaw::exp_scaling(1.0).unwrap());
        for law in laws {
            let u = 10.0 * law.median();
            let closed = law.scaling_w(u).unwrap();
            let quad = law.scaling_w_quadrature(u).unwrap();
            assert!((quad / closed - 1.0).abs() < 0.01, "{:?}: {quad} vs {closed}", law.family());
        }
    }

    #[test]
    fn u_times_w_increases_in_the_tail() {
        for law in shipped_laws() {
            let start = law.quantile(0.99).unwrap();
            let mut prev = 0.0;
            for i in 0..12 {
                let u = start * 1.25f64.powi(i);
                if law.log_survival(u) < -650.0 {
                    break;
                }
                let uw = u * law.scaling_w(u).unwrap();
                assert!(uw > prev, "{:?}: u w(u) not increasing at {u}", law.family());
                prev = uw;
            }
        }
    }
}
