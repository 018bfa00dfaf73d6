//! Closed-form tail quantities: bivariate and partial residual dependence
//! indices, the limit function of the normalized joint survival, and the
//! asymptotic expansions used as references for the oracle.
//!
//! Convention: with `q` the minimum of the quadratic program and `α = sqrt(q)`,
//! the partial index is `η_I = q^{-θ/2}` and the exponents are
//! `γ_j = μ_j α^{θ-2}`. The literal alternative `η_I = q^{-θ}`,
//! `γ_j = μ_j q^{θ-1}` is carried alongside for comparison.

use std::f64::consts::PI;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EllipticalModel, RadialFamily, RadialLaw, RHO_MARGIN};
use crate::oracle::{self, OracleError};
use crate::qp::AlphaSolution;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("operation requires a Kotz Type III radial law")]
    NotKotz,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Which reading of the partial-index exponents to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `η_I = q^{-θ/2}`, `γ_j = μ_j α^{θ-2}`.
    #[default]
    Adopted,
    /// `η_I = q^{-θ}`, `γ_j = μ_j q^{θ-1}`.
    PaperLiteral,
}

/// Bivariate residual dependence index for correlation `rho` and Weibull tail coefficient `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BivariateIndex {
    pub rho: f64,
    pub theta: f64,
    /// `sqrt(2/(1+ρ))`.
    pub alpha_rho: f64,
    /// `sqrt(2(1+ρ))`.
    pub lambda_rho: f64,
    /// `((1+ρ)/2)^{θ/2}`.
    pub eta: f64,
}

pub fn bivariate_index(rho: f64, theta: f64) -> Result<BivariateIndex, TheoryError> {
    check_rho(rho)?;
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(TheoryError::DomainError(format!("theta = {theta} must be >= 0")));
    }
    Ok(BivariateIndex {
        rho,
        theta,
        alpha_rho: (2.0 / (1.0 + rho)).sqrt(),
        lambda_rho: (2.0 * (1.0 + rho)).sqrt(),
        eta: (0.5 * (1.0 + rho)).powf(0.5 * theta),
    })
}

fn check_rho(rho: f64) -> Result<(), TheoryError> {
    if rho.abs() < 1.0 - RHO_MARGIN {
        Ok(())
    } else {
        Err(TheoryError::DomainError(format!("rho = {rho} outside (-1, 1)")))
    }
}

/// `(xy)^{1/(2η)}`.
pub fn limit_s(x: f64, y: f64, eta: f64) -> f64 {
    (x * y).powf(0.5 / eta)
}

/// Partial residual dependence index of an index set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialIndex {
    pub solution: AlphaSolution,
    pub theta: f64,
    /// `q^{-θ/2}`.
    pub eta_i: f64,
    /// `μ_j α^{θ-2}`, ordered like the active set.
    pub gamma: Vec<f64>,
    /// `q^{-θ}`.
    pub eta_i_literal: f64,
    /// `μ_j q^{θ-1}`.
    pub gamma_literal: Vec<f64>,
}

impl PartialIndex {
    pub fn eta(&self, convention: Convention) -> f64 {
        match convention {
            Convention::Adopted => self.eta_i,
            Convention::PaperLiteral => self.eta_i_literal,
        }
    }

    pub fn exponents(&self, convention: Convention) -> &[f64] {
        match convention {
            Convention::Adopted => &self.gamma,
            Convention::PaperLiteral => &self.gamma_literal,
        }
    }
}

pub fn partial_index(sol: &AlphaSolution, theta: f64) -> Result<PartialIndex, TheoryError> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(TheoryError::DomainError(format!("theta = {theta} must be >= 0")));
    }
    let q = sol.q;
    let alpha = q.sqrt();
    Ok(PartialIndex {
        theta,
        eta_i: q.powf(-0.5 * theta),
        gamma: sol.mu.iter().map(|m| m * alpha.powf(theta - 2.0)).collect(),
        eta_i_literal: q.powf(-theta),
        gamma_literal: sol.mu.iter().map(|m| m * q.powf(theta - 1.0)).collect(),
        solution: sol.clone(),
    })
}

/// Log of the Gaussian expansion
/// `(1-ρ²)^{3/2}/(1-ρ)² (4π)^{-ρ/(1+ρ)} (ln u)^{-ρ/(1+ρ)} u^{-2/(1+ρ)}`.
pub fn ln_gaussian_expansion(rho: f64, u: f64) -> Result<f64, TheoryError> {
    check_rho(rho)?;
    if !(u > std::f64::consts::E) {
        return Err(TheoryError::DomainError(format!("u = {u} must exceed e")));
    }
    let e = rho / (1.0 + rho);
    Ok(1.5 * (1.0 - rho * rho).ln() - 2.0 * (1.0 - rho).ln() - e * (4.0 * PI).ln() - e * u.ln().ln()
        - 2.0 / (1.0 + rho) * u.ln())
}

pub fn gaussian_expansion(rho: f64, u: f64) -> Result<f64, TheoryError> {
    ln_gaussian_expansion(rho, u).map(f64::exp)
}

fn kotz_params(law: &RadialLaw) -> Result<(f64, f64, f64, f64), TheoryError> {
    match law.family() {
        RadialFamily::KotzTypeIii { k, n, r, theta } => Ok((k, n, r, theta)),
        _ => Err(TheoryError::NotKotz),
    }
}

/// Log of the bivariate marginal tail asymptote
/// `K/sqrt(2π r θ) u^{N-θ/2} exp(-r u^θ)`.
pub fn kotz_marginal_tail(law: &RadialLaw, u: f64) -> Result<f64, TheoryError> {
    let (k, n, r, theta) = kotz_params(law)?;
    if !(u > 0.0) {
        return Err(TheoryError::DomainError(format!("u = {u} must be positive")));
    }
    Ok(k.ln() - 0.5 * (2.0 * PI * r * theta).ln() + (n - 0.5 * theta) * u.ln() - r * u.powf(theta))
}

/// Two-term expansion of the marginal `1 - 1/u` quantile:
/// `(ln u / r)^{1/θ} [1 + ((N-θ/2) ln(ln u / r)/θ + ln K - ln(2π r θ)/2) / (θ ln u)]`.
pub fn kotz_b_of_u(law: &RadialLaw, u: f64) -> Result<f64, TheoryError> {
    let (k, n, r, theta) = kotz_params(law)?;
    if !(u > 1.0) {
        return Err(TheoryError::DomainError(format!("u = {u} must exceed 1")));
    }
    let lu = u.ln();
    let lead = (lu / r).powf(1.0 / theta);
    let corr = ((n - 0.5 * theta) * (lu / r).ln() / theta + k.ln() - 0.5 * (2.0 * PI * r * theta).ln())
        / (theta * lu);
    Ok(lead * (1.0 + corr))
}

/// Log-scale expansions of `S̃_u(1,1)` for a bivariate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StildeExpansion {
    pub u: f64,
    /// `ln` of `α²(1-ρ²)^{3/2}/(2π(1-ρ)²) · (1-F(b*))/(b* w(b*))`, `b* = α Q⁻¹(1-1/u)`.
    pub ln_general: f64,
    /// Fully closed form for Kotz Type III radii.
    pub ln_kotz_closed: Option<f64>,
}

pub fn stilde_expansion(model: &EllipticalModel, u: f64) -> Result<StildeExpansion, TheoryError> {
    if model.dim() != 2 {
        return Err(TheoryError::DomainError("expansion needs a bivariate model".into()));
    }
    if !(u > 1.0) {
        return Err(TheoryError::DomainError(format!("u = {u} must exceed 1")));
    }
    let rho = model.rho();
    let idx = bivariate_index(rho, 0.0)?;
    let alpha = idx.alpha_rho;
    let law = model.radial();
    let b = oracle::marginal_quantile_log_tail(model, -u.ln())?;
    let b_star = alpha * b;
    let w = law
        .scaling_w(b_star)
        .map_err(|e| TheoryError::Oracle(OracleError::Model(e)))?;
    let prefactor = (alpha * alpha).ln() + 1.5 * (1.0 - rho * rho).ln()
        - (2.0 * PI).ln()
        - 2.0 * (1.0 - rho).ln();
    let ln_general = prefactor + law.log_survival(b_star) - b_star.ln() - w.ln();
    let ln_kotz_closed = kotz_params(law).ok().map(|_| ln_kotz_closed_form(law, rho, u));
    Ok(StildeExpansion { u, ln_general, ln_kotz_closed })
}

/// Closed Kotz display with `λ = α_ρ^θ`:
/// `α^{N-θ+2}(1-ρ²)^{3/2} r^{(λ-1)N/θ} / (K(1-ρ)²) · (K²/(2πθ))^{1-λ/2}
///  (ln u)^{(1-λ)N/θ + λ/2 - 1} u^{-λ}`.
pub fn ln_kotz_closed_form(law: &RadialLaw, rho: f64, u: f64) -> f64 {
    let (k, n, r, theta) = kotz_params(law).expect("Kotz law");
    let ln_alpha = 0.5 * (2.0 / (1.0 + rho)).ln();
    let lambda = (theta * ln_alpha).exp();
    (n - theta + 2.0) * ln_alpha + 1.5 * (1.0 - rho * rho).ln() + (lambda - 1.0) * n / theta * r.ln()
        - k.ln()
        - 2.0 * (1.0 - rho).ln()
        + (1.0 - 0.5 * lambda) * (k * k / (2.0 * PI * theta)).ln()
        + ((1.0 - lambda) * n / theta + 0.5 * lambda - 1.0) * u.ln().ln()
        - lambda * u.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CorrelationMatrix;
    use crate::qp::solve_alpha;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bivariate_examples() {
        let b = bivariate_index(0.0, 2.0).unwrap();
        assert_relative_eq!(b.eta, 0.5, max_relative = 1e-15);
        assert_relative_eq!(b.alpha_rho, 2f64.sqrt(), max_relative = 1e-15);
        let b = bivariate_index(0.5, 1.0).unwrap();
        assert_relative_eq!(b.eta, 0.75f64.sqrt(), max_relative = 1e-15);
        for rho in [-0.9, 0.0, 0.7] {
            assert_eq!(bivariate_index(rho, 0.0).unwrap().eta, 1.0);
        }
        assert!(bivariate_index(1.0, 1.0).is_err());
        assert!(bivariate_index(0.2, -1.0).is_err());
    }

    #[test]
    fn limit_examples() {
        assert_eq!(limit_s(1.0, 1.0, 0.37), 1.0);
        assert_relative_eq!(limit_s(4.0, 1.0, 0.5), 4.0, max_relative = 1e-15);
        for c in [0.5, 2.0, 10.0] {
            let lhs = limit_s(c * 1.5, c * 0.7, 0.6);
            let rhs = c.powf(1.0 / 0.6) * limit_s(1.5, 0.7, 0.6);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn partial_index_examples() {
        let s = CorrelationMatrix::identity(2).unwrap();
        let p = partial_index(&solve_alpha(&s, &[0, 1]).unwrap(), 2.0).unwrap();
        assert_relative_eq!(p.eta_i, 0.5, max_relative = 1e-14);
        for g in &p.gamma {
            assert_relative_eq!(*g, 1.0, max_relative = 1e-14);
        }
        let s = CorrelationMatrix::bivariate(0.5).unwrap();
        let p = partial_index(&solve_alpha(&s, &[0, 1]).unwrap(), 1.0).unwrap();
        assert_relative_eq!(p.eta_i, 0.75f64.sqrt(), max_relative = 1e-12);
        let s = CorrelationMatrix::trivariate(0.1, 0.3, -0.2).unwrap();
        let sol = solve_alpha(&s, &[0, 1, 2]).unwrap();
        let p = partial_index(&sol, 0.0).unwrap();
        assert_eq!(p.eta_i, 1.0);
        assert_eq!(p.eta_i_literal, 1.0);
        for (g, m) in p.gamma.iter().zip(&sol.mu) {
            assert_relative_eq!(*g, m / sol.q, max_relative = 1e-14);
        }
    }

    #[test]
    fn gaussian_expansion_examples() {
        assert_relative_eq!(gaussian_expansion(0.0, 100.0).unwrap(), 1e-4, max_relative = 1e-13);
        let u: f64 = 1e6;
        let direct = 0.75f64.powf(1.5) / 0.25 * (4.0 * PI).powf(-1.0 / 3.0) * u.ln().powf(-1.0 / 3.0)
            * u.powf(-4.0 / 3.0);
        assert_relative_eq!(gaussian_expansion(0.5, u).unwrap(), direct, max_relative = 1e-12);
        let near = gaussian_expansion(1e-9, 1e4).unwrap();
        assert_relative_eq!(near, 1e-8, max_relative = 1e-7);
        assert!(gaussian_expansion(0.3, 2.0).is_err());
    }

    #[test]
    fn kotz_marginal_tail_examples() {
        let g = RadialLaw::kotz(1.0, 0.0, 0.5, 2.0).unwrap();
        let v = kotz_marginal_tail(&g, 3.0).unwrap().exp();
        assert_relative_eq!(v, (2.0 * PI).powf(-0.5) / 3.0 * (-4.5f64).exp(), max_relative = 1e-14);
        assert!((v - 1.477e-3).abs() < 1e-6);
        let e = RadialLaw::kotz(1.0, 0.0, 1.0, 1.0).unwrap();
        let v = kotz_marginal_tail(&e, 10.0).unwrap();
        assert_relative_eq!(v, -0.5 * (2.0 * PI).ln() - 0.5 * 10f64.ln() - 10.0, max_relative = 1e-14);
        assert!(matches!(kotz_marginal_tail(&RadialLaw::unit_gumbel(), 3.0), Err(TheoryError::NotKotz)));
    }

    #[test]
    fn kotz_b_structure() {
        // With K = 1 and N = θ/2 only the -ln(2π r θ)/2 correction survives.
        let law = RadialLaw::kotz(1.0, 1.0, 1.0, 2.0).unwrap();
        let u: f64 = 1e5;
        let lead = u.ln().sqrt();
        let expected = lead * (1.0 - 0.5 * (4.0 * PI).ln() / (2.0 * u.ln()));
        assert_relative_eq!(kotz_b_of_u(&law, u).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn closed_form_recovers_gaussian_display() {
        let law = RadialLaw::kotz(1.0, 0.0, 0.5, 2.0).unwrap();
        for rho in [-0.3, 0.25, 0.5] {
            for u in [1e4, 1e6, 1e8] {
                let a = ln_kotz_closed_form(&law, rho, u);
                let b = ln_gaussian_expansion(rho, u).unwrap();
                assert!(((a - b).exp() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_exponent_at_independence() {
        for theta in [1.0, 2.0, 3.0] {
            let law = RadialLaw::kotz(1.0, 0.0, 1.0, theta).unwrap();
            let lo = ln_kotz_closed_form(&law, 0.0, 1e4);
            let hi = ln_kotz_closed_form(&law, 0.0, 1e8);
            let lambda = 2f64.powf(0.5 * theta);
            // N = 0: the log-log factor has exponent λ/2 - 1.
            let slope = (hi - lo) / (1e8f64.ln() - 1e4f64.ln());
            let loglog = (0.5 * lambda - 1.0) * (1e8f64.ln().ln() - 1e4f64.ln().ln()) / (1e8f64.ln() - 1e4f64.ln());
            assert_relative_eq!(slope, -lambda + loglog, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn scaling_relation(x in 0.05f64..20.0, y in 0.05f64..20.0, c in 0.05f64..20.0, eta in 0.05f64..1.0) {
            let lhs = limit_s(c * x, c * y, eta);
            let rhs = c.powf(1.0 / eta) * limit_s(x, y, eta);
            prop_assert!((lhs / rhs - 1.0).abs() < 1e-12);
        }

        #[test]
        fn eta_identities(rho in -0.99f64..0.99, theta in 0.0f64..4.0) {
            let b = bivariate_index(rho, theta).unwrap();
            prop_assert!((b.eta - b.alpha_rho.powf(-theta)).abs() < 1e-14);
            prop_assert!((b.alpha_rho * b.lambda_rho - 2.0).abs() < 1e-14);
            prop_assert!(b.eta > 0.0 && b.eta <= 1.0);
            let s = CorrelationMatrix::bivariate(rho).unwrap();
            let p = partial_index(&solve_alpha(&s, &[0, 1]).unwrap(), theta).unwrap();
            prop_assert!((p.eta_i - b.eta).abs() < 1e-12);
            for g in &p.gamma {
                prop_assert!((g - 0.5 / b.eta).abs() < 1e-12 * g.max(1.0));
            }
        }

        #[test]
        fn eta_monotone(rho in -0.9f64..0.9, theta in 0.1f64..4.0, d in 0.01f64..0.09) {
            let a = bivariate_index(rho, theta).unwrap().eta;
            prop_assert!(bivariate_index(rho + d, theta).unwrap().eta > a);
            prop_assert!(bivariate_index(rho, theta + d).unwrap().eta < a);
        }

        #[test]
        fn gamma_sum_and_range(seed in any::<u64>(), k in 2usize..6, theta in 0.0f64..3.0) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let s = crate::qp::random_correlation(k, &mut rng);
            let idx: Vec<usize> = (0..k).collect();
            let p = partial_index(&solve_alpha(&s, &idx).unwrap(), theta).unwrap();
            let sum: f64 = p.gamma.iter().sum();
            prop_assert!((sum - 1.0 / p.eta_i).abs() < 1e-12 * sum.max(1.0));
            prop_assert!(p.gamma.iter().all(|&g| g > 0.0));
            let full = s.cholesky().quad_form_inv(&vec![1.0; k]);
            prop_assert!(p.eta_i >= full.powf(-0.5 * theta) - 1e-12 && p.eta_i <= 1.0);
        }
    }
}
