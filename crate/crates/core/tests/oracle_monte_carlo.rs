//! Oracle joint survival against seeded Monte Carlo counts.

use taildep::model::{CorrelationMatrix, EllipticalModel, RadialLaw};
use taildep::oracle::{joint_survival_2d, joint_survival_3d};
use taildep::sampling::sample_elliptical;

fn within_three_se(log_p: f64, hits: usize, n: usize) -> (f64, f64) {
    let p = log_p.exp();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (hits as f64 / n as f64 - p, 3.0 * se)
}

#[test]
fn trivariate_joint_survival_matches_monte_carlo() {
    let m = EllipticalModel::new(
        CorrelationMatrix::trivariate(0.4, 0.2, 0.5).unwrap(),
        RadialLaw::kotz(1.0, 0.0, 1.0, 2.0).unwrap(),
    );
    let a = [1.2, 1.4, 1.3];
    let log_p = joint_survival_3d(&m, a[0], a[1], a[2]).unwrap();
    assert!((1e-5..1e-3).contains(&log_p.exp()), "p = {}", log_p.exp());
    let n = 10_000_000;
    let s = sample_elliptical(&m, n, 2024).unwrap();
    let hits = s.data.chunks(3).filter(|r| r[0] > a[0] && r[1] > a[1] && r[2] > a[2]).count();
    let (diff, bound) = within_three_se(log_p, hits, n);
    assert!(diff.abs() <= bound, "p = {}, hits = {hits}, diff {diff:.3e} > {bound:.3e}", log_p.exp());
}

#[test]
fn bivariate_joint_survival_matches_monte_carlo() {
    let m = EllipticalModel::bivariate(-0.3, RadialLaw::lognormal(0.0, 1.0).unwrap()).unwrap();
    let (a, b) = (3.0, 2.0);
    let log_p = joint_survival_2d(&m, a, b).unwrap();
    let n = 2_000_000;
    let s = sample_elliptical(&m, n, 77).unwrap();
    let hits = s.data.chunks(2).filter(|r| r[0] > a && r[1] > b).count();
    let (diff, bound) = within_three_se(log_p, hits, n);
    assert!(diff.abs() <= bound, "p = {}, hits = {hits}, diff {diff:.3e} > {bound:.3e}", log_p.exp());
}
