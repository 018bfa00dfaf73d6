//! Numerical building blocks shared by the model, oracle and estimators.
//!
//! Everything tail-related works on natural logarithms of probabilities. The
//! helpers here never form a linear-scale probability that could underflow.

use std::collections::BinaryHeap;

use thiserror::Error;

/// `ln(sqrt(pi))`.
const LN_SQRT_PI: f64 = 0.572_364_942_924_700_1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("root finding did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    RootNotConverged { iterations: usize, lo: f64, hi: f64 },
    #[error("root is not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("adaptive quadrature did not reach tolerance: estimate {value}, error {error} after {panels} panels")]
    QuadratureNotConverged { value: f64, error: f64, panels: usize },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// `ln(1 - exp(x))` for `x <= 0`, accurate across the whole range.
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(erfc(x))` with full relative accuracy far into the upper tail.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 25.0 {
        libm::erfc(x).ln()
    } else {
        // erfc(x) = exp(-x^2) / (sqrt(pi) * t), with t the continued fraction
        // x + (1/2)/(x + 1/(x + (3/2)/(x + ...))) evaluated bottom-up.
        let mut t = x;
        for n in (1..=40).rev() {
            t = x + (n as f64 * 0.5) / t;
        }
        -x * x - LN_SQRT_PI - t.ln()
    }
}

/// `ln Q(a, x)`, the log of the regularized upper incomplete gamma function.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_prefix = -x + a * x.ln() - libm::lgamma(a);
    if x < a + 1.0 {
        // Series for P, then Q = 1 - P.
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let ln_p = ln_prefix + sum.ln();
        ln_one_minus_exp(ln_p)
    } else {
        // Modified Lentz on the continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        ln_prefix + h.ln()
    }
}

/// Brent's method on a sign-changing bracket `[lo, hi]`.
///
/// Terminates when the bracket is narrower than `abs_tol + rel_tol * |x|`.
pub fn brent<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericError::NotBracketed { lo, hi, flo: fa, fhi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 0.5 * (abs_tol + rel_tol * b.abs()) + 2.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(NumericError::RootNotConverged {
        iterations: max_iter,
        lo: b.min(c),
        hi: b.max(c),
    })
}

/// Locates the point in `[lo, hi]` where a non-increasing function drops to
/// `level`. Values at or above `level` are "inside". Returns `hi` if the
/// function never drops below `level`.
pub fn bisect_level<F>(mut g: F, lo: f64, hi: f64, level: f64, iterations: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    if g(hi) >= level {
        return hi;
    }
    let (mut inside, mut outside) = (lo, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if g(mid) >= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    outside
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let resasc = asc * half.abs();
    let value = kronrod * half;
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (1.0f64).min((200.0 * error / resasc).powf(1.5));
    }
    let resabs = (kronrod.abs()) * half.abs();
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Panel { a, b, value, error }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss-Kronrod (7/15) integration over the panels given
/// by consecutive `breaks`, refining the worst panel until the summed error
/// estimate is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<Integral, NumericError>
where
    F: FnMut(f64) -> f64,
{
    assert!(breaks.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let p = gk15(&mut f, w[0], w[1]);
            value += p.value;
            error += p.error;
            heap.push(p);
        }
    }
    let mut panels = heap.len();
    loop {
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral { value, error, panels });
        }
        if panels >= max_panels {
            return Err(NumericError::QuadratureNotConverged { value, error, panels });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => return Ok(Integral { value, error, panels }),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel can no longer be split; accept its contribution as is.
            error -= worst.error;
            let frozen = Panel { error: 0.0, ..worst };
            heap.push(frozen);
            if heap.iter().all(|p| p.error == 0.0) {
                return Ok(Integral { value, error: error.max(0.0), panels });
            }
            continue;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        panels += 1;
    }
}

/// Lower Cholesky factor of a small dense symmetric matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a = L Lᵀ`, failing if any pivot is `<= min_pivot`.
    pub fn new(a: &[f64], n: usize, min_pivot: f64) -> Result<Self, NumericError> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= min_pivot || !s.is_finite() {
                        return Err(NumericError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major lower factor.
    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[i * n + k] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_form_inv(&self, b: &[f64]) -> f64 {
        self.solve_lower(b).iter().map(|v| v * v).sum()
    }
}

/// Ordinary least squares of `y` on `x`; returns (slope, intercept, max |residual|).
pub fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).abs())
        .fold(0.0, f64::max);
    (slope, intercept, resid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk15_exact_on_polynomials() {
        // Kronrod 15 integrates degree 22 exactly.
        let r = integrate(|x| x.powi(20) - 3.0 * x.powi(7), &[-1.0, 2.0], 0.0, 1e-12, 10).unwrap();
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert_relative_eq!(r.value, exact, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_kink_and_peak() {
        let r = integrate(|x: f64| (-200.0 * x.abs()).exp(), &[-1.0, 0.3, 1.0], 0.0, 1e-11, 2000)
            .unwrap();
        let exact = (1.0 - (-200.0f64).exp()) / 100.0;
        assert_relative_eq!(r.value, exact, max_relative = 1e-10);
    }

    #[test]
    fn ln_erfc_branches_agree() {
        // Continued fraction vs direct evaluation just below the switch.
        for &x in &[6.0, 10.0, 20.0, 24.5] {
            let mut t = x;
            for n in (1..=40).rev() {
                t = x + (n as f64 * 0.5) / t;
            }
            let cf = -x * x - LN_SQRT_PI - t.ln();
            assert_relative_eq!(cf, ln_erfc(x), max_relative = 1e-14);
        }
        assert!(ln_erfc(100.0).is_finite());
        assert_relative_eq!(ln_erfc(0.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ln_gamma_q_known_values() {
        // a = 1: Q = exp(-x).
        for &x in &[0.1, 1.0, 5.0, 300.0] {
            assert_relative_eq!(ln_gamma_q(1.0, x), -x, max_relative = 1e-13);
        }
        // a = 1/2: Q = erfc(sqrt x).
        for &x in &[0.3, 2.0, 50.0, 700.0] {
            assert_relative_eq!(ln_gamma_q(0.5, x), ln_erfc(x.sqrt()), max_relative = 1e-12);
        }
        // a = 3/2: Q = erfc(sqrt x) + 2 sqrt(x/pi) exp(-x).
        let x: f64 = 2.5;
        let q = libm::erfc(x.sqrt()) + 2.0 * (x / std::f64::consts::PI).sqrt() * (-x).exp();
        assert_relative_eq!(ln_gamma_q(1.5, x), q.ln(), max_relative = 1e-13);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 0.0, 1e-14, 100).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), max_relative = 1e-13);
        assert!(matches!(
            brent(|x| x * x + 1.0, 0.0, 1.0, 0.0, 1e-12, 100),
            Err(NumericError::NotBracketed { .. })
        ));
    }

    #[test]
    fn cholesky_solves() {
        let a = [4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0];
        let c = Cholesky::new(&a, 3, 1e-12).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert_relative_eq!(ax, (i + 1) as f64, max_relative = 1e-13);
        }
        assert!(Cholesky::new(&[1.0, 2.0, 2.0, 1.0], 2, 1e-12).is_err());
    }

    #[test]
    fn ln_one_minus_exp_is_accurate_near_zero() {
        assert_relative_eq!(ln_one_minus_exp(-1e-20), (1e-20f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(ln_one_minus_exp(-50.0), -(-50.0f64).exp(), max_relative = 1e-12);
    }
}
