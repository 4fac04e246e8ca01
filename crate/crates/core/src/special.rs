//! Numerical kernels: Gauss-Chebyshev rules, incomplete gamma and beta
//! functions, and the combinatorics behind the multinomial expansion of
//! `P_s^b`.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Gauss-Chebyshev rule of the first kind with the `sqrt(1 − ψ²)` factor folded
/// into the weights, so that
///
/// ```text
/// ∫_a^b g(r) dr ≈ (b − a)/2 · Σ_k w_k · g((b − a)/2 · ψ_k + (b + a)/2)
/// w_k = π/order · sqrt(1 − ψ_k²),   ψ_k = cos((2k − 1)π / (2·order))
/// ```
///
/// The rule is exact only for integrands of the form `p(t)·sqrt(1 − t²)`;
/// on smooth integrands that do not vanish at the end points it converges as
/// `O(order⁻²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevRule {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "Chebyshev rule order must be positive".into(),
            ));
        }
        let n = order as f64;
        let nodes: Vec<f64> = (1..=order)
            .map(|k| ((2 * k - 1) as f64 * PI / (2.0 * n)).cos())
            .collect();
        // sin of the node angle is sqrt(1 − ψ²) without cancellation
        let weights = (1..=order)
            .map(|k| ((2 * k - 1) as f64 * PI / (2.0 * n)).sin() * PI / n)
            .collect();
        Ok(Self {
            order,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes mapped onto `[a, b]`, paired with their folded weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&psi, &w)| (half * psi + mid, w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let sum: f64 = self.mapped(a, b).map(|(x, w)| w * f(x)).sum();
        0.5 * (b - a) * sum
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of `Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn ln_factorial(n: u32) -> f64 {
    if n <= 20 {
        (factorial_exact(n) as f64).ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

fn factorial_exact(n: u32) -> u64 {
    debug_assert!(n <= 20);
    (1..=n as u64).product()
}

/// `Γ(m, x)/Γ(m) = Σ_{i<m} xⁱ e^{−x} / i!` for integer `m ≥ 1`, the CCDF of
/// a unit-scale Gamma(m) variable.
pub fn regularized_upper_gamma(m: u32, x: f64) -> f64 {
    debug_assert!(m >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    if x < 600.0 {
        let mut term = (-x).exp();
        let mut sum = term;
        for i in 1..m {
            term *= x / i as f64;
            sum += term;
        }
        sum.min(1.0)
    } else {
        // e^{−x} underflows; sum the terms in log space
        let lx = x.ln();
        (0..m)
            .map(|i| (i as f64 * lx - x - ln_factorial(i)).exp())
            .sum::<f64>()
            .min(1.0)
    }
}

/// `γ(m, x)/Γ(m)` by the ascending series `e^{−x} Σ_{k≥0} x^{m+k}/(m+k)!`.
pub fn regularized_lower_gamma(m: u32, x: f64) -> f64 {
    debug_assert!(m >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = (m as f64 * x.ln() - x - ln_factorial(m)).exp();
    let mut sum = term;
    let mut k = m as f64;
    while term > 1e-17 * sum || k < x {
        k += 1.0;
        term *= x / k;
        sum += term;
        if k > 1e6 {
            break;
        }
    }
    sum.min(1.0)
}

const BETA_CF_MAX_ITER: usize = 300;
const BETA_CF_TOL: f64 = 1e-12;

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "beta shape parameters must be positive, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "incomplete beta argument {x} outside [0, 1]"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_continued_fraction(1.0 - x, b, a)?)
    } else {
        beta_continued_fraction(x, a, b)
    }
}

// Modified Lentz evaluation of the standard continued fraction for I_x(a, b).
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let prefix = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut f = d;

    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        f *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;

        if (delta - 1.0).abs() < BETA_CF_TOL {
            return Ok((prefix * f).clamp(0.0, 1.0));
        }
    }
    Err(Error::Convergence {
        routine: "incomplete beta continued fraction",
        iterations: BETA_CF_MAX_ITER,
    })
}

/// `C(n, k)` in exact integer arithmetic.
pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// All vectors of `parts` nonnegative integers summing to `b`, in reverse
/// lexicographic order (`(b, 0, …, 0)` first).
pub fn compositions(b: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if parts == 0 {
        return out;
    }
    let mut current = vec![0u32; parts];
    fill_compositions(b, 0, &mut current, &mut out);
    out
}

fn fill_compositions(rest: u32, slot: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slot + 1 == current.len() {
        current[slot] = rest;
        out.push(current.clone());
        return;
    }
    for v in (0..=rest).rev() {
        current[slot] = v;
        fill_compositions(rest - v, slot + 1, current, out);
    }
}

fn check_parts(b: u32, parts: &[u32]) -> Result<()> {
    let sum: u64 = parts.iter().map(|&p| p as u64).sum();
    if sum != b as u64 {
        return Err(Error::InvalidArgument(format!(
            "parts {parts:?} sum to {sum}, expected {b}"
        )));
    }
    Ok(())
}

/// `b! / Π b_m!` exactly; only defined for `b ≤ 20`.
pub fn multinomial_exact(b: u32, parts: &[u32]) -> Result<u64> {
    check_parts(b, parts)?;
    if b > 20 {
        return Err(Error::InvalidArgument(format!(
            "exact multinomial limited to b <= 20, got {b}"
        )));
    }
    Ok(parts
        .iter()
        .fold(factorial_exact(b), |acc, &p| acc / factorial_exact(p)))
}

/// `b! / Π b_m!` as a float; exact integer path for `b ≤ 20`, log-gamma beyond.
pub fn multinomial(b: u32, parts: &[u32]) -> Result<f64> {
    if b <= 20 {
        return multinomial_exact(b, parts).map(|v| v as f64);
    }
    check_parts(b, parts)?;
    let ln = ln_factorial(b) - parts.iter().map(|&p| ln_factorial(p)).sum::<f64>();
    Ok(ln.exp().round())
}
