//! Closed-form and quadrature results for the conditional coverage
//! probability `P_s(θ)`.
//!
//! * [`conditional_coverage_lemma1`] evaluates `P_s(θ)` for a fixed
//!   constellation, replacing the Nakagami-`M` CDF of the serving link by the
//!   Alzer lower bound `(1 − e^{−ηx})^M` (exact for `M = 1`).
//! * [`moment`] averages `P_s(θ)^b` over the Poisson constellation with the
//!   PGFL, a multinomial expansion of the `b`-th power and two nested
//!   Gauss-Chebyshev rules.
//! * [`beta_fit`] and [`MetaDistribution`] match a beta law to `(M₁, M₂)` and
//!   expose its CCDF as the approximate meta distribution.

use crate::geometry::DerivedGeometry;
use crate::special::{self, ChebyshevRule};
use crate::{Error, Result, SystemConfig};
use log::warn;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Default order of both Gauss-Chebyshev rules.
pub const DEFAULT_QUAD_ORDER: usize = 1024;

/// Lemma-1 sums may leave `[0, 1]` by rounding; larger excursions are logged.
const CLAMP_TOLERANCE: f64 = 1e-9;

/// Outer (serving distance) and inner (interference field) quadrature rules.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRules {
    pub outer: ChebyshevRule,
    pub inner: ChebyshevRule,
}

impl QuadratureRules {
    pub fn new(outer_order: usize, inner_order: usize) -> Result<Self> {
        Ok(Self {
            outer: ChebyshevRule::new(outer_order)?,
            inner: ChebyshevRule::new(inner_order)?,
        })
    }
}

impl Default for QuadratureRules {
    fn default() -> Self {
        Self::new(DEFAULT_QUAD_ORDER, DEFAULT_QUAD_ORDER).expect("nonzero default order")
    }
}

/// `η = M (M!)^{−1/M}`, the constant of the Alzer bound on the Gamma CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaConstant {
    pub m: u32,
    pub eta: f64,
}

pub fn eta(m: u32) -> EtaConstant {
    assert!(m >= 1, "Nakagami parameter must be at least 1");
    let eta = m as f64 * (-special::ln_factorial(m) / m as f64).exp();
    EtaConstant { m, eta }
}

fn clamp_probability(v: f64, what: &str) -> f64 {
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&v) {
        warn!("{what} = {v:e} outside [0, 1] beyond rounding; clamping");
    }
    v.clamp(0.0, 1.0)
}

/// `Σ_m C(M,m)(−1)^{m+1} Π_i (1 + mηθ s_i / M)^{−M}` with `s_i = (r₁/r_i)^α`.
pub(crate) fn lemma1_from_ratios(theta: f64, ratios: &[f64], m: u32, eta: f64) -> f64 {
    if m == 1 {
        return ratios.iter().map(|&s| 1.0 / (1.0 + theta * s)).product();
    }
    let mf = m as f64;
    let mut total = 0.0;
    for k in 1..=m {
        let scale = k as f64 * eta * theta / mf;
        let log_prod: f64 = ratios.iter().map(|&s| (scale * s).ln_1p()).sum();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * special::binomial(m, k) as f64 * (-mf * log_prod).exp();
    }
    total
}

/// Conditional coverage of a fixed constellation given the serving distance
/// `r1` and the sorted interferer distances.
pub fn conditional_coverage_lemma1(
    theta: f64,
    r1: f64,
    interferer_distances: &[f64],
    config: &SystemConfig,
) -> Result<f64> {
    let geo = config.derive()?;
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {theta} must be nonnegative")));
    }
    let slack = 1e-9 * geo.max_distance;
    if r1 < geo.min_distance - slack || r1 > geo.max_distance + slack {
        return Err(Error::InvalidArgument(format!(
            "serving distance {r1} outside [{}, {}]",
            geo.min_distance, geo.max_distance
        )));
    }
    let mut prev = r1;
    for &r in interferer_distances {
        if r < prev || r > geo.max_distance + slack {
            return Err(Error::InvalidArgument(format!(
                "interferer distances must be sorted within [{r1}, {}]",
                geo.max_distance
            )));
        }
        prev = r;
    }
    let alpha = config.path_loss_exponent;
    let ratios: Vec<f64> = interferer_distances
        .iter()
        .map(|&r| (r1 / r).powf(alpha))
        .collect();
    let m = config.nakagami_m;
    let value = lemma1_from_ratios(theta, &ratios, m, eta(m).eta);
    Ok(clamp_probability(value, "lemma-1 coverage"))
}

/// `λπ R_S / R_E`: the area element of the cap in terms of the user distance
/// is `2·(λπ R_S/R_E)·r dr`.
fn area_rate(config: &SystemConfig, geo: &DerivedGeometry) -> f64 {
    config.density * PI * geo.orbit_radius / config.earth_radius
}

fn pdf_in_support(r: f64, config: &SystemConfig, geo: &DerivedGeometry) -> f64 {
    let c = area_rate(config, geo);
    let rmin = geo.min_distance;
    let mean = c * (geo.max_distance * geo.max_distance - rmin * rmin);
    // υ r e^{−c r²} rewritten relative to R_min so that it never overflows
    2.0 * c * r * (-c * (r * r - rmin * rmin)).exp() / -(-mean).exp_m1()
}

/// Density of the serving (nearest) distance given at least one visible
/// satellite.
pub fn nearest_distance_pdf(r: f64, config: &SystemConfig, geo: &DerivedGeometry) -> Result<f64> {
    if r < geo.min_distance || r > geo.max_distance {
        return Err(Error::Domain(format!(
            "distance {r} outside support [{}, {}]",
            geo.min_distance, geo.max_distance
        )));
    }
    Ok(pdf_in_support(r, config, geo))
}

/// Same density, but zero outside the support.
pub fn nearest_distance_density(r: f64, config: &SystemConfig, geo: &DerivedGeometry) -> f64 {
    if r < geo.min_distance || r > geo.max_distance {
        0.0
    } else {
        pdf_in_support(r, config, geo)
    }
}

/// CDF of the serving distance given at least one visible satellite.
pub fn nearest_distance_cdf(r: f64, config: &SystemConfig, geo: &DerivedGeometry) -> f64 {
    if r <= geo.min_distance {
        return 0.0;
    }
    if r >= geo.max_distance {
        return 1.0;
    }
    let c = area_rate(config, geo);
    let rmin = geo.min_distance;
    let mean = c * (geo.max_distance * geo.max_distance - rmin * rmin);
    (-c * (r * r - rmin * rmin)).exp_m1() / (-mean).exp_m1()
}

fn check_composition(b_vector: &[u32], m: u32) -> Result<()> {
    if b_vector.len() != m as usize {
        return Err(Error::InvalidArgument(format!(
            "composition {b_vector:?} must have {m} parts"
        )));
    }
    if b_vector.iter().all(|&v| v == 0) {
        return Err(Error::InvalidArgument("composition of zero".into()));
    }
    Ok(())
}

/// Interference exponent `Q(r₁, θ)` for every composition at once. Each entry
/// is `2πλ(R_S/R_E) ∫_{r₁}^{R_max} (1 − Π_m (1 + mηθ r₁^α/(M r^α))^{−M b_m}) r dr`
/// evaluated with the inner rule.
fn q_exponents(
    r1: f64,
    theta: f64,
    compositions: &[Vec<u32>],
    config: &SystemConfig,
    geo: &DerivedGeometry,
    eta: f64,
    inner: &ChebyshevRule,
) -> Vec<f64> {
    let rmax = geo.max_distance;
    let mut acc = vec![0.0; compositions.len()];
    if r1 >= rmax || theta == 0.0 {
        return acc;
    }
    let m = config.nakagami_m as usize;
    let mf = m as f64;
    let alpha = config.path_loss_exponent;
    let mut log_terms = vec![0.0; m];
    for (c_n, w_n) in inner.mapped(r1, rmax) {
        let u = eta * theta * (r1 / c_n).powf(alpha) / mf;
        for (k, slot) in log_terms.iter_mut().enumerate() {
            *slot = ((k + 1) as f64 * u).ln_1p();
        }
        for (a, comp) in acc.iter_mut().zip(compositions) {
            let s: f64 = comp
                .iter()
                .zip(&log_terms)
                .map(|(&b, &l)| b as f64 * l)
                .sum();
            // 1 − Π(...) = −expm1(−M Σ b_m ln(1 + m u))
            *a += w_n * c_n * -(-mf * s).exp_m1();
        }
    }
    let scale = 2.0 * area_rate(config, geo) * 0.5 * (rmax - r1);
    acc.iter_mut().for_each(|a| *a = (*a * scale).max(0.0));
    acc
}

/// Inner quadrature `Q(r₁, θ)` for a single composition `(b₁, …, b_M)`.
pub fn q_exponent(
    r1: f64,
    theta: f64,
    b_vector: &[u32],
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rule_inner: &ChebyshevRule,
) -> Result<f64> {
    check_composition(b_vector, config.nakagami_m)?;
    if r1 < geo.min_distance || r1 > geo.max_distance {
        return Err(Error::Domain(format!(
            "serving distance {r1} outside [{}, {}]",
            geo.min_distance, geo.max_distance
        )));
    }
    let eta = eta(config.nakagami_m).eta;
    let q = q_exponents(r1, theta, &[b_vector.to_vec()], config, geo, eta, rule_inner);
    Ok(q[0])
}

/// `M_b(θ)` together with the quadrature orders that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentResult {
    pub order_b: u32,
    pub theta: f64,
    pub value: f64,
    pub quad_outer: usize,
    pub quad_inner: usize,
}

/// Signed expansion coefficient `b!/Π b_m! · Π_m (C(M,m)(−1)^{m+1})^{b_m}`.
fn expansion_coefficient(b: u32, comp: &[u32], m: u32) -> Result<f64> {
    let mut coef = special::multinomial(b, comp)?;
    for (k, &bk) in comp.iter().enumerate() {
        let k = k as u32 + 1;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        coef *= (sign * special::binomial(m, k) as f64).powi(bk as i32);
    }
    Ok(coef)
}

/// `b`-th moment of the conditional coverage probability.
pub fn moment(
    b: u32,
    theta: f64,
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rules: &QuadratureRules,
) -> Result<MomentResult> {
    if b == 0 {
        return Err(Error::InvalidArgument("moment order must be positive".into()));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold {theta} must be finite and nonnegative")));
    }
    config.validate()?;
    let m = config.nakagami_m;
    if b > 4 || m > 5 {
        warn!(
            "moment b={b} with M={m} expands into {} compositions",
            special::binomial(b + m - 1, m - 1)
        );
    }
    let comps = special::compositions(b, m as usize);
    let coefs = comps
        .iter()
        .map(|c| expansion_coefficient(b, c, m))
        .collect::<Result<Vec<_>>>()?;
    let eta = eta(m).eta;
    let (rmin, rmax) = (geo.min_distance, geo.max_distance);

    let nodes: Vec<(f64, f64)> = rules.outer.mapped(rmin, rmax).collect();
    // node-level work is parallel; the reduction below runs in a fixed order
    let per_node: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&(d, w)| {
            let weight = w * pdf_in_support(d, config, geo);
            q_exponents(d, theta, &comps, config, geo, eta, &rules.inner)
                .into_iter()
                .map(|q| weight * (-q).exp())
                .collect()
        })
        .collect();

    let half = 0.5 * (rmax - rmin);
    let mut conditional = 0.0;
    for (j, coef) in coefs.iter().enumerate() {
        let integral: f64 = per_node.iter().map(|terms| terms[j]).sum();
        conditional += coef * half * integral;
    }
    let value = clamp_probability(geo.visibility_probability * conditional, "moment");
    Ok(MomentResult {
        order_b: b,
        theta,
        value,
        quad_outer: rules.outer.order(),
        quad_inner: rules.inner.order(),
    })
}

/// Mean of `P_s(θ)`, i.e. the classical coverage probability.
pub fn coverage_probability(
    theta: f64,
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rules: &QuadratureRules,
) -> Result<f64> {
    moment(1, theta, config, geo, rules).map(|r| r.value)
}

/// `(M₁, M₂)` at one threshold.
pub fn first_two_moments(
    theta: f64,
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rules: &QuadratureRules,
) -> Result<(MomentResult, MomentResult)> {
    Ok((
        moment(1, theta, config, geo, rules)?,
        moment(2, theta, config, geo, rules)?,
    ))
}

fn variance_from(m1: f64, m2: f64) -> f64 {
    let v = m2 - m1 * m1;
    if v < -1e-6 {
        warn!("negative variance {v:e} from m1={m1}, m2={m2}; quadrature too coarse?");
    }
    v.max(0.0)
}

/// `Var P_s(θ) = M₂ − M₁²`, the user-fairness indicator.
pub fn variance(
    theta: f64,
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rules: &QuadratureRules,
) -> Result<f64> {
    let (m1, m2) = first_two_moments(theta, config, geo, rules)?;
    Ok(variance_from(m1.value, m2.value))
}

/// Why a moment pair could not be matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitIssue {
    /// `M₁` not strictly inside `(0, 1)`.
    MeanOutOfRange,
    /// `M₂ ≤ M₁²`: no spread left after quadrature error.
    NoVariance,
    /// `M₂ ≥ M₁`: a two-point law at best.
    SecondMomentTooLarge,
}

/// Beta law matched to `(M₁, M₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFit {
    pub kappa: f64,
    pub beta: f64,
    pub m1: f64,
    pub m2: f64,
    pub valid: bool,
    pub issue: Option<FitIssue>,
}

impl BetaFit {
    /// `Pr(Z > x) = 1 − I_x(κ, β)`.
    pub fn ccdf(&self, x: f64) -> Result<f64> {
        if !self.valid {
            return Err(Error::UnfittableMoments {
                m1: self.m1,
                m2: self.m2,
            });
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("reliability {x} outside [0, 1]")));
        }
        Ok(1.0 - special::regularized_incomplete_beta(x, self.kappa, self.beta)?)
    }
}

pub fn beta_fit(m1: f64, m2: f64) -> BetaFit {
    let issue = if !(m1 > 0.0 && m1 < 1.0) {
        Some(FitIssue::MeanOutOfRange)
    } else if !(m2 > m1 * m1) {
        Some(FitIssue::NoVariance)
    } else if !(m2 < m1) {
        Some(FitIssue::SecondMomentTooLarge)
    } else {
        None
    };
    let denom = m1 * m1 - m2;
    let kappa = (m1 * m2 - m1 * m1) / denom;
    let beta = (1.0 - m1) * (m2 - m1) / denom;
    let valid = issue.is_none() && kappa > 0.0 && beta > 0.0 && kappa.is_finite() && beta.is_finite();
    if let Some(issue) = issue {
        warn!("beta fit rejected for m1={m1}, m2={m2}: {issue:?}");
    }
    BetaFit {
        kappa,
        beta,
        m1,
        m2,
        valid,
        issue,
    }
}

/// Mean and second raw moment of Beta(κ, β).
pub fn beta_moments(kappa: f64, beta: f64) -> (f64, f64) {
    let s = kappa + beta;
    (kappa / s, kappa * (kappa + 1.0) / (s * (s + 1.0)))
}

/// Beta-approximated distribution of `P_s(θ)` at one threshold.
///
/// The beta law is fitted to the unconditional moments. `P_s` also has an
/// atom of size `1 − visibility_probability` at zero (no satellite in view)
/// that the continuous fit does not represent; it is reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaDistribution {
    pub theta: f64,
    pub m1: MomentResult,
    pub m2: MomentResult,
    pub fit: BetaFit,
    pub visibility_probability: f64,
}

impl MetaDistribution {
    pub fn ccdf(&self, x: f64) -> Result<f64> {
        self.fit.ccdf(x)
    }

    pub fn empty_cap_mass(&self) -> f64 {
        1.0 - self.visibility_probability
    }

    pub fn variance(&self) -> f64 {
        variance_from(self.m1.value, self.m2.value)
    }
}

pub fn meta_distribution(
    theta: f64,
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rules: &QuadratureRules,
) -> Result<MetaDistribution> {
    let (m1, m2) = first_two_moments(theta, config, geo, rules)?;
    Ok(MetaDistribution {
        theta,
        m1,
        m2,
        fit: beta_fit(m1.value, m2.value),
        visibility_probability: geo.visibility_probability,
    })
}

/// `Pr(P_s(θ) > x)` under the beta approximation.
pub fn meta_ccdf(
    theta: f64,
    x: f64,
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rules: &QuadratureRules,
) -> Result<f64> {
    meta_distribution(theta, config, geo, rules)?.ccdf(x)
}
