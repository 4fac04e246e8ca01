//! Seeded Monte Carlo oracle for the analytic results.
//!
//! Each realization draws a Poisson number of satellites on the visible cap.
//! By Archimedes' hat-box theorem the height `z` of a uniform point on a sphere
//! is uniform, so cap points have `z ~ U[R_E, R_S]`; the azimuth never enters
//! the user distance and is not drawn.
//!
//! Random streams are counter based: realization `i` of a run seeded with `s`
//! uses ChaCha8 keyed by `seed_from_u64(s)` on stream `i`. Results therefore do
//! not depend on how realizations are scheduled across threads.

use crate::analytic;
use crate::geometry::{distance_from_height, DerivedGeometry};
use crate::special::regularized_upper_gamma;
use crate::{Error, Result, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_REALIZATIONS: usize = 10_000;
pub const DEFAULT_FADING_DRAWS: usize = 2_000;

/// Identity of one realization's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub master_seed: u64,
    pub index: u64,
}

impl StreamId {
    pub fn new(master_seed: u64, index: u64) -> Self {
        Self { master_seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.index);
        rng
    }
}

/// User-to-satellite distances of one constellation draw, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationRealization {
    pub distances: Vec<f64>,
    pub seed_info: Option<StreamId>,
}

impl ConstellationRealization {
    pub fn serving_distance(&self) -> Option<f64> {
        self.distances.first().copied()
    }

    pub fn interferers(&self) -> &[f64] {
        self.distances.get(1..).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }
}

pub fn sample_constellation<R: Rng + ?Sized>(
    config: &SystemConfig,
    geo: &DerivedGeometry,
    rng: &mut R,
) -> ConstellationRealization {
    let mean = config.density * geo.cap_area;
    let count = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let re = config.earth_radius;
    let span = geo.orbit_radius - re;
    let mut distances: Vec<f64> = (0..count)
        .map(|_| {
            let z = re + span * rng.random::<f64>();
            distance_from_height(z, geo, config).expect("height drawn inside the cap")
        })
        .collect();
    distances.sort_by(f64::total_cmp);
    ConstellationRealization {
        distances,
        seed_info: None,
    }
}

/// Draws the constellation for `stream` and hands back the generator so that
/// fading draws continue on the same stream.
pub fn sample_from_stream(
    config: &SystemConfig,
    geo: &DerivedGeometry,
    stream: StreamId,
) -> (ConstellationRealization, ChaCha8Rng) {
    let mut rng = stream.rng();
    let mut realization = sample_constellation(config, geo, &mut rng);
    realization.seed_info = Some(stream);
    (realization, rng)
}

/// How `P_s(θ)` is evaluated for a fixed constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode {
    /// Closed-form Rayleigh product; only valid for `M = 1`.
    ExactM1,
    /// Average over fading draws of the interferers, with the serving link's
    /// Gamma CCDF evaluated exactly.
    FadingMc,
    /// The Alzer-bound expression of the analytic engine.
    Lemma1,
}

impl CoverageMode {
    pub fn name(self) -> &'static str {
        match self {
            CoverageMode::ExactM1 => "exact-m1",
            CoverageMode::FadingMc => "fading-mc",
            CoverageMode::Lemma1 => "lemma1",
        }
    }

    /// `exact-m1` when it applies, `fading-mc` otherwise.
    pub fn default_for(m: u32) -> Self {
        if m == 1 {
            CoverageMode::ExactM1
        } else {
            CoverageMode::FadingMc
        }
    }
}

impl fmt::Display for CoverageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-m1" => Ok(CoverageMode::ExactM1),
            "fading-mc" => Ok(CoverageMode::FadingMc),
            "lemma1" => Ok(CoverageMode::Lemma1),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected exact-m1, fading-mc or lemma1)"
            ))),
        }
    }
}

fn check_mode(mode: CoverageMode, config: &SystemConfig, fading_draws: usize) -> Result<()> {
    if mode == CoverageMode::ExactM1 && config.nakagami_m != 1 {
        return Err(Error::ModeMismatch {
            mode: mode.name(),
            m: config.nakagami_m,
        });
    }
    if mode == CoverageMode::FadingMc && fading_draws == 0 {
        return Err(Error::InvalidArgument(
            "fading-mc needs at least one fading draw".into(),
        ));
    }
    Ok(())
}

/// Conditional coverage `P_s(θ)` of one realization; zero when nothing is
/// visible.
pub fn conditional_ps<R: Rng + ?Sized>(
    realization: &ConstellationRealization,
    theta: f64,
    config: &SystemConfig,
    mode: CoverageMode,
    fading_draws: usize,
    rng: &mut R,
) -> Result<f64> {
    check_mode(mode, config, fading_draws)?;
    let Some(r1) = realization.serving_distance() else {
        return Ok(0.0);
    };
    let alpha = config.path_loss_exponent;
    let ratios: Vec<f64> = realization
        .interferers()
        .iter()
        .map(|&r| (r1 / r).powf(alpha))
        .collect();
    let m = config.nakagami_m;
    let ps = match mode {
        CoverageMode::ExactM1 => ratios.iter().map(|&s| 1.0 / (1.0 + theta * s)).product(),
        CoverageMode::Lemma1 => {
            analytic::lemma1_from_ratios(theta, &ratios, m, analytic::eta(m).eta)
        }
        CoverageMode::FadingMc => {
            if ratios.is_empty() {
                1.0
            } else {
                let mf = m as f64;
                let fading = Gamma::new(mf, 1.0 / mf).expect("positive shape and scale");
                let mut sum = 0.0;
                for _ in 0..fading_draws {
                    // interference normalized by the serving path loss r₁^{−α}
                    let interference: f64 = ratios.iter().map(|&s| s * fading.sample(rng)).sum();
                    sum += regularized_upper_gamma(m, mf * theta * interference);
                }
                sum / fading_draws as f64
            }
        }
    };
    Ok(ps.clamp(0.0, 1.0))
}

/// Run parameters for [`estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub realizations: usize,
    pub mode: CoverageMode,
    pub fading_draws: usize,
    pub master_seed: u64,
    /// Reliability levels `x` at which `Pr(P_s > x)` is tabulated.
    pub ccdf_grid: Vec<f64>,
    pub keep_samples: bool,
}

impl EstimateOptions {
    pub fn new(master_seed: u64, mode: CoverageMode) -> Self {
        Self {
            realizations: DEFAULT_REALIZATIONS,
            mode,
            fading_draws: DEFAULT_FADING_DRAWS,
            master_seed,
            ccdf_grid: default_ccdf_grid(),
            keep_samples: false,
        }
    }

    pub fn realizations(mut self, n: usize) -> Self {
        self.realizations = n;
        self
    }

    pub fn fading_draws(mut self, n: usize) -> Self {
        self.fading_draws = n;
        self
    }

    pub fn keep_samples(mut self, keep: bool) -> Self {
        self.keep_samples = keep;
        self
    }
}

/// `{0.01, 0.02, …, 0.99}`.
pub fn default_ccdf_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationEstimate {
    pub theta: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub m1_hat: f64,
    pub m1_se: f64,
    pub m2_hat: f64,
    pub m2_se: f64,
    /// Fraction of realizations with no visible satellite.
    pub empty_fraction: f64,
    pub empirical_ccdf: Vec<(f64, f64)>,
    pub per_realization_ps: Option<Vec<f64>>,
}

impl SimulationEstimate {
    pub fn variance_hat(&self) -> f64 {
        (self.m2_hat - self.m1_hat * self.m1_hat).max(0.0)
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (nf - 1.0)).sqrt() / nf.sqrt())
}

/// Estimates `M₁`, `M₂` and the CCDF of `P_s(θ)` from independent
/// constellation draws.
pub fn estimate(theta: f64, config: &SystemConfig, options: &EstimateOptions) -> Result<SimulationEstimate> {
    if options.realizations == 0 {
        return Err(Error::InvalidArgument("at least one realization is required".into()));
    }
    let geo = config.derive()?;
    check_mode(options.mode, config, options.fading_draws)?;

    let results: Vec<(f64, bool)> = (0..options.realizations as u64)
        .into_par_iter()
        .map(|i| {
            let (realization, mut rng) = sample_from_stream(config, &geo, StreamId::new(options.master_seed, i));
            let ps = conditional_ps(&realization, theta, config, options.mode, options.fading_draws, &mut rng)?;
            Ok((ps, realization.is_empty()))
        })
        .collect::<Result<_>>()?;

    let n = results.len();
    let ps: Vec<f64> = results.iter().map(|&(p, _)| p).collect();
    let (m1_hat, m1_se) = mean_and_se(ps.iter().copied(), n);
    let (m2_hat, m2_se) = mean_and_se(ps.iter().map(|p| p * p), n);
    let empty = results.iter().filter(|&&(_, e)| e).count();

    let mut sorted = ps.clone();
    sorted.sort_by(f64::total_cmp);
    let empirical_ccdf = options
        .ccdf_grid
        .iter()
        .map(|&x| {
            let at_most = sorted.partition_point(|&v| v <= x);
            (x, (n - at_most) as f64 / n as f64)
        })
        .collect();

    Ok(SimulationEstimate {
        theta,
        realizations: n,
        master_seed: options.master_seed,
        m1_hat,
        m1_se,
        m2_hat,
        m2_se,
        empty_fraction: empty as f64 / n as f64,
        empirical_ccdf,
        per_realization_ps: options.keep_samples.then_some(ps),
    })
}
