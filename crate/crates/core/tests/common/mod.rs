#![allow(dead_code)]

use leo_meta::geometry::EARTH_RADIUS_M;
use leo_meta::SystemConfig;

pub fn config(alt_km: f64, density: f64, m: u32, theta: f64) -> SystemConfig {
    SystemConfig {
        earth_radius: EARTH_RADIUS_M,
        altitude: alt_km * 1e3,
        density,
        path_loss_exponent: 3.5,
        nakagami_m: m,
        sir_threshold: theta,
    }
}

/// Adaptive Simpson with a tolerance relative to the first coarse estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, rel_tol * whole.abs().max(1e-300), 40)
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

pub fn within_sigmas(a: f64, b: f64, se: f64, k: f64) -> bool {
    (a - b).abs() <= k * se
}
