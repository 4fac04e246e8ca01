//! Spherical geometry of the Earth / satellite-shell system.
//!
//! The user sits at `(0, 0, R_E)`. Satellites live on the sphere of radius
//! `R_S = R_E + h` and are visible when they lie above the plane tangent to the
//! Earth at the user, i.e. on the cap `z ∈ [R_E, R_S]`. All lengths are meters.

use crate::{Error, Result};
use std::f64::consts::PI;

/// Mean Earth radius used by the CLI defaults.
pub const EARTH_RADIUS_M: f64 = 6.371e6;

/// Physical scenario shared by the analytic and simulation engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub earth_radius: f64,
    /// Orbit altitude above mean sea level; also the shortest possible link.
    pub altitude: f64,
    /// Satellites per square meter of the orbit sphere.
    pub density: f64,
    pub path_loss_exponent: f64,
    pub nakagami_m: u32,
    /// Linear SIR threshold.
    pub sir_threshold: f64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(what.to_string()))
            }
        };
        check(self.earth_radius > 0.0 && self.earth_radius.is_finite(), "earth_radius must be positive")?;
        check(self.altitude > 0.0 && self.altitude.is_finite(), "altitude must be positive")?;
        check(self.density > 0.0 && self.density.is_finite(), "density must be positive")?;
        check(
            self.path_loss_exponent > 2.0 && self.path_loss_exponent.is_finite(),
            "path_loss_exponent must exceed 2",
        )?;
        check(self.nakagami_m >= 1, "nakagami_m must be at least 1")?;
        check(self.sir_threshold > 0.0 && self.sir_threshold.is_finite(), "sir_threshold must be positive")?;
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedGeometry> {
        derive(self)
    }

    pub fn with_altitude(mut self, altitude: f64) -> Self {
        self.altitude = altitude;
        self
    }

    pub fn with_threshold(mut self, theta: f64) -> Self {
        self.sir_threshold = theta;
        self
    }
}

/// Quantities that follow from a [`SystemConfig`] and are reused everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedGeometry {
    /// `R_S = R_E + h`.
    pub orbit_radius: f64,
    /// Nearest possible satellite distance (the altitude).
    pub min_distance: f64,
    /// Horizon distance `sqrt(R_S² − R_E²)`.
    pub max_distance: f64,
    /// Area of the visible cap, `2π R_S h`.
    pub cap_area: f64,
    /// Probability that at least one satellite is visible.
    pub visibility_probability: f64,
}

pub fn derive(config: &SystemConfig) -> Result<DerivedGeometry> {
    config.validate()?;
    let re = config.earth_radius;
    let rs = re + config.altitude;
    let max_distance = (rs * rs - re * re).sqrt();
    let cap_area = 2.0 * PI * rs * config.altitude;
    let visibility_probability = -(-config.density * cap_area).exp_m1();
    Ok(DerivedGeometry {
        orbit_radius: rs,
        min_distance: config.altitude,
        max_distance,
        cap_area,
        visibility_probability,
    })
}

/// Distance from the user to a cap point at Cartesian height `z`.
pub fn distance_from_height(z: f64, geo: &DerivedGeometry, config: &SystemConfig) -> Result<f64> {
    let re = config.earth_radius;
    let rs = geo.orbit_radius;
    if !(re..=rs).contains(&z) {
        return Err(Error::Domain(format!(
            "height {z} outside cap [{re}, {rs}]"
        )));
    }
    // r² = R_S² + R_E² − 2 R_E z, written to avoid cancellation near the zenith
    let d = rs - re;
    let r2 = d * d + 2.0 * re * (rs - z);
    Ok(r2.sqrt().clamp(geo.min_distance, geo.max_distance))
}

/// Inverse of [`distance_from_height`].
pub fn height_from_distance(r: f64, geo: &DerivedGeometry, config: &SystemConfig) -> Result<f64> {
    if !(geo.min_distance..=geo.max_distance).contains(&r) {
        return Err(Error::Domain(format!(
            "distance {r} outside [{}, {}]",
            geo.min_distance, geo.max_distance
        )));
    }
    let re = config.earth_radius;
    let rs = geo.orbit_radius;
    let d = rs - re;
    Ok(rs - (r * r - d * d) / (2.0 * re))
}

/// Mean number of satellites on the visible cap, `λ·|A|`.
pub fn expected_visible_count(config: &SystemConfig, geo: &DerivedGeometry) -> f64 {
    mean_count(config.density, geo)
}

/// `λ·|A|` for any nonnegative density, including the empty process.
pub fn mean_count(density: f64, geo: &DerivedGeometry) -> f64 {
    density.max(0.0) * geo.cap_area
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(alt: f64, density: f64) -> SystemConfig {
        SystemConfig {
            earth_radius: EARTH_RADIUS_M,
            altitude: alt,
            density,
            path_loss_exponent: 3.5,
            nakagami_m: 1,
            sir_threshold: 1.0,
        }
    }

    #[test]
    fn derived_values_at_200km() {
        let c = config(2e5, 1e-12);
        let g = c.derive().unwrap();
        assert_eq!(g.orbit_radius, 6.571e6);
        let expected_vis = 1.0 - (-2.0 * PI * 1e-12 * 2e5 * 6.571e6_f64).exp();
        assert!((g.visibility_probability - expected_vis).abs() < 1e-15);
        assert!((g.visibility_probability - 0.99974).abs() < 5e-6);
        let rmax = (6.571e6_f64.powi(2) - 6.371e6_f64.powi(2)).sqrt();
        assert!((g.max_distance - rmax).abs() < 1e-6);
        assert!((g.max_distance - 1.60885e6).abs() < 10.0);
        assert!(g.max_distance >= g.min_distance && g.max_distance <= g.orbit_radius);
    }

    #[test]
    fn visibility_vanishes_with_density() {
        let g = config(2e5, 1e-30).derive().unwrap();
        assert!(g.visibility_probability < 1e-15);
        assert_eq!(mean_count(0.0, &g), 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(config(0.0, 1e-12).derive().is_err());
        assert!(config(2e5, 0.0).derive().is_err());
        let mut c = config(2e5, 1e-12);
        c.path_loss_exponent = 2.0;
        assert!(matches!(c.derive(), Err(Error::InvalidConfig(_))));
        c.path_loss_exponent = 3.5;
        c.nakagami_m = 0;
        assert!(c.derive().is_err());
        c.nakagami_m = 1;
        c.sir_threshold = -1.0;
        assert!(c.derive().is_err());
    }

    #[test]
    fn distance_endpoints_and_midpoint() {
        let c = config(2e5, 1e-12);
        let g = c.derive().unwrap();
        assert!((distance_from_height(g.orbit_radius, &g, &c).unwrap() - 2e5).abs() < 1e-6);
        assert!((distance_from_height(c.earth_radius, &g, &c).unwrap() - g.max_distance).abs() < 1e-6);
        let z = 6.471e6;
        let direct = (6.571e6_f64.powi(2) + 6.371e6_f64.powi(2) - 2.0 * 6.371e6 * z).sqrt();
        let r = distance_from_height(z, &g, &c).unwrap();
        assert!((r - direct).abs() < 1e-6 * direct);
        assert!((r - 1.14639e6).abs() < 10.0);
        assert!(distance_from_height(c.earth_radius - 1.0, &g, &c).is_err());
        assert!(distance_from_height(g.orbit_radius + 1.0, &g, &c).is_err());
    }

    #[test]
    fn expected_count_examples() {
        let g = config(2e5, 1e-12).derive().unwrap();
        let n = expected_visible_count(&config(2e5, 1e-12), &g);
        assert!((n - 8.2566).abs() < 1e-3);
        let g13 = config(2e5, 1e-13).derive().unwrap();
        assert!((expected_visible_count(&config(2e5, 1e-13), &g13) - 0.82566).abs() < 1e-4);
        for alt in [2e5, 8e5, 1.5e6] {
            let c = config(alt, 1e-12);
            let g = c.derive().unwrap();
            let mu = expected_visible_count(&c, &g);
            assert!((g.visibility_probability - (1.0 - (-mu).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn cap_area_matches_surface_quadrature() {
        // ∫_0^{φmax} 2π R_S² sin φ dφ with cos φmax = R_E / R_S, composite Simpson
        for alt in [2e5, 8e5, 1.5e6] {
            let c = config(alt, 1e-12);
            let g = c.derive().unwrap();
            let rs = g.orbit_radius;
            let phi_max = (c.earth_radius / rs).acos();
            let n = 20_000;
            let h = phi_max / n as f64;
            let f = |p: f64| 2.0 * PI * rs * rs * p.sin();
            let mut s = f(0.0) + f(phi_max);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            let area = s * h / 3.0;
            assert!((area - g.cap_area).abs() / g.cap_area < 1e-9);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn height_distance_round_trip(alt in 1e5..2e6f64, frac in 0.0..=1.0f64) {
                let c = config(alt, 1e-12);
                let g = c.derive().unwrap();
                let z = c.earth_radius + frac * alt;
                let r = distance_from_height(z, &g, &c).unwrap();
                prop_assert!(r >= g.min_distance && r <= g.max_distance);
                let back = height_from_distance(r, &g, &c).unwrap();
                prop_assert!((back - z).abs() <= 1e-9 * z);
            }

            #[test]
            fn distance_decreasing_in_height(alt in 1e5..2e6f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
                prop_assume!((a - b).abs() > 1e-6);
                let c = config(alt, 1e-12);
                let g = c.derive().unwrap();
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let r_lo = distance_from_height(c.earth_radius + lo * alt, &g, &c).unwrap();
                let r_hi = distance_from_height(c.earth_radius + hi * alt, &g, &c).unwrap();
                prop_assert!(r_hi < r_lo);
            }
        }
    }
}
