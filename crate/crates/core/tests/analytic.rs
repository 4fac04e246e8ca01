mod common;

use common::{adaptive_simpson, config};
use leo_meta::analytic::{self, QuadratureRules};
use leo_meta::special::{self, ChebyshevRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn q_exponent_agrees_with_adaptive_oracle_across_random_parameters() {
    let rule = ChebyshevRule::new(analytic::DEFAULT_QUAD_ORDER).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..40 {
        let m = rng.random_range(1..=4u32);
        let b = rng.random_range(1..=3u32);
        let comps = special::compositions(b, m as usize);
        let comp = comps[rng.random_range(0..comps.len())].clone();
        let alt = rng.random_range(200.0..1500.0);
        let lam = 10f64.powf(rng.random_range(-13.0..-12.0));
        let theta = 10f64.powf(rng.random_range(-2.0..1.0));
        let mut c = config(alt, lam, m, theta);
        c.path_loss_exponent = rng.random_range(2.5..4.5);
        let g = c.derive().unwrap();
        let r1 = g.min_distance + rng.random_range(0.0..0.9) * (g.max_distance - g.min_distance);

        let q = analytic::q_exponent(r1, theta, &comp, &c, &g, &rule).unwrap();

        let eta = analytic::eta(m).eta;
        let mf = m as f64;
        let integrand = |r: f64| {
            let mut prod = 1.0;
            for (k, &bk) in comp.iter().enumerate() {
                let base = 1.0 + (k + 1) as f64 * eta * theta * r1.powf(c.path_loss_exponent) / (mf * r.powf(c.path_loss_exponent));
                prod *= base.powf(-mf * bk as f64);
            }
            (1.0 - prod) * r
        };
        let oracle = 2.0 * PI * lam * g.orbit_radius / c.earth_radius
            * adaptive_simpson(&integrand, r1, g.max_distance, 1e-11);
        assert!((q - oracle).abs() <= 1e-4 * oracle, "M={m} comp={comp:?}: {q} vs {oracle}");
    }
}

#[test]
fn beta_ccdf_integrates_to_mean() {
    let rules = QuadratureRules::default();
    for (alt, lam, m, theta) in [(200.0, 1e-12, 1, 1.0), (800.0, 1e-12, 3, 1.0), (400.0, 1e-13, 1, 0.1)] {
        let c = config(alt, lam, m, theta);
        let g = c.derive().unwrap();
        let md = analytic::meta_distribution(theta, &c, &g, &rules).unwrap();
        assert!(md.fit.valid);
        let area = adaptive_simpson(&|x| md.ccdf(x).unwrap(), 0.0, 1.0, 1e-9);
        assert!((area - md.m1.value).abs() < 1e-3, "{area} vs {}", md.m1.value);
    }
}

#[test]
fn meta_ccdf_endpoints_and_monotonicity() {
    let rules = QuadratureRules::default();
    let c = config(400.0, 1e-12, 1, 1.0);
    let g = c.derive().unwrap();
    assert_eq!(analytic::meta_ccdf(1.0, 0.0, &c, &g, &rules).unwrap(), 1.0);
    assert_eq!(analytic::meta_ccdf(1.0, 1.0, &c, &g, &rules).unwrap(), 0.0);
    let md = analytic::meta_distribution(1.0, &c, &g, &rules).unwrap();
    let mut prev = 1.0;
    for i in 0..=100 {
        let v = md.ccdf(i as f64 / 100.0).unwrap();
        assert!(v <= prev + 1e-12);
        prev = v;
    }
    assert!(md.ccdf(1.5).is_err());
    assert!(md.empty_cap_mass() > 0.0 && md.empty_cap_mass() < 1e-3);
}

#[test]
fn moments_satisfy_jensen_over_study_range() {
    let rules = QuadratureRules::new(256, 256).unwrap();
    for lam in [1e-12, 1e-13] {
        for m in [1, 3] {
            for alt in (200..=1500).step_by(100) {
                let c = config(alt as f64, lam, m, 0.1);
                let g = c.derive().unwrap();
                let (m1, m2) = analytic::first_two_moments(0.1, &c, &g, &rules).unwrap();
                assert!(m1.value * m1.value <= m2.value && m2.value <= m1.value, "λ={lam} M={m} alt={alt}");
                assert!(analytic::beta_fit(m1.value, m2.value).valid);
            }
        }
    }
}

#[test]
fn moment_records_quadrature_orders() {
    let rules = QuadratureRules::new(64, 96).unwrap();
    let c = config(600.0, 1e-12, 2, 0.5);
    let g = c.derive().unwrap();
    let r = analytic::moment(2, 0.5, &c, &g, &rules).unwrap();
    assert_eq!((r.order_b, r.quad_outer, r.quad_inner, r.theta), (2, 64, 96, 0.5));
    assert!(analytic::moment(0, 0.5, &c, &g, &rules).is_err());
}
