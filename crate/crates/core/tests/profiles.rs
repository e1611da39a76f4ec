use isoprofile::density1d::{check_cd, named_density, Density1D, Shape};
use isoprofile::iso1d::{oracle_stride, oracle_tolerance, profile_bruteforce, profile_structured};
use isoprofile::model_profiles::{case3_closed_form, model_profile, model_profile_mode, ProfileMode};
use proptest::prelude::*;
use std::f64::consts::PI;

mod common;
use common::{printed_case3, sphere_cap_value};

#[test]
fn sphere_model_values() {
    assert!((model_profile(1.0, 2.0, PI, 0.5).unwrap().value - 0.5).abs() < 1e-6);
    assert!((model_profile(2.0, 3.0, PI, 0.5).unwrap().value - 2.0 / PI).abs() < 1e-6);
    for &v in &[0.1, 0.3, 0.7] {
        for &n in &[2.0, 3.0] {
            let got = model_profile(n - 1.0, n, PI, v).unwrap().value;
            let want = sphere_cap_value(n, v);
            assert!((got - want).abs() < 1e-6, "N={n} v={v}: {got} vs {want}");
        }
    }
}

#[test]
fn case3_matches_printed_formula() {
    for &n in &[1.5, 2.0, 3.0] {
        for &v in &[0.1, 0.5, 0.9] {
            let want = printed_case3(n, 1.0, v);
            let got = model_profile(0.0, n, 1.0, v).unwrap().value;
            assert!((got - want).abs() < 1e-6, "N={n} v={v}: {got} vs {want}");
            assert!((case3_closed_form(n, 1.0, v).unwrap() - want).abs() < 1e-6);
        }
    }
}

#[test]
fn dispatch_agrees_with_infimum_on_a_corner_of_the_matrix() {
    for &(k, n, d) in &[(-1.0, 2.0, 1.0), (1.0, 3.0, PI), (0.0, 1.5, PI)] {
        for &v in &[0.1, 0.5] {
            let a = model_profile_mode(k, n, d, v, ProfileMode::Dispatch).unwrap().value;
            let b = model_profile_mode(k, n, d, v, ProfileMode::Infimum).unwrap().value;
            assert!((a - b).abs() < 1e-4, "K={k} N={n} D={d} v={v}: {a} vs {b}");
        }
    }
}

#[test]
fn model_is_nonincreasing_in_diameter() {
    for &(k, n) in &[(1.0, 2.0), (0.0, 2.0), (-1.0, 3.0)] {
        let vals: Vec<f64> = [0.5, 1.0, 2.0, 3.0]
            .iter()
            .map(|&d| model_profile(k, n, d, 0.3).unwrap().value)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-6), "K={k} N={n}: {vals:?}");
    }
}

#[test]
fn exact_one_dimensional_profiles() {
    let sin = named_density("sin").unwrap();
    let lin = named_density("linear").unwrap();
    for i in 1..20 {
        let v = i as f64 / 20.0;
        let s = profile_structured(&sin, v).unwrap().value;
        assert!((s - (v * (1.0 - v)).sqrt()).abs() < 1e-6, "sin v={v}");
        let l = profile_structured(&lin, v).unwrap().value;
        assert!((l - 2.0 * v.sqrt().min((1.0 - v).sqrt())).abs() < 1e-6, "linear v={v}");
    }
}

#[test]
fn structured_search_matches_bruteforce_on_catalog() {
    for name in ["uniform", "sin", "sin2", "linear", "cosh", "exp"] {
        let d = named_density(name).unwrap();
        let stride = oracle_stride(&d);
        let tol = oracle_tolerance(&d, stride).max(1e-6);
        for i in 1..20 {
            let v = i as f64 / 20.0;
            let s = profile_structured(&d, v).unwrap().value;
            let b = profile_bruteforce(&d, v, 2, stride).unwrap().value;
            assert!(s <= b + tol, "{name} v={v}: {s} vs {b}");
            assert!((s - b).abs() <= tol, "{name} v={v}: {s} vs {b} tol {tol}");
        }
    }
}

#[test]
fn sampled_cd_density_sits_above_the_model() {
    let ts: Vec<f64> = (0..=400).map(|i| 0.2 + 2.4 * i as f64 / 400.0).collect();
    let d = Density1D::from_samples(0.2, 2.6, ts.iter().map(|t| t.sin()).collect()).unwrap();
    assert!(check_cd(&d, 1.0, 2.0, 1e-6).unwrap().passed());
    for i in 1..10 {
        let v = i as f64 / 10.0;
        let iso = profile_structured(&d, v).unwrap().value;
        let model = model_profile(1.0, 2.0, 2.4, v).unwrap().value;
        assert!(iso >= model - 1e-3, "v={v}: {iso} < {model}");
    }
}

#[test]
fn positive_curvature_bounds_the_support() {
    let stretched = Density1D::closed_form(Shape::SinPow { rate: 0.9, power: 1.0 }, 0.0, PI / 0.9).unwrap();
    assert!(!check_cd(&stretched, 1.0, 2.0, 1e-6).unwrap().passed());
    assert!(check_cd(&stretched, 0.81, 2.0, 1e-6).unwrap().passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_curves_are_symmetric(k in -1.0f64..1.0, n in 1.5f64..4.0, d in 0.5f64..3.0, v in 0.0f64..=1.0) {
        let a = model_profile(k, n, d, v).unwrap().value;
        let b = model_profile(k, n, d, 1.0 - v).unwrap().value;
        prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn cd_verdict_survives_translation(shift in -5.0f64..5.0, lo in 0.0f64..1.0, len in 0.5f64..2.0) {
        let d = Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 1.0 }, lo, lo + len).unwrap();
        let moved = d.translated(shift).unwrap();
        for &(k, n) in &[(1.0, 2.0), (2.0, 2.0), (0.0, 3.0)] {
            prop_assert_eq!(
                check_cd(&d, k, n, 1e-6).unwrap().passed(),
                check_cd(&moved, k, n, 1e-6).unwrap().passed()
            );
        }
    }

    #[test]
    fn quantile_inverts_cdf(p in 0.0f64..=1.0) {
        for name in ["sin", "exp", "cosh"] {
            let d = named_density(name).unwrap();
            prop_assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-9);
        }
    }
}
