use serde_json::Value;

use rwre_web::{analyze_law_json, parse_law, presets_json, rw1d_json, walk_curve_json};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

/// Probability by enumerating all `2^n` sign sequences.
fn brute_force(n: usize, ok: impl Fn(i64, i64) -> bool) -> f64 {
    let mut good = 0u64;
    for bits in 0u64..(1 << n) {
        let (mut s, mut smax) = (0i64, i64::MIN);
        let mut all = true;
        for i in 0..n {
            s += if bits >> i & 1 == 1 { 1 } else { -1 };
            smax = smax.max(s);
            if !ok(s, smax) {
                all = false;
                break;
            }
        }
        good += u64::from(all);
    }
    good as f64 / (1u64 << n) as f64
}

#[test]
fn presets_parse_by_name_and_quoted_name() {
    let names: Vec<String> = serde_json::from_str(&presets_json()).unwrap();
    assert!(names.contains(&"critical_lognormal".to_string()));
    for n in &names {
        assert_eq!(parse_law(n).unwrap(), parse_law(&format!("\"{n}\"")).unwrap());
    }
    assert!(parse_law("not a law").is_err());
}

#[test]
fn classification_of_the_critical_law() {
    let r = parse(&analyze_law_json("critical_lognormal").unwrap());
    assert_eq!(r["theta"].as_f64(), Some(1.0));
    assert!((r["constants"]["alpha"].as_f64().unwrap() - 20.524).abs() < 1e-3);
    assert!(analyze_law_json("unary").unwrap_err().contains("mean offspring"));
}

#[test]
fn walk_curve_is_reproducible_and_consistent() {
    let a = walk_curve_json("critical_lognormal", 20_000, 5).unwrap();
    assert_eq!(a, walk_curve_json("critical_lognormal", 20_000, 5).unwrap());
    let d = parse(&a);
    let k = d["k"].as_array().unwrap();
    let depth = d["max_depth"].as_array().unwrap();
    assert_eq!(k.len(), depth.len());
    assert_eq!(k.len(), d["prediction"].as_array().unwrap().len());
    assert_eq!(k.last().unwrap().as_u64(), Some(20_000));
    assert!(depth.windows(2).all(|w| w[0].as_u64() <= w[1].as_u64()));
    assert_eq!(d["depth_cap_hit"], false);
    assert!(walk_curve_json("critical_lognormal", 0, 1).is_err());
    assert!(walk_curve_json("critical_lognormal", rwre_web::MAX_WALK_STEPS + 1, 1).is_err());
}

#[test]
fn band_probability_matches_enumeration() {
    let n = 14usize;
    let a = (n as f64).cbrt();
    let (lo, hi) = (-0.8, 1.1);
    let p = parse(&rw1d_json(lo, hi, -1.0, n).unwrap())["p"].as_f64().unwrap();
    let exact = brute_force(n, |s, _| lo * a <= s as f64 && s as f64 <= hi * a);
    assert!((p - exact).abs() < 1e-12, "{p} vs {exact}");
}

#[test]
fn reflected_probability_matches_enumeration() {
    let n = 13usize;
    let a = (n as f64).cbrt();
    let (f, delta) = (0.7, 0.5);
    let p = parse(&rw1d_json(0.0, f, delta, n).unwrap())["p"].as_f64().unwrap();
    let exact = brute_force(n, |s, smax| (1.0 + delta) * smax as f64 - s as f64 <= f * a);
    assert!((p - exact).abs() < 1e-12, "{p} vs {exact}");
}

#[test]
fn rw1d_rejects_bad_sizes() {
    assert!(rw1d_json(-1.0, 1.0, -1.0, 0).is_err());
    assert!(rw1d_json(-1.0, 1.0, -1.0, rwre_web::MAX_RW1D_N + 1).is_err());
    assert!(rw1d_json(1.0, -1.0, -1.0, 10).is_err());
}
