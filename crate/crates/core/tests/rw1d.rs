mod common;

use common::rademacher_brute_force;
use proptest::prelude::*;
use rwre_core::rw1d::{
    band_probability, brownian_reference, chung_probability, corollary_sum, event, reflected_event_probability,
    reflected_sandwich_check, survival, BandSpec, BrownianVariant, CorollaryVariant, Estimator, PathConfig, PathState,
    Profile, SandwichParams, StepAtom,
};
use rwre_core::{Error, StepLaw};
use std::f64::consts::PI;

const SPLIT: Estimator = Estimator::Splitting { population: 4000, batches: 10 };

fn exact_curve(n: usize, ok: impl Fn(&PathState) -> bool + Sync) -> Vec<f64> {
    survival(&PathConfig::new(&StepLaw::Rademacher, n), &event(ok), Estimator::Exact, 0).unwrap().survival
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_band_matches_enumeration(
        n in 1usize..13,
        lo in prop::collection::vec(-6i64..1, 13),
        width in prop::collection::vec(0i64..6, 13),
    ) {
        let ok = |i: usize, s: i64| lo[i] <= s && s <= lo[i] + width[i];
        let curve = exact_curve(n, |st| ok(st.i, st.s as i64));
        for (j, &p) in curve.iter().enumerate().skip(1) {
            let brute = rademacher_brute_force(j, |i, s, _| ok(i, s));
            prop_assert!((p - brute).abs() < 1e-14, "j = {}: {} vs {}", j, p, brute);
        }
    }

    #[test]
    fn exact_reflected_matches_enumeration(n in 1usize..13, delta in 0.0f64..1.5, cap in prop::collection::vec(0.5f64..5.0, 13)) {
        let k = 1.0 + delta;
        let p = *exact_curve(n, |st| k * st.smax - st.s <= cap[st.i]).last().unwrap();
        let brute = rademacher_brute_force(n, |i, s, m| k * m as f64 - s as f64 <= cap[i]);
        prop_assert!((p - brute).abs() < 1e-14);
    }

    #[test]
    fn reflected_probability_decreases_in_delta_above_zero(n in 5usize..60, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0, f in 0.3f64..3.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let cap = f * (n as f64).cbrt();
        let p = |d: f64| *exact_curve(n, |st| st.smax >= 0.0 && (1.0 + d) * st.smax - st.s <= cap).last().unwrap();
        prop_assert!(p(hi) <= p(lo) + 1e-15);
    }

    #[test]
    fn reflected_probability_decreases_with_f(n in 5usize..60, delta in 0.0f64..2.0, f in prop::collection::vec(0.3f64..3.0, 4), cut in prop::collection::vec(0.0f64..1.0, 4)) {
        let big = Profile::from_values(f.clone()).unwrap();
        let small = Profile::from_values(f.iter().zip(&cut).map(|(v, c)| v * (1.0 - 0.9 * c)).collect()).unwrap();
        let p = |prof: Profile| reflected_event_probability(&StepLaw::Rademacher, &BandSpec::reflected(prof, delta), n, Estimator::Exact, 0, None)
            .unwrap()
            .value;
        prop_assert!(p(small) <= p(big) + 1e-15);
    }

    #[test]
    fn endpoint_constraint_only_shrinks(n in 5usize..60, delta in 0.0f64..1.0, f in 0.5f64..3.0, b in 0.0f64..1.0) {
        let band = BandSpec::reflected(Profile::constant(f), delta);
        let free = reflected_event_probability(&StepLaw::Rademacher, &band, n, Estimator::Exact, 0, None).unwrap().value;
        let pinned = reflected_event_probability(&StepLaw::Rademacher, &band, n, Estimator::Exact, 0, Some(b)).unwrap().value;
        prop_assert!(pinned <= free + 1e-15);
    }

    #[test]
    fn tilt_is_a_law_with_matching_log_mgf(points in prop::collection::vec((0.05f64..1.0, -3.0f64..3.0), 1..5), lambda in -2.0f64..2.0) {
        let total: f64 = points.iter().map(|p| p.0).sum();
        let atoms: Vec<StepAtom> = points.iter().map(|&(w, x)| StepAtom { weight: w / total, point: x, nu: None }).collect();
        let law = StepLaw::Mixture { atoms: atoms.clone() };
        let (tilted, log_m) = law.exp_tilt(lambda);
        let direct: f64 = atoms.iter().map(|a| a.weight * (lambda * a.point).exp()).sum();
        prop_assert!((log_m - direct.ln()).abs() < 1e-12);
        prop_assert!(tilted.validate().is_ok());
        let mean: f64 = atoms.iter().map(|a| a.weight * a.point * (lambda * a.point).exp()).sum::<f64>() / direct;
        prop_assert!((tilted.mean() - mean).abs() < 1e-12);
    }
}

#[test]
fn chung_probability_matches_enumeration() {
    let exact = chung_probability(&StepLaw::Rademacher, 2.5, 18, Estimator::Exact, 0).unwrap();
    let brute = rademacher_brute_force(18, |_, s, m| ((m - s) as f64) < 2.5);
    assert!((exact.value - brute).abs() < 1e-14);
    assert_eq!(exact.predicted_rate, Some(PI * PI * 18.0 / (8.0 * 6.25)));
}

#[test]
fn estimators_agree_with_exact() {
    let band = BandSpec::reflected(Profile::from_fn(|t| 1.0 + t), 0.3);
    let exact =
        reflected_event_probability(&StepLaw::Rademacher, &band, 64, Estimator::Exact, 0, Some(0.5)).unwrap().value;
    let naive =
        reflected_event_probability(&StepLaw::Rademacher, &band, 64, Estimator::Naive { reps: 400_000 }, 1, Some(0.5))
            .unwrap();
    let split = reflected_event_probability(&StepLaw::Rademacher, &band, 64, SPLIT, 2, Some(0.5)).unwrap();
    assert!(naive.within_se(exact, 4.0), "{naive:?} vs {exact}");
    assert!(split.within_se(exact, 4.0), "{split:?} vs {exact}");

    let band = BandSpec::constant(-1.0, 1.5);
    let exact = band_probability(&StepLaw::Rademacher, &band, 125, Estimator::Exact, 0, Some(1.0)).unwrap().value;
    let split = band_probability(&StepLaw::Rademacher, &band, 125, SPLIT, 3, Some(1.0)).unwrap();
    assert!(split.within_se(exact, 4.0), "{split:?} vs {exact}");
}

#[test]
fn band_rate_approaches_prediction() {
    let band = BandSpec::constant(-1.0, 1.0);
    let e = band_probability(&StepLaw::Rademacher, &band, 8000, Estimator::Exact, 0, None).unwrap();
    let (rate, pred) = (e.rate.unwrap(), e.predicted_rate.unwrap());
    assert!((pred - PI * PI / 8.0).abs() < 1e-12);
    assert!((rate / pred - 1.0).abs() < 0.15, "rate {rate} vs {pred}");
}

#[test]
fn sandwich_holds_for_lattice_and_gaussian_steps() {
    for (step, seed) in [(StepLaw::Rademacher, 1u64), (StepLaw::gaussian(0.0, 1.0), 2)] {
        let check = reflected_sandwich_check(&step, 6.0, 200, 0.99, SPLIT, seed, SandwichParams::default()).unwrap();
        assert!(check.holds, "{step:?}: {check:?}");
        assert!(check.lower < check.upper);
    }
    let exact =
        reflected_sandwich_check(&StepLaw::Rademacher, 6.0, 200, 0.99, Estimator::Exact, 0, SandwichParams::default())
            .unwrap();
    assert!(exact.holds);
    assert!(reflected_sandwich_check(
        &StepLaw::Rademacher,
        1.0,
        10,
        1.5,
        Estimator::Exact,
        0,
        SandwichParams::default()
    )
    .is_err());
}

#[test]
fn chung_brownian_reference() {
    let e = brownian_reference(0.35, 4000, SPLIT, 5, BrownianVariant::ChungReflected).unwrap();
    let r = e.rate.unwrap() / (PI * PI / 8.0);
    assert!((r - 1.0).abs() < 0.3, "ratio {r}");
    let wide =
        brownian_reference(5.0, 1000, Estimator::Naive { reps: 10_000 }, 5, BrownianVariant::ChungReflected).unwrap();
    assert_eq!(wide.value, 1.0);
}

fn capped_ratio(u: f64, n: usize) -> f64 {
    let est = Estimator::Splitting { population: 2000, batches: 4 };
    let e = brownian_reference(u, n, est, 6, BrownianVariant::ReflectedWithMaxCap(1.0)).unwrap();
    e.rate.unwrap() / (PI * PI / 2.0)
}

#[test]
fn capped_brownian_reference_approaches_limit() {
    let ratios = [capped_ratio(0.45, 8000), capped_ratio(0.3, 8000), capped_ratio(0.15, 20000)];
    assert!(ratios.windows(2).all(|w| w[0] < w[1]), "{ratios:?}");
    assert!((ratios[2] - 1.0).abs() < 0.3, "{ratios:?}");
}

#[test]
#[ignore = "the finite-u correction at u = 0.45 exceeds 30%; the ratio is about 0.59"]
fn capped_brownian_reference_at_moderate_u() {
    let r = capped_ratio(0.45, 8000);
    assert!((r - 1.0).abs() < 0.3, "ratio {r}");
}

#[test]
fn corollary_sums_match_direct_evaluation() {
    let n = 16;
    let tail = |i: usize| ((n - i) as f64).cbrt();
    let a = 1.2;
    let out = corollary_sum(&StepLaw::Rademacher, &CorollaryVariant::C32i { a }, n, Estimator::Exact, 0).unwrap();
    let direct: f64 = (1..=n)
        .map(|j| (-a * tail(j)).exp() * rademacher_brute_force(j, |i, s, m| ((m - s) as f64) <= a * tail(i)))
        .sum();
    assert!((out.estimate.value - direct).abs() < 1e-13);
    assert_eq!(out.zero_terms, 0);

    let (a, b) = (1.0, 1.5);
    let top = a * (n as f64).cbrt();
    let out = corollary_sum(&StepLaw::Rademacher, &CorollaryVariant::C23ii { a, b }, n, Estimator::Exact, 0).unwrap();
    let direct: f64 = (1..=n)
        .map(|j| {
            (-b * tail(j)).exp()
                * rademacher_brute_force(j, |i, s, _| (s as f64) <= top && (s as f64) > top - b * tail(i))
        })
        .sum();
    assert!((out.estimate.value - direct).abs() < 1e-13);

    let one = corollary_sum(&StepLaw::Rademacher, &CorollaryVariant::C23ii { a: 1.0, b: 1.0 }, 1, Estimator::Exact, 0)
        .unwrap();
    assert_eq!(one.estimate.value, 0.0);
    assert_eq!(one.zero_terms, 1);

    let f = Profile::constant(2.0);
    let single = CorollaryVariant::C23i { f: f.clone(), b: 1.0, u_points: 1 };
    let sup = corollary_sum(&StepLaw::Rademacher, &single, n, Estimator::Exact, 0).unwrap();
    let band = band_probability(
        &StepLaw::Rademacher,
        &BandSpec { g1: Profile::constant(-2.0), g2: Profile::constant(0.0), ..BandSpec::constant(-2.0, 0.0) },
        n,
        Estimator::Exact,
        0,
        None,
    )
    .unwrap();
    assert!((sup.estimate.value - band.value).abs() < 1e-14);
    let wider = CorollaryVariant::C23i { f, b: 1.0, u_points: 5 };
    assert!(
        corollary_sum(&StepLaw::Rademacher, &wider, n, Estimator::Exact, 0).unwrap().estimate.value
            >= sup.estimate.value
    );
}

#[test]
fn delta_monotonicity_fails_below_zero() {
    // With the running max over steps 1..=i, a path whose max is negative
    // gains room as delta grows.
    let p = |d: f64| {
        reflected_event_probability(
            &StepLaw::Rademacher,
            &BandSpec::reflected(Profile::constant(0.3), d),
            13,
            Estimator::Exact,
            0,
            None,
        )
        .unwrap()
        .value
    };
    assert!(p(1.9) > p(0.9));
}

#[test]
fn delta_rates_separate() {
    let n = 1728;
    let g = |d: f64| {
        reflected_event_probability(
            &StepLaw::Rademacher,
            &BandSpec::reflected(Profile::constant(1.0), d),
            n,
            Estimator::Exact,
            0,
            None,
        )
        .unwrap()
    };
    let (g0, g1) = (g(0.0), g(1.0));
    assert!(g1.rate.unwrap() > 2.0 * g0.rate.unwrap(), "{g0:?} {g1:?}");
}

#[test]
fn sandwich_large_n_and_trivial_cases() {
    let n = 10_000;
    let r = (n as f64 / 6.0).sqrt().floor();
    let check = reflected_sandwich_check(&StepLaw::Rademacher, r, n, 1.0, SPLIT, 9, SandwichParams::default()).unwrap();
    let ratio = -check.p_hat.value.ln() / (PI * PI / 8.0 * n as f64 / (r * r));
    assert!((0.5..=1.5).contains(&ratio), "ratio {ratio}");

    let sure =
        reflected_sandwich_check(&StepLaw::Rademacher, 4.0, 40, 1.0, Estimator::Exact, 0, SandwichParams::default())
            .unwrap();
    let plain = survival(
        &PathConfig::new(&StepLaw::Rademacher, 40),
        &rwre_core::rw1d::FnEvent {
            admissible: |st: &PathState| st.smax - st.s < 4.0,
            final_weight: |st: &PathState| if st.s >= st.smax { 1.0 } else { 0.0 },
        },
        Estimator::Exact,
        0,
    )
    .unwrap();
    assert_eq!(sure.p_hat.value, plain.terminal.value);

    let loose =
        reflected_sandwich_check(&StepLaw::Rademacher, 41.0, 20, 1.0, Estimator::Exact, 0, SandwichParams::default())
            .unwrap();
    let at_max = (0u32..1 << 20)
        .filter(|bits| {
            let (mut x, mut m) = (0i32, i32::MIN);
            for i in 0..20 {
                x += if bits >> i & 1 == 1 { 1 } else { -1 };
                m = m.max(x);
            }
            x == m
        })
        .count() as f64
        / (1u64 << 20) as f64;
    assert!((loose.p_hat.value - at_max).abs() < 1e-14);
}

#[test]
fn rademacher_tilt() {
    let (t, log_m) = StepLaw::Rademacher.exp_tilt(0.7);
    assert!((t.mean() - 0.7f64.tanh()).abs() < 1e-15);
    assert!((log_m - 0.7f64.cosh().ln()).abs() < 1e-15);
    assert_eq!(StepLaw::gaussian(0.0, 1.0).exp_tilt(0.0).1, 0.0);
}

#[test]
fn exact_requires_lattice_steps() {
    let r = chung_probability(&StepLaw::gaussian(0.0, 1.0), 1.0, 5, Estimator::Exact, 0);
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
    let bad = BandSpec::constant(1.0, 0.0);
    assert!(band_probability(&StepLaw::Rademacher, &bad, 5, Estimator::Exact, 0, None).is_err());
}
