//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use statrs::distribution::{ContinuousCDF, Normal};

use rwre_core::OffspringLaw;

/// Kolmogorov-Smirnov distance between a sample and `N(mean, var)`.
pub fn ks_distance_normal(samples: &[f64], mean: f64, var: f64) -> f64 {
    let normal = Normal::new(mean, var.sqrt()).expect("valid normal");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Sample mean and variance with the standard errors of both.
pub fn moments_with_se(xs: &[f64]) -> (f64, f64, f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let c2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    let c4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m;
    let var = c2 * m / (m - 1.0);
    (mean, (c2 / m).sqrt(), var, ((c4 - c2 * c2) / m).sqrt())
}

/// Probability that a Rademacher walk of `n` steps satisfies
/// `ok(i, S_i, max_{1<=j<=i} S_j)` for `1 <= i <= n`, by enumerating all `2^n`
/// sign sequences.
pub fn rademacher_brute_force(n: usize, ok: impl Fn(usize, i64, i64) -> bool) -> f64 {
    assert!(n <= 24);
    let mut count = 0u64;
    'paths: for bits in 0u64..(1u64 << n) {
        let mut s = 0i64;
        let mut smax = i64::MIN;
        for i in 1..=n {
            s += if bits >> (i - 1) & 1 == 1 { 1 } else { -1 };
            smax = smax.max(s);
            if !ok(i, s, smax) {
                continue 'paths;
            }
        }
        count += 1;
    }
    count as f64 / (1u64 << n) as f64
}

/// `P(exists |x| = n with V(x_i) in I_i for 1 <= i <= n)` for a table law in
/// which all children of a vertex share one mark, by summing over the
/// offspring configuration at every vertex. Potentials are tracked exactly as
/// counts of each atom along the path.
pub fn shared_mark_ray_probability(law: &OffspringLaw, intervals: &[(f64, f64)]) -> f64 {
    let OffspringLaw::DiscreteTable { atoms } = law else { panic!("table law expected") };
    let steps: Vec<(f64, f64, usize)> = atoms
        .iter()
        .map(|a| {
            assert!(a.a_values.windows(2).all(|w| w[0] == w[1]));
            (a.prob, -a.a_values[0].ln(), a.a_values.len())
        })
        .collect();
    fn go(steps: &[(f64, f64, usize)], iv: &[(f64, f64)], depth: usize, v: f64) -> f64 {
        if depth == iv.len() {
            return 1.0;
        }
        steps
            .iter()
            .map(|&(p, dv, k)| {
                let w = v + dv;
                let (lo, hi) = iv[depth];
                let q = if lo <= w && w <= hi { go(steps, iv, depth + 1, w) } else { 0.0 };
                p * (1.0 - (1.0 - q).powi(k as i32))
            })
            .sum()
    }
    go(&steps, intervals, 0, 0.0)
}
