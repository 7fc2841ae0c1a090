//! First- and second-moment estimates for the number of rays of a
//! branching random walk that stay in a moving window.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimate::{MeanAccumulator, RateEstimate};
use crate::replicas::map_replicas;
use crate::rng::{replica_seed, rng_from_key};
use crate::rw1d::{event, survival, Estimator, FnEvent, PathConfig, PathState, StepLaw, MIN_HITS};

/// Upper bound `sum_{j=1}^n e^{a n^{1/3} - b (n-j)^{1/3}} P(a n^{1/3} >= S_i >
/// a n^{1/3} - b (n-i)^{1/3}, 1 <= i < j)` on the probability that some
/// ray's running maximum stays below `a n^{1/3}`. The returned `rate` is
/// `log(sum) / n^{1/3}` with prediction `a - (3 pi^2 sigma^2 / 2)^{1/3}`.
pub fn first_moment_rate(
    step: &StepLaw,
    a: f64,
    b: f64,
    n: usize,
    estimator: Estimator,
    seed: u64,
) -> Result<RateEstimate> {
    if n == 0 || !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument("need n >= 1 and a, b > 0".into()));
    }
    let cube = (n as f64).cbrt();
    let top = a * cube;
    let lower: Vec<f64> = (0..=n).map(|i| top - b * ((n - i) as f64).cbrt()).collect();
    let ev = event(|st: &PathState| st.s <= top && st.s > lower[st.i]);
    let curve = survival(&PathConfig::new(step, n - 1), &ev, estimator, seed)?;
    if curve.survival[n - 1] <= 0.0 {
        return Err(Error::InsufficientHits { hits: 0, required: MIN_HITS });
    }
    let log_terms: Vec<f64> = (1..=n).map(|j| top - b * ((n - j) as f64).cbrt() + curve.survival[j - 1].ln()).collect();
    let shift = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = log_terms.iter().map(|t| (t - shift).exp()).sum();
    let var: f64 =
        (1..=n).map(|j| ((top - b * ((n - j) as f64).cbrt() - shift).exp() * curve.survival_se[j - 1]).powi(2)).sum();
    let value = shift.exp() * scaled;
    let predicted = a - (1.5 * PI * PI * step.variance()).cbrt();
    Ok(RateEstimate {
        value,
        se: shift.exp() * var.sqrt(),
        reps: curve.terminal.reps,
        hits: curve.terminal.hits,
        rate: Some((shift + scaled.ln()) / cube),
        predicted_rate: Some(predicted),
    })
}

/// `I_i = [(a - eps) n^{1/3} - b (n - i)^{1/3}, a n^{1/3}]` for `i = 1..=n`.
pub fn paley_zygmund_intervals(a: f64, b: f64, eps: f64, n: usize) -> Vec<(f64, f64)> {
    let cube = (n as f64).cbrt();
    (1..=n).map(|i| ((a - eps) * cube - b * ((n - i) as f64).cbrt(), a * cube)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentConfig {
    /// `I_1, ..., I_n` as closed intervals.
    pub intervals: Vec<(f64, f64)>,
    /// Cap on the offspring count along the path; `None` drops the constraint.
    pub r_n: Option<u64>,
    /// Estimator for the numerator.
    pub numerator: Estimator,
    /// Naive paths per `j` for the `h_{j,n}` terms.
    pub h_paths: u64,
    /// Points of the `u`-grid over each `I_j`.
    pub grid_points: usize,
}

impl SecondMomentConfig {
    pub fn standard(a: f64, b: f64, eps: f64, n: usize) -> Self {
        Self {
            intervals: paley_zygmund_intervals(a, b, eps, n),
            r_n: Some((n as f64).powf(0.25).exp().floor() as u64),
            numerator: Estimator::Splitting { population: 4000, batches: 10 },
            h_paths: 2000,
            grid_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentBound {
    /// `E[e^{S_n}; S_i in I_i, nu_{i-1} <= r_n]`.
    pub numerator: RateEstimate,
    /// `sum_j h_{j,n}`.
    pub h_sum: RateEstimate,
    pub h_terms: Vec<f64>,
    /// `numerator / (1 + (r_n - 1) h_sum)` when `r_n` is finite.
    pub bound: Option<f64>,
    /// `log(bound) / n^{1/3}`.
    pub rate: Option<f64>,
    /// Some `h_j` varies by more than a factor 2 between adjacent grid points.
    pub grid_too_coarse: bool,
}

/// Ingredients of the Paley-Zygmund lower bound
/// `P(exists |x| = n: V(x_i) in I_i) >= numerator / (1 + (r_n - 1) sum_j h_{j,n})`
/// where `h_{j,n} = sup_{u in I_j} E[e^{S_{n-j}}; S_i in I_{i+j} - u, 0 <= i <= n - j]`.
/// `step` is the many-to-one step law carrying offspring counts.
pub fn second_moment_bound(step: &StepLaw, cfg: &SecondMomentConfig, seed: u64) -> Result<SecondMomentBound> {
    let n = cfg.intervals.len();
    if n == 0 || cfg.grid_points < 2 || cfg.h_paths == 0 {
        return Err(Error::InvalidArgument("need intervals, at least 2 grid points and some h paths".into()));
    }
    if cfg.intervals.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(Error::InvalidArgument("intervals must satisfy lo <= hi".into()));
    }
    let iv = &cfg.intervals;
    let cap = cfg.r_n;
    let ev = FnEvent {
        admissible: |st: &PathState| {
            let (lo, hi) = iv[st.i - 1];
            lo <= st.s && st.s <= hi && cap.is_none_or(|r| st.nu.is_none_or(|nu| nu as u64 <= r))
        },
        final_weight: |st: &PathState| st.s.exp(),
    };
    let numerator = survival(&PathConfig::new(step, n), &ev, cfg.numerator, seed)?.terminal;

    let terms = map_replicas(n as u64, |jm1| h_term(step, iv, jm1 as usize + 1, cfg, replica_seed(seed ^ 0x4A11, jm1)));
    let h_terms: Vec<f64> = terms.iter().map(|t| t.0.value).collect();
    let h_sum = RateEstimate {
        value: h_terms.iter().sum(),
        se: terms.iter().map(|t| t.0.se * t.0.se).sum::<f64>().sqrt(),
        reps: cfg.h_paths * n as u64,
        hits: terms.iter().map(|t| t.0.hits).sum(),
        rate: None,
        predicted_rate: None,
    };
    let grid_too_coarse = terms.iter().any(|t| t.1);
    let bound = cap.map(|r| numerator.value / (1.0 + (r as f64 - 1.0) * h_sum.value));
    let rate = bound.map(|b| b.ln() / (n as f64).cbrt());
    Ok(SecondMomentBound { numerator, h_sum, h_terms, bound, rate, grid_too_coarse })
}

/// `(estimate of h_j, grid too coarse)`.
fn h_term(step: &StepLaw, iv: &[(f64, f64)], j: usize, cfg: &SecondMomentConfig, seed: u64) -> (RateEstimate, bool) {
    let n = iv.len();
    let len = n - j;
    let (glo, ghi) = iv[j - 1];
    let g = cfg.grid_points;
    let grid: Vec<f64> = (0..g).map(|k| glo + (ghi - glo) * k as f64 / (g - 1) as f64).collect();
    let mut acc = vec![MeanAccumulator::default(); g];
    let mut rng = rng_from_key(seed);
    for _ in 0..cfg.h_paths {
        // Feasible shifts u: lo_{i+j} <= S_i + u <= hi_{i+j} for 0 <= i <= len.
        let (mut ulo, mut uhi) = (glo, ghi);
        let mut s = 0.0;
        for i in 1..=len {
            if ulo > uhi {
                break;
            }
            s += step.sample(&mut rng).x;
            let (lo, hi) = iv[i + j - 1];
            ulo = ulo.max(lo - s);
            uhi = uhi.min(hi - s);
        }
        let w = if ulo <= uhi { s.exp() } else { 0.0 };
        for (k, &u) in grid.iter().enumerate() {
            acc[k].push(if w > 0.0 && ulo <= u && u <= uhi { w } else { 0.0 });
        }
    }
    let means: Vec<f64> = acc.iter().map(|a| a.mean()).collect();
    let coarse = means.windows(2).any(|w| w[0] > 0.0 && w[1] > 0.0 && (w[0] / w[1]).max(w[1] / w[0]) > 2.0);
    let best = (0..g).max_by(|&x, &y| means[x].total_cmp(&means[y])).expect("nonempty grid");
    (acc[best].estimate(), coarse)
}
