//! One-dimensional random walks: confinement in a band, confinement of the
//! walk reflected at its running maximum, sums over such events and
//! Brownian reference constants.

pub mod engine;
mod step;

pub use engine::{event, survival, Estimator, FnEvent, PathConfig, PathEvent, PathState, SurvivalCurve};
pub use step::{Step, StepAtom, StepLaw};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimate::RateEstimate;

/// Fewest hits accepted for a Monte Carlo event estimate.
pub const MIN_HITS: u64 = 30;

/// A function on `[0, 1]` sampled on a uniform grid and linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    values: Vec<f64>,
}

impl Profile {
    pub const GRID: usize = 256;

    pub fn constant(c: f64) -> Self {
        Self { values: vec![c; Self::GRID] }
    }

    pub fn from_fn(f: impl Fn(f64) -> f64) -> Self {
        let m = Self::GRID - 1;
        Self { values: (0..=m).map(|k| f(k as f64 / m as f64)).collect() }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("profile needs at least 2 finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.values.len() - 1;
        let x = t.clamp(0.0, 1.0) * m as f64;
        let k = (x.floor() as usize).min(m - 1);
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Trapezoid rule for `int_0^1 phi(profile(t)) dt` on the grid.
    fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let m = self.values.len() - 1;
        let inner: f64 = self.values[1..m].iter().map(|&v| phi(v)).sum();
        (inner + 0.5 * (phi(self.values[0]) + phi(self.values[m]))) / m as f64
    }

    fn pointwise(&self, other: &Profile, op: impl Fn(f64, f64) -> f64) -> Profile {
        let m = self.values.len().max(other.values.len()) - 1;
        Profile::from_fn_grid(m, |t| op(self.eval(t), other.eval(t)))
    }

    fn from_fn_grid(m: usize, f: impl Fn(f64) -> f64) -> Self {
        Self { values: (0..=m).map(|k| f(k as f64 / m as f64)).collect() }
    }
}

/// Scale `a_n` of the confinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Scaling {
    CubeRoot,
    Fixed(f64),
}

impl Scaling {
    pub fn a_n(self, n: usize) -> f64 {
        match self {
            Scaling::CubeRoot => (n as f64).cbrt(),
            Scaling::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub g1: Profile,
    pub g2: Profile,
    pub scaling: Scaling,
    /// Allowed distance below the running maximum, for reflected events.
    pub f: Option<Profile>,
    pub delta: f64,
}

impl BandSpec {
    /// Constant band `[lo, hi]` at scale `n^(1/3)`.
    pub fn constant(lo: f64, hi: f64) -> Self {
        Self { g1: Profile::constant(lo), g2: Profile::constant(hi), scaling: Scaling::CubeRoot, f: None, delta: 0.0 }
    }

    /// Reflected event with allowance `f` and parameter `delta`.
    pub fn reflected(f: Profile, delta: f64) -> Self {
        Self { g1: Profile::constant(-1.0), g2: Profile::constant(1.0), scaling: Scaling::CubeRoot, f: Some(f), delta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g1.values.iter().zip(&self.g2.values).any(|(a, b)| a >= b) && self.f.is_none() {
            return Err(Error::InvalidArgument("band needs g1 < g2".into()));
        }
        if let Some(f) = &self.f {
            if f.values.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidArgument("f must be positive".into()));
            }
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument("delta must be nonnegative".into()));
        }
        Ok(())
    }
}

fn require_hits(est: &RateEstimate, estimator: Estimator) -> Result<()> {
    if !matches!(estimator, Estimator::Exact) && est.hits < MIN_HITS {
        return Err(Error::InsufficientHits { hits: est.hits, required: MIN_HITS });
    }
    Ok(())
}

fn grid(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..=n).map(|i| f(i as f64 / n as f64)).collect()
}

/// `P(a_n g1(i/n) <= S_i <= a_n g2(i/n), 1 <= i <= n)`, optionally with the
/// endpoint condition `S_n >= a_n (g2(1) - b)`. The rate is
/// `-(a_n^2 / n) log P` and the prediction `(pi^2 sigma^2 / 2) int dt / (g2 - g1)^2`.
pub fn band_probability(
    step: &StepLaw,
    band: &BandSpec,
    n: usize,
    estimator: Estimator,
    seed: u64,
    endpoint_b: Option<f64>,
) -> Result<RateEstimate> {
    band.validate()?;
    let a = band.scaling.a_n(n);
    let lo = grid(n, |t| a * band.g1.eval(t));
    let hi = grid(n, |t| a * band.g2.eval(t));
    let end = endpoint_b.map(|b| a * (band.g2.eval(1.0) - b));
    let ev = engine::FnEvent {
        admissible: |st: &PathState| lo[st.i] <= st.s && st.s <= hi[st.i],
        final_weight: |st: &PathState| if end.is_none_or(|e| st.s >= e) { 1.0 } else { 0.0 },
    };
    let curve = survival(&PathConfig::new(step, n), &ev, estimator, seed)?;
    let width = band.g2.pointwise(&band.g1, |b, a| b - a);
    let predicted = PI * PI * step.variance() / 2.0 * width.integrate(|w| 1.0 / (w * w));
    let est = curve.terminal.with_rate(a * a / n as f64).with_predicted(predicted);
    require_hits(&est, estimator)?;
    Ok(est)
}

/// `P((1 + delta) Sbar_i - S_i <= a_n f(i/n), 1 <= i <= n)` with
/// `Sbar_i = max_{1<=j<=i} S_j`, optionally with `Sbar_n - S_n <= b a_n f(1)`.
/// The prediction is `(pi^2 sigma^2 / 8) int f^-2` for `delta = 0` and
/// `(pi^2 sigma^2 / 2) int f^-2` for `delta > 0`.
pub fn reflected_event_probability(
    step: &StepLaw,
    band: &BandSpec,
    n: usize,
    estimator: Estimator,
    seed: u64,
    endpoint_b: Option<f64>,
) -> Result<RateEstimate> {
    band.validate()?;
    let f = band.f.as_ref().ok_or_else(|| Error::InvalidArgument("reflected event needs f".into()))?;
    let a = band.scaling.a_n(n);
    let cap = grid(n, |t| a * f.eval(t));
    let k = 1.0 + band.delta;
    let end = endpoint_b.map(|b| b * a * f.eval(1.0));
    let ev = engine::FnEvent {
        admissible: |st: &PathState| k * st.smax - st.s <= cap[st.i],
        final_weight: |st: &PathState| if end.is_none_or(|e| st.smax - st.s <= e) { 1.0 } else { 0.0 },
    };
    let curve = survival(&PathConfig::new(step, n), &ev, estimator, seed)?;
    let c = if band.delta == 0.0 { 8.0 } else { 2.0 };
    let predicted = PI * PI * step.variance() / c * f.integrate(|v| 1.0 / (v * v));
    let est = curve.terminal.with_rate(a * a / n as f64).with_predicted(predicted);
    require_hits(&est, estimator)?;
    Ok(est)
}

/// `P(max_{1<=i<=n} (Sbar_i - S_i) < r)`. The rate is `-log P` and the
/// prediction `pi^2 sigma^2 n / (8 r^2)`.
pub fn chung_probability(step: &StepLaw, r: f64, n: usize, estimator: Estimator, seed: u64) -> Result<RateEstimate> {
    let ev = event(|st: &PathState| st.smax - st.s < r);
    let curve = survival(&PathConfig::new(step, n), &ev, estimator, seed)?;
    let predicted = PI * PI * step.variance() * n as f64 / (8.0 * r * r);
    let est = curve.terminal.with_rate(1.0).with_predicted(predicted);
    require_hits(&est, estimator)?;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum CorollaryVariant {
    /// `sup_{0 <= u <= b n^(1/3)} P(u >= S_i >= u - n^(1/3) f(i/n), i <= n)`,
    /// the supremum taken over `u_points` grid values.
    C23i { f: Profile, b: f64, u_points: usize },
    /// `sum_j e^{-b (n-j)^(1/3)} P(a n^(1/3) >= S_i > a n^(1/3) - b (n-i)^(1/3), i <= j)`.
    C23ii { a: f64, b: f64 },
    /// `sum_j e^{-a (n-j)^(1/3)} P(Sbar_i - S_i <= a (n-i)^(1/3), i <= j)`.
    C32i { a: f64 },
    /// `sum_j e^{-a (n-j)^(1/3)} P((1 + delta) Sbar_i - S_i <= a (n-i)^(1/3), i <= j)`.
    C32ii { a: f64, delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryOutcome {
    /// Value of the sum (or supremum); `rate = -log(value) / n^(1/3)`.
    pub estimate: RateEstimate,
    /// Terms estimated as zero; when positive the sum is only a lower
    /// estimate and the rate an upper one.
    pub zero_terms: usize,
}

fn weighted_sum(curve: &SurvivalCurve, n: usize, w: impl Fn(usize) -> f64) -> (f64, f64, usize) {
    let mut sum = 0.0;
    let mut se = 0.0;
    let mut zeros = 0;
    for j in 1..=n {
        let wj = w(j);
        sum += wj * curve.survival[j];
        se += wj * curve.survival_se[j];
        zeros += usize::from(curve.survival[j] == 0.0);
    }
    (sum, se, zeros)
}

/// Evaluates the sums controlling the first moment of the number of
/// confined rays.
pub fn corollary_sum(
    step: &StepLaw,
    variant: &CorollaryVariant,
    n: usize,
    estimator: Estimator,
    seed: u64,
) -> Result<CorollaryOutcome> {
    let nf = n as f64;
    let c3 = nf.cbrt();
    let s2 = step.variance();
    let cfg = PathConfig::new(step, n);
    let tail = |j: usize| (nf - j as f64).cbrt();
    let (value, se, zero_terms, predicted, hits, reps) = match variant {
        CorollaryVariant::C23i { f, b, u_points } => {
            let mut best: Option<RateEstimate> = None;
            let mut zeros = 0;
            let m = (*u_points).max(1);
            for k in 0..m {
                let u = if m == 1 { 0.0 } else { b * c3 * k as f64 / (m - 1) as f64 };
                let lo = grid(n, |t| u - c3 * f.eval(t));
                let ev = event(|st: &PathState| st.s <= u && st.s >= lo[st.i]);
                let t = survival(&cfg, &ev, estimator, crate::rng::mix(seed, k as u64))?.terminal;
                zeros += usize::from(t.value == 0.0);
                if best.is_none_or(|b| t.value > b.value) {
                    best = Some(t);
                }
            }
            let best = best.expect("at least one grid point");
            let pred = PI * PI * s2 / 2.0 * f.integrate(|v| 1.0 / (v * v));
            (best.value, best.se, zeros, pred, best.hits, best.reps)
        }
        CorollaryVariant::C23ii { a, b } => {
            let top = a * c3;
            let lo: Vec<f64> = (0..=n).map(|i| top - b * tail(i)).collect();
            let ev = event(|st: &PathState| st.s <= top && st.s > lo[st.i]);
            let curve = survival(&cfg, &ev, estimator, seed)?;
            let (v, e, z) = weighted_sum(&curve, n, |j| (-b * tail(j)).exp());
            let pred = b.min(3.0 * PI * PI * s2 / (2.0 * b * b));
            (v, e, z, pred, curve.terminal.hits, curve.terminal.reps)
        }
        CorollaryVariant::C32i { a } | CorollaryVariant::C32ii { a, .. } => {
            let delta = match variant {
                CorollaryVariant::C32ii { delta, .. } => *delta,
                _ => 0.0,
            };
            let cap: Vec<f64> = (0..=n).map(|i| a * tail(i)).collect();
            let k = 1.0 + delta;
            let ev = event(|st: &PathState| k * st.smax - st.s <= cap[st.i]);
            let curve = survival(&cfg, &ev, estimator, seed)?;
            let (v, e, z) = weighted_sum(&curve, n, |j| (-a * tail(j)).exp());
            let c = if delta == 0.0 { 8.0 } else { 2.0 };
            let pred = a.min(3.0 * PI * PI * s2 / (c * a * a));
            (v, e, z, pred, curve.terminal.hits, curve.terminal.reps)
        }
    };
    let estimate = RateEstimate { value, se, reps, hits, rate: None, predicted_rate: None }
        .with_rate(1.0 / c3)
        .with_predicted(predicted);
    Ok(CorollaryOutcome { estimate, zero_terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichParams {
    pub delta: f64,
    pub eta: f64,
}

impl Default for SandwichParams {
    fn default() -> Self {
        Self { delta: 0.5, eta: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub lower: f64,
    pub p_hat: RateEstimate,
    pub upper: f64,
    /// Both bounds hold within three standard errors.
    pub holds: bool,
}

/// Estimates `P(max_i (Sbar_i - S_i) < r, Sbar_n = S_n, all coins succeed)`
/// with independent per-step coins of success probability `aux_prob`, and
/// compares it with `(eta / r) e^{-(1+delta) c}` and `e^{-(1-delta) c}`,
/// `c = pi^2 sigma^2 n / (8 r^2)`.
pub fn reflected_sandwich_check(
    step: &StepLaw,
    r: f64,
    n: usize,
    aux_prob: f64,
    estimator: Estimator,
    seed: u64,
    params: SandwichParams,
) -> Result<SandwichCheck> {
    if !(0.0..=1.0).contains(&aux_prob) {
        return Err(Error::InvalidArgument("coin probability must lie in [0, 1]".into()));
    }
    let cfg = PathConfig { aux_prob: (aux_prob < 1.0).then_some(aux_prob), ..PathConfig::new(step, n) };
    let ev = engine::FnEvent {
        admissible: |st: &PathState| st.aux && st.smax - st.s < r,
        final_weight: |st: &PathState| if st.s >= st.smax { 1.0 } else { 0.0 },
    };
    let p_hat = survival(&cfg, &ev, estimator, seed)?.terminal.with_rate(1.0);
    require_hits(&p_hat, estimator)?;
    let c = PI * PI * step.variance() * n as f64 / (8.0 * r * r);
    let lower = params.eta / r * (-(1.0 + params.delta) * c).exp();
    let upper = (-(1.0 - params.delta) * c).exp();
    let holds = lower <= p_hat.value + 3.0 * p_hat.se && p_hat.value - 3.0 * p_hat.se <= upper;
    Ok(SandwichCheck { lower, p_hat: p_hat.with_predicted(c), upper, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "c")]
pub enum BrownianVariant {
    /// `P(sup (Wbar - W) <= u)` on `[0, 1]`; `-u^2 log P -> pi^2 / 8`.
    ChungReflected,
    /// Adds `Wbar(1) <= c u`; `-u^2 log P -> pi^2 / 2`.
    ReflectedWithMaxCap(f64),
}

/// Brownian reference probabilities from an `n`-step Gaussian walk with
/// variance `1/n` per step. The running maximum includes `W(0) = 0`.
/// The rate is `-u^2 log P`.
pub fn brownian_reference(
    u: f64,
    n: usize,
    estimator: Estimator,
    seed: u64,
    variant: BrownianVariant,
) -> Result<RateEstimate> {
    let step = StepLaw::gaussian(0.0, 1.0 / n as f64);
    let cap = match variant {
        BrownianVariant::ChungReflected => f64::INFINITY,
        BrownianVariant::ReflectedWithMaxCap(c) => c * u,
    };
    let ev = event(|st: &PathState| {
        let m = st.smax.max(0.0);
        m - st.s <= u && m <= cap
    });
    let est = survival(&PathConfig::new(&step, n), &ev, estimator, seed)?.terminal;
    let predicted = match variant {
        BrownianVariant::ChungReflected => PI * PI / 8.0,
        BrownianVariant::ReflectedWithMaxCap(_) => PI * PI / 2.0,
    };
    let est = est.with_rate(u * u).with_predicted(predicted);
    require_hits(&est, estimator)?;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_interpolation_and_integral() {
        let p = Profile::from_fn(|t| 1.0 + t);
        assert!((p.eval(0.5) - 1.5).abs() < 1e-12);
        assert!((p.integrate(|v| v) - 1.5).abs() < 1e-12);
        assert_eq!(Profile::constant(2.0).eval(0.3), 2.0);
    }

    #[test]
    fn very_wide_band_is_certain() {
        let band = BandSpec::constant(-1000.0, 1000.0);
        let e = band_probability(&StepLaw::Rademacher, &band, 50, Estimator::Naive { reps: 1000 }, 0, None).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.rate, Some(-0.0));
    }

    #[test]
    fn too_few_hits_is_an_error() {
        let band = BandSpec::constant(-0.1, 0.1);
        let r = band_probability(&StepLaw::gaussian(0.0, 1.0), &band, 200, Estimator::Naive { reps: 100 }, 0, None);
        assert!(matches!(r, Err(Error::InsufficientHits { .. })));
    }

    #[test]
    fn one_step_reflected_sum_is_exact() {
        let out =
            corollary_sum(&StepLaw::Rademacher, &CorollaryVariant::C32i { a: 1.0 }, 1, Estimator::Exact, 0).unwrap();
        assert_eq!(out.estimate.value, 1.0);
    }
}
