//! Deterministic bounds for the birth-and-death chain behind the spine
//! recursion, and a direct simulator of that chain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{MeanAccumulator, RateEstimate};
use crate::replicas::{chunk_ranges, map_replicas};
use crate::rng::{replica_seed, rng_from_key};

/// Inputs of the product bound: `b_1..b_n`, `r_0..r_{n-1}` and a partition
/// `0 = m_0 < m_1 < ... < m_k = n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathSpec {
    pub b: Vec<f64>,
    pub r: Vec<f64>,
    pub partition: Vec<usize>,
}

impl BirthDeathSpec {
    /// Number of sites above the origin.
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// `b_j`, 1-based.
    pub fn b_at(&self, j: usize) -> f64 {
        self.b[j - 1]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 || self.r.len() != n {
            return Err(Error::InvalidArgument(format!(
                "need n >= 2 and |r| = |b| = n, got |b| = {n}, |r| = {}",
                self.r.len()
            )));
        }
        if !self.b.iter().all(|&b| b.is_finite() && b > 0.0) {
            return Err(Error::InvalidArgument("b_j must be positive and finite".into()));
        }
        if !self.r.iter().all(|&r| r >= 0.0 && !r.is_nan()) {
            return Err(Error::InvalidArgument("r_j must be nonnegative".into()));
        }
        let p = &self.partition;
        if p.len() < 2 || p[0] != 0 || *p.last().expect("nonempty") != n - 1 || p.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!("partition {p:?} must increase strictly from 0 to {}", n - 1)));
        }
        Ok(())
    }

    /// Random instance with `3 <= n <= max_n`, `2 <= k <= max_k` blocks,
    /// `log b_j` uniform on `[-1, 1]` and `r_j` uniform on `[0, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_k: usize) -> Self {
        let n = rng.random_range(3..=max_n.max(3));
        let k = rng.random_range(2..=max_k.clamp(2, n - 1));
        let b = (0..n).map(|_| rng.random_range(-1.0..=1.0f64).exp()).collect();
        let r = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let mut cuts: Vec<usize> = (1..n - 1).collect();
        for i in 0..k - 1 {
            let j = rng.random_range(i..cuts.len());
            cuts.swap(i, j);
        }
        let mut partition = cuts[..k - 1].to_vec();
        partition.push(0);
        partition.push(n - 1);
        partition.sort_unstable();
        Self { b, r, partition }
    }

    /// `v(0) = 0`, `v(j) = -sum_{i<=j} log b_i`.
    pub fn potential(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n() + 1);
        v.push(0.0);
        for &b in &self.b {
            let last = *v.last().expect("nonempty");
            v.push(last - b.ln());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBound {
    /// `z_1, ..., z_{n-1}`.
    pub z: Vec<f64>,
    pub product: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Runs `z_n = 0`, `z_j = 1 / (1 + r_j + b_{j+1} (1 - z_{j+1}))` and compares
/// `prod z_j` with the block lower bound.
pub fn z_recursion_and_bound(spec: &BirthDeathSpec) -> Result<ProductBound> {
    spec.validate()?;
    let n = spec.n();
    let mut z = vec![0.0; n + 1];
    for j in (1..n).rev() {
        z[j] = 1.0 / (1.0 + spec.r[j] + spec.b_at(j + 1) * (1.0 - z[j + 1]));
    }
    let product: f64 = z[1..n].iter().product();

    let v = spec.potential();
    let k = spec.partition.len() - 1;
    let mut log_bound = -(k as f64) * std::f64::consts::LN_2;
    for w in spec.partition.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = (hi - lo) as f64;
        let lambda =
            (lo + 1..=hi).map(|j| v[j] - v[hi]).fold(f64::NEG_INFINITY, f64::max) + (v[hi] - v[hi + 1]).max(0.0);
        let r_max = (lo + 1..=hi).map(|j| spec.r[j]).fold(0.0, f64::max);
        let v_star = max_drop(&v[lo + 1..=hi]);
        log_bound -= len.ln() + lambda + len * len * r_max * v_star.exp();
    }
    let bound = log_bound.exp();
    Ok(ProductBound { z: z[1..n].to_vec(), product, bound, holds: product >= bound })
}

/// `max_{i <= j} (v_i - v_j)`, zero for monotone nondecreasing input.
fn max_drop(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut running_max = f64::NEG_INFINITY;
    for &x in v {
        running_max = running_max.max(x);
        best = best.max(running_max - x);
    }
    best
}

/// The chain on `{0, ..., n}` that steps from `j` to `j + 1` with
/// probability `b_{j+1} / (1 + b_{j+1})` and to `j - 1` otherwise.
/// Returns `P_m(tau(ell) < tau(m))` and the bound
/// `(m - ell)^2 exp(max_{ell < i <= j <= m} (v(i) - v(j)))` on the mean of
/// `tau(ell)` given that event.
pub fn birth_death_formulas(spec: &BirthDeathSpec, ell: usize, m: usize) -> Result<(f64, f64)> {
    check_levels(spec, ell, m)?;
    let v = spec.potential();
    let shift = v[ell + 1..=m].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = v[ell + 1..=m].iter().map(|x| (x - shift).exp()).sum();
    let hit = (v[m] - shift).exp() / denom / (1.0 + spec.b_at(m + 1));
    let len = (m - ell) as f64;
    let golosov = len * len * max_drop(&v[ell + 1..=m]).exp();
    Ok((hit, golosov))
}

fn check_levels(spec: &BirthDeathSpec, ell: usize, m: usize) -> Result<()> {
    spec.validate()?;
    if !(ell < m && m < spec.n()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= ell < m < n, got ell = {ell}, m = {m}, n = {}",
            spec.n()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathMc {
    pub hit: RateEstimate,
    /// Mean of `tau(ell)` over excursions reaching `ell` first.
    pub conditional_time: RateEstimate,
}

/// Simulates excursions of the chain from `m` until it reaches `ell` or
/// returns to `m`.
pub fn birth_death_mc(spec: &BirthDeathSpec, ell: usize, m: usize, excursions: u64, seed: u64) -> Result<BirthDeathMc> {
    check_levels(spec, ell, m)?;
    let up: Vec<f64> = (0..=spec.n())
        .map(|j| {
            if j < spec.n() {
                let b = spec.b_at(j + 1);
                b / (1.0 + b)
            } else {
                0.0
            }
        })
        .collect();
    const CHUNKS: u64 = 16;
    let parts = map_replicas(CHUNKS, |c| {
        let mut rng = rng_from_key(replica_seed(seed, c));
        let mut hits = 0u64;
        let mut time = MeanAccumulator::default();
        for _ in chunk_ranges(excursions, CHUNKS)[c as usize].clone() {
            if rng.random::<f64>() < up[m] {
                continue;
            }
            let mut pos = m - 1;
            let mut steps = 1u64;
            while pos != ell && pos != m {
                pos = if rng.random::<f64>() < up[pos] { pos + 1 } else { pos - 1 };
                steps += 1;
            }
            if pos == ell {
                hits += 1;
                time.push(steps as f64);
            }
        }
        (hits, time)
    });
    let hits: u64 = parts.iter().map(|p| p.0).sum();
    let mut time = MeanAccumulator::default();
    parts.iter().for_each(|p| time.merge(&p.1));
    Ok(BirthDeathMc { hit: RateEstimate::proportion(hits, excursions), conditional_time: time.estimate() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProbe {
    pub samples: u64,
    pub convexity_violations: u64,
    pub monotonicity_violations: u64,
    pub holds: bool,
}

const CONVEXITY_TOL: f64 = 1e-9;

/// `prod_{j=1}^{n-1} F_j(u_j, ..., u_{n-2})` with `F_{n-1} = c` and
/// `F_j = 1 / (1 + u_j + a_{j+1} (1 - F_{j+1}))`; `a = (a_1, ..., a_{n-1})`.
pub fn fj_product(c: f64, a: &[f64], u: &[f64]) -> f64 {
    let n = a.len() + 1;
    debug_assert_eq!(u.len(), n - 2);
    let mut f = c;
    let mut prod = c;
    for j in (1..n - 1).rev() {
        f = 1.0 / (1.0 + u[j - 1] + a[j] * (1.0 - f));
        prod *= f;
    }
    prod
}

/// Random second-difference and monotonicity tests of [`fj_product`] along
/// single coordinates. `a` has length `n - 1` with `n >= 3`.
pub fn fj_convexity_probe(c: f64, a: &[f64], samples: u64, seed: u64) -> Result<ConvexityProbe> {
    if !(0.0..=1.0).contains(&c) || a.len() < 2 || !a.iter().all(|&x| x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument("need c in [0, 1] and at least two positive a_j".into()));
    }
    let dim = a.len() - 1;
    let mut rng = rng_from_key(seed);
    let (mut conv, mut mono) = (0u64, 0u64);
    let mut u = vec![0.0; dim];
    for _ in 0..samples {
        u.iter_mut().for_each(|x| *x = -rng.random::<f64>().ln());
        let i = rng.random_range(0..dim);
        let h = 0.5 * rng.random::<f64>() * u[i] + 1e-3;
        let centre = fj_product(c, a, &u);
        let base = u[i];
        u[i] = base + h;
        let plus = fj_product(c, a, &u);
        u[i] = (base - h).max(0.0);
        let minus = fj_product(c, a, &u);
        let h_minus = base - u[i];
        u[i] = base;
        // Second divided difference on a possibly asymmetric stencil.
        let second = (plus - centre) / h - (centre - minus) / h_minus.max(f64::MIN_POSITIVE);
        if second < -CONVEXITY_TOL {
            conv += 1;
        }
        if plus > centre + CONVEXITY_TOL {
            mono += 1;
        }
    }
    Ok(ConvexityProbe {
        samples,
        convexity_violations: conv,
        monotonicity_violations: mono,
        holds: conv == 0 && mono == 0,
    })
}
