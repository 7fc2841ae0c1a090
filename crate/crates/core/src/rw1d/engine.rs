//! Survival curves of path constraints for one-dimensional walks.
//!
//! An event is a per-step admissibility test on `(i, S_i, max_{1<=j<=i} S_j,
//! nu_{i-1})` plus an optional terminal weight. The engine returns, for every
//! `j`, the probability that steps `1..=j` are all admissible, and the
//! expectation of the terminal weight on the full event.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::step::StepLaw;
use crate::error::{Error, Result};
use crate::estimate::{MeanAccumulator, RateEstimate};
use crate::replicas::{chunk_ranges, map_replicas};
use crate::rng::{replica_seed, rng_from_key};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub i: usize,
    pub s: f64,
    /// `max_{1<=j<=i} S_j`; `-inf` at `i = 0`.
    pub smax: f64,
    /// Offspring count attached to the latest step, if tracked.
    pub nu: Option<u32>,
    /// True while every auxiliary coin so far has succeeded.
    pub aux: bool,
}

impl PathState {
    pub fn origin(start: f64) -> Self {
        Self { i: 0, s: start, smax: f64::NEG_INFINITY, nu: None, aux: true }
    }

    fn advance(&mut self, x: f64, nu: Option<u32>, coin: bool) {
        self.i += 1;
        self.s += x;
        self.smax = self.smax.max(self.s);
        self.nu = nu;
        self.aux &= coin;
    }
}

pub trait PathEvent: Sync {
    /// Whether the constraint at step `st.i >= 1` holds.
    fn admissible(&self, st: &PathState) -> bool;
    /// Weight collected by paths admissible at every step.
    fn final_weight(&self, _st: &PathState) -> f64 {
        1.0
    }
}

/// Event given by closures.
pub struct FnEvent<A, W> {
    pub admissible: A,
    pub final_weight: W,
}

impl<A, W> PathEvent for FnEvent<A, W>
where
    A: Fn(&PathState) -> bool + Sync,
    W: Fn(&PathState) -> f64 + Sync,
{
    fn admissible(&self, st: &PathState) -> bool {
        (self.admissible)(st)
    }
    fn final_weight(&self, st: &PathState) -> f64 {
        (self.final_weight)(st)
    }
}

pub fn event<A: Fn(&PathState) -> bool + Sync>(admissible: A) -> FnEvent<A, fn(&PathState) -> f64> {
    FnEvent { admissible, final_weight: |_| 1.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Estimator {
    /// Independent paths, each stopped at its first inadmissible step.
    Naive { reps: u64 },
    /// Fixed-population sequential Monte Carlo: after each step the
    /// admissible particles are resampled back to `population`; the survival
    /// estimate is the product of the per-step survival fractions. Repeated
    /// over independent batches for the standard error.
    Splitting { population: usize, batches: u64 },
    /// Exact dynamic programming over lattice states (Rademacher steps only).
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    /// `survival[j]` estimates `P(admissible at steps 1..=j)`; `survival[0] = 1`.
    pub survival: Vec<f64>,
    pub survival_se: Vec<f64>,
    /// Estimate of `E[final_weight; admissible at all steps]`.
    pub terminal: RateEstimate,
}

/// Configuration shared by all estimators.
#[derive(Debug, Clone)]
pub struct PathConfig<'a> {
    pub step: &'a StepLaw,
    pub n: usize,
    pub start: f64,
    /// Per-step success probability of independent auxiliary coins.
    pub aux_prob: Option<f64>,
}

impl<'a> PathConfig<'a> {
    pub fn new(step: &'a StepLaw, n: usize) -> Self {
        Self { step, n, start: 0.0, aux_prob: None }
    }
}

const NAIVE_CHUNKS: u64 = 64;

pub fn survival<E: PathEvent>(cfg: &PathConfig, ev: &E, est: Estimator, seed: u64) -> Result<SurvivalCurve> {
    cfg.step.validate()?;
    match est {
        Estimator::Naive { reps } => Ok(naive(cfg, ev, reps, seed)),
        Estimator::Splitting { population, batches } => {
            if population == 0 || batches < 2 {
                return Err(Error::InvalidArgument("splitting needs a population and at least 2 batches".into()));
            }
            Ok(splitting(cfg, ev, population, batches, seed))
        }
        Estimator::Exact => exact(cfg, ev),
    }
}

fn draw<R: Rng>(cfg: &PathConfig, rng: &mut R, st: &mut PathState) {
    let step = cfg.step.sample(rng);
    let coin = cfg.aux_prob.is_none_or(|q| rng.random::<f64>() < q);
    st.advance(step.x, step.nu, coin);
}

fn naive<E: PathEvent>(cfg: &PathConfig, ev: &E, reps: u64, seed: u64) -> SurvivalCurve {
    let n = cfg.n;
    let parts = map_replicas(NAIVE_CHUNKS, |c| {
        let range = chunk_ranges(reps, NAIVE_CHUNKS).get(c as usize).cloned().unwrap_or(0..0);
        let mut reached = vec![0u64; n + 1];
        let mut terminal = MeanAccumulator::default();
        for rep in range {
            // One stream per path keeps paths aligned across events that
            // share a seed.
            let mut rng = rng_from_key(replica_seed(seed, rep));
            let mut st = PathState::origin(cfg.start);
            let mut ok = true;
            while st.i < n {
                draw(cfg, &mut rng, &mut st);
                if !ev.admissible(&st) {
                    ok = false;
                    break;
                }
            }
            let last = if ok { n } else { st.i - 1 };
            reached[last] += 1;
            terminal.push(if ok { ev.final_weight(&st) } else { 0.0 });
        }
        (reached, terminal)
    });
    let mut reached = vec![0u64; n + 1];
    let mut terminal = MeanAccumulator::default();
    for (r, t) in &parts {
        reached.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        terminal.merge(t);
    }
    // reached[j] counts paths whose last admissible step is j.
    let mut survival = vec![0.0; n + 1];
    let mut tail = 0u64;
    for j in (0..=n).rev() {
        tail += reached[j];
        survival[j] = tail as f64 / reps.max(1) as f64;
    }
    let survival_se = survival.iter().map(|&p| (p * (1.0 - p) / reps.max(1) as f64).sqrt()).collect();
    SurvivalCurve { survival, survival_se, terminal: terminal.estimate() }
}

fn splitting<E: PathEvent>(cfg: &PathConfig, ev: &E, population: usize, batches: u64, seed: u64) -> SurvivalCurve {
    let n = cfg.n;
    let runs = map_replicas(batches, |b| {
        let mut rng = rng_from_key(replica_seed(seed, b));
        let mut curve = vec![0.0; n + 1];
        curve[0] = 1.0;
        let mut particles = vec![PathState::origin(cfg.start); population];
        let mut alive = Vec::with_capacity(population);
        let mut log_surv = 0.0;
        for j in 1..=n {
            alive.clear();
            for p in particles.iter_mut() {
                draw(cfg, &mut rng, p);
                if ev.admissible(p) {
                    alive.push(*p);
                }
            }
            if alive.is_empty() {
                return (curve, 0.0, 0u64);
            }
            log_surv += (alive.len() as f64 / population as f64).ln();
            curve[j] = log_surv.exp();
            if j < n {
                for p in particles.iter_mut() {
                    *p = alive[rng.random_range(0..alive.len())];
                }
            }
        }
        let last = if n == 0 { &particles } else { &alive };
        let mean_w = last.iter().map(|p| ev.final_weight(p)).sum::<f64>() / last.len() as f64;
        let hits = last.iter().filter(|p| ev.final_weight(p) != 0.0).count() as u64;
        let terminal = curve[n] * mean_w;
        (curve, terminal, hits)
    });
    let mut per_j = vec![MeanAccumulator::default(); n + 1];
    let mut terminal = MeanAccumulator::default();
    let mut hits = 0;
    for (curve, t, h) in &runs {
        for (acc, &v) in per_j.iter_mut().zip(curve) {
            acc.push(v);
        }
        terminal.push(*t);
        hits += h;
    }
    let mut term = terminal.estimate();
    term.hits = hits;
    term.reps = batches * population as u64;
    SurvivalCurve {
        survival: per_j.iter().map(|a| a.mean()).collect(),
        survival_se: per_j.iter().map(|a| a.estimate().se).collect(),
        terminal: term,
    }
}

fn exact<E: PathEvent>(cfg: &PathConfig, ev: &E) -> Result<SurvivalCurve> {
    if *cfg.step != StepLaw::Rademacher || cfg.start != 0.0 {
        return Err(Error::InvalidArgument("exact evaluation needs Rademacher steps from 0".into()));
    }
    let q = cfg.aux_prob.unwrap_or(1.0);
    let n = cfg.n;
    // State (S, max S, coins ok) on the integer lattice; i64::MIN stands for
    // "no max yet".
    type Key = (i64, i64, bool);
    let mut states: HashMap<Key, f64> = HashMap::from([((0, i64::MIN, true), 1.0)]);
    let mut survival = vec![1.0; n + 1];
    let to_state = |i: usize, (s, m, aux): Key| PathState { i, s: s as f64, smax: m as f64, nu: None, aux };
    for (j, surv) in survival.iter_mut().enumerate().skip(1) {
        let mut next: HashMap<Key, f64> = HashMap::with_capacity(states.len() * 2);
        for (&(s, m, aux), &p) in &states {
            for dx in [-1, 1] {
                for (coin, pc) in [(true, q), (false, 1.0 - q)] {
                    if pc == 0.0 {
                        continue;
                    }
                    let key = (s + dx, m.max(s + dx), aux && coin);
                    if ev.admissible(&to_state(j, key)) {
                        *next.entry(key).or_insert(0.0) += 0.5 * p * pc;
                    }
                }
            }
        }
        states = next;
        *surv = states.values().sum();
    }
    let terminal: f64 = states.iter().map(|(&k, &p)| p * ev.final_weight(&to_state(n, k))).sum();
    Ok(SurvivalCurve { survival_se: vec![0.0; n + 1], survival, terminal: RateEstimate::exact(terminal) })
}
