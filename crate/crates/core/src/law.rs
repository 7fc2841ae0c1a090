//! Environment law: the joint law of the offspring count and the
//! multiplicative marks `A_1, ..., A_N`, its log-moment function
//! `psi(t) = log E[sum_i A_i^t]` and the regime classification.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rw1d::{StepAtom, StepLaw};

/// Tolerance used to decide whether the infimum of `psi` on `[0, 1]` is zero.
pub const REGIME_TOL: f64 = 1e-9;
/// Target accuracy of the critical exponent.
pub const THETA_TOL: f64 = 1e-12;

/// One atom of a tabulated environment: with probability `prob` the vertex
/// has `a_values.len()` children carrying the given marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub prob: f64,
    pub a_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OffspringLaw {
    /// Fixed offspring count with i.i.d. marks `A_i = exp(G_i)`, `G_i ~ N(mu, s2)`.
    LogNormal { n_children: u32, mu: f64, s2: f64 },
    /// Finite mixture of deterministic offspring configurations.
    DiscreteTable { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Kappa {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Transient,
    PositiveRecurrentNegDrift,
    SubdiffusiveKappa,
    CriticalSlowNull,
    CriticalSlowBoundary,
}

impl Regime {
    pub fn is_critical(self) -> bool {
        matches!(self, Regime::CriticalSlowNull | Regime::CriticalSlowBoundary)
    }
}

/// Scaling constants of a critical environment at exponent `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub theta: f64,
    /// `E[sum A^theta (log A)^2] / theta`.
    pub sigma2: f64,
    /// `3 pi^2 sigma2 / 2`.
    pub alpha: f64,
    /// Limit of `min_{|x|=n} Vbar(x) / n^(1/3)`, equal to `alpha^(1/3)`.
    pub min_vbar_constant: f64,
    /// Limit of `max_{k<=n} |X_k| / (log n)^3`.
    pub displacement_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub mean_offspring: f64,
    pub psi_min: f64,
    pub argmin_t: f64,
    pub psi_prime_one: f64,
    pub theta: Option<f64>,
    pub kappa: Option<Kappa>,
    pub constants: Option<LimitConstants>,
}

impl OffspringLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => {
                if *n_children == 0 {
                    return Err(Error::InvalidLaw("n_children must be positive".into()));
                }
                if !mu.is_finite() || !s2.is_finite() || *s2 <= 0.0 {
                    return Err(Error::InvalidLaw(format!("bad lognormal parameters mu = {mu}, s2 = {s2}")));
                }
            }
            OffspringLaw::DiscreteTable { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidLaw("table has no atoms".into()));
                }
                let mut total = 0.0;
                for atom in atoms {
                    if !(atom.prob >= 0.0) || !atom.prob.is_finite() {
                        return Err(Error::InvalidLaw(format!("bad probability {}", atom.prob)));
                    }
                    if let Some(a) = atom.a_values.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
                        return Err(Error::InvalidLaw(format!("mark {a} is not positive and finite")));
                    }
                    total += atom.prob;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }

    /// `E[sum_i A_i^t (log A_i)^k]` for `k` in `0..=2`.
    pub fn moment(&self, t: f64, k: u32) -> f64 {
        match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => {
                let base = *n_children as f64 * (t * mu + 0.5 * t * t * s2).exp();
                let m = mu + t * s2;
                base * match k {
                    0 => 1.0,
                    1 => m,
                    _ => m * m + s2,
                }
            }
            OffspringLaw::DiscreteTable { atoms } => atoms
                .iter()
                .map(|atom| {
                    let inner: f64 = atom
                        .a_values
                        .iter()
                        .map(|a| {
                            let l = a.ln();
                            (t * l).exp() * l.powi(k as i32)
                        })
                        .sum();
                    atom.prob * inner
                })
                .sum(),
        }
    }

    /// `psi(t) = log E[sum_i A_i^t]`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        let v = match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => (*n_children as f64).ln() + t * mu + 0.5 * t * t * s2,
            OffspringLaw::DiscreteTable { .. } => {
                self.table_tilt(t).map_or(f64::NAN, |(shift, sum, _)| shift + sum.ln())
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t })
        }
    }

    /// `psi'(t) = E[sum A^t log A] / E[sum A^t]`.
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        let v = match self {
            OffspringLaw::LogNormal { mu, s2, .. } => mu + t * s2,
            OffspringLaw::DiscreteTable { .. } => self.table_tilt(t).map_or(f64::NAN, |(_, sum, first)| first / sum),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t })
        }
    }

    /// For tables, `(c, sum w, sum w log a)` with `w = p a^t e^{-c}` and `c` the
    /// largest exponent, so that large `|t|` neither overflows nor underflows.
    fn table_tilt(&self, t: f64) -> Option<(f64, f64, f64)> {
        let OffspringLaw::DiscreteTable { atoms } = self else { return None };
        let terms = || {
            atoms
                .iter()
                .filter(|atom| atom.prob > 0.0)
                .flat_map(|atom| atom.a_values.iter().map(move |a| (atom.prob.ln() + t * a.ln(), a.ln())))
        };
        let shift = terms().map(|(e, _)| e).fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return None;
        }
        let (sum, first) = terms().fold((0.0, 0.0), |(s, f), (e, l)| {
            let w = (e - shift).exp();
            (s + w, f + w * l)
        });
        Some((shift, sum, first))
    }

    pub fn mean_offspring(&self) -> f64 {
        self.moment(0.0, 0)
    }

    /// Largest offspring count the law can produce.
    pub fn max_children(&self) -> usize {
        match self {
            OffspringLaw::LogNormal { n_children, .. } => *n_children as usize,
            OffspringLaw::DiscreteTable { atoms } => atoms.iter().map(|a| a.a_values.len()).max().unwrap_or(0),
        }
    }

    /// Probability that a vertex has no children.
    pub fn extinction_step_probability(&self) -> f64 {
        match self {
            OffspringLaw::LogNormal { .. } => 0.0,
            OffspringLaw::DiscreteTable { atoms } => {
                atoms.iter().filter(|a| a.a_values.is_empty()).map(|a| a.prob).sum()
            }
        }
    }

    /// Law of the marks raised to the power `theta`.
    pub fn rescaled(&self, theta: f64) -> OffspringLaw {
        match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => {
                OffspringLaw::LogNormal { n_children: *n_children, mu: theta * mu, s2: theta * theta * s2 }
            }
            OffspringLaw::DiscreteTable { atoms } => OffspringLaw::DiscreteTable {
                atoms: atoms
                    .iter()
                    .map(|a| Atom { prob: a.prob, a_values: a.a_values.iter().map(|x| x.powf(theta)).collect() })
                    .collect(),
            },
        }
    }

    /// Draws one offspring configuration into `out`.
    pub fn sample_marks<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => {
                let s = s2.sqrt();
                for _ in 0..*n_children {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push((mu + s * z).exp());
                }
            }
            OffspringLaw::DiscreteTable { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &atoms[atoms.len() - 1];
                for atom in atoms {
                    acc += atom.prob;
                    if u < acc {
                        chosen = atom;
                        break;
                    }
                }
                out.extend_from_slice(&chosen.a_values);
            }
        }
    }

    /// Draws an offspring configuration biased by `sum_i A_i` together with a
    /// distinguished child chosen with probability proportional to its mark.
    /// Returns the index of the distinguished child.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> usize {
        out.clear();
        match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => {
                let s = s2.sqrt();
                let j = rng.random_range(0..*n_children as usize);
                for i in 0..*n_children as usize {
                    let z: f64 = rng.sample(StandardNormal);
                    let m = if i == j { mu + s2 } else { *mu };
                    out.push((m + s * z).exp());
                }
                j
            }
            OffspringLaw::DiscreteTable { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.prob * a.a_values.iter().sum::<f64>()).sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut last = None;
                for atom in atoms {
                    for (j, a) in atom.a_values.iter().enumerate() {
                        let w = atom.prob * a;
                        if w <= 0.0 {
                            continue;
                        }
                        last = Some((atom, j));
                        acc += w;
                        if u < acc {
                            out.extend_from_slice(&atom.a_values);
                            return j;
                        }
                    }
                }
                let (atom, j) = last.expect("size-biased law needs a positive mark");
                out.extend_from_slice(&atom.a_values);
                j
            }
        }
    }

    /// Minimizer and minimum of `psi` over `[0, 1]`.
    pub fn psi_min_on_unit(&self) -> Result<(f64, f64)> {
        let d0 = self.psi_prime(0.0)?;
        let d1 = self.psi_prime(1.0)?;
        let t = if d0 >= 0.0 {
            0.0
        } else if d1 <= 0.0 {
            1.0
        } else {
            bisect_increasing(|t| self.psi_prime(t).unwrap_or(f64::NAN), 0.0, 1.0, 1e-14)
        };
        Ok((t, self.psi(t)?))
    }

    /// Classifies the law and computes its critical constants.
    pub fn classify(&self) -> Result<RegimeReport> {
        self.validate()?;
        let mean_offspring = self.mean_offspring();
        if mean_offspring <= 1.0 {
            return Err(Error::InvalidLaw(format!("mean offspring {mean_offspring} is not above 1")));
        }
        let (argmin_t, psi_min) = self.psi_min_on_unit()?;
        let psi_prime_one = self.psi_prime(1.0)?;
        let mut report = RegimeReport {
            regime: Regime::Transient,
            mean_offspring,
            psi_min,
            argmin_t,
            psi_prime_one,
            theta: None,
            kappa: None,
            constants: None,
        };
        if psi_min > REGIME_TOL {
            return Ok(report);
        }
        if psi_min < -REGIME_TOL {
            report.regime = Regime::PositiveRecurrentNegDrift;
            return Ok(report);
        }
        if psi_prime_one < -REGIME_TOL {
            report.regime = Regime::SubdiffusiveKappa;
            report.kappa = Some(self.kappa()?);
            return Ok(report);
        }
        let theta = if psi_prime_one.abs() <= REGIME_TOL { 1.0 } else { argmin_t };
        report.regime = if theta == 1.0 { Regime::CriticalSlowNull } else { Regime::CriticalSlowBoundary };
        report.theta = Some(theta);
        report.constants = self.limit_constants(theta);
        Ok(report)
    }

    /// `inf{t > 1 : psi(t) = 0}` for a law with `psi(1) = 0` and `psi'(1) < 0`.
    pub fn kappa(&self) -> Result<Kappa> {
        let dpsi = |t: f64| self.psi_prime(t).unwrap_or(f64::INFINITY);
        let mut hi = 2.0;
        while dpsi(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e9 {
                return Ok(Kappa::Infinite);
            }
        }
        let tmin = bisect_increasing(dpsi, 1.0, hi, 1e-13);
        let psi = |t: f64| self.psi(t).unwrap_or(f64::INFINITY);
        if psi(tmin) >= 0.0 {
            return Ok(Kappa::Finite(tmin));
        }
        let mut step = 1.0;
        while psi(tmin + step) <= 0.0 {
            step *= 2.0;
            if step > 1e9 {
                return Ok(Kappa::Infinite);
            }
        }
        Ok(Kappa::Finite(bisect_increasing(psi, tmin, tmin + step, 1e-13)))
    }

    /// Critical exponent `theta` solving `inf_[0,1] psi = psi(theta) = 0`.
    pub fn solve_theta(&self) -> Result<f64> {
        let report = self.classify()?;
        report.theta.ok_or_else(|| Error::WrongRegime(format!("{:?} has no critical exponent", report.regime)))
    }

    /// Limit constants at exponent `theta`, or `None` for a degenerate law.
    pub fn limit_constants(&self, theta: f64) -> Option<LimitConstants> {
        let sigma2 = self.moment(theta, 2) / theta;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return None;
        }
        let alpha = 1.5 * PI * PI * sigma2;
        let displacement_constant = if theta == 1.0 { 4.0 / alpha } else { 1.0 / alpha };
        Some(LimitConstants { theta, sigma2, alpha, min_vbar_constant: alpha.cbrt(), displacement_constant })
    }

    /// Law of `(S_1, nu_0)` for the one-dimensional walk attached to the law
    /// rescaled by `theta`: `E f(S_1, nu_0) = E sum_i A_i^theta f(-theta log A_i, N)`.
    pub fn tilted_step_law(&self, theta: f64) -> Result<StepLaw> {
        self.validate()?;
        let psi = self.psi(theta)?;
        if psi.abs() > REGIME_TOL {
            return Err(Error::WrongRegime(format!("psi({theta}) = {psi} is not zero")));
        }
        Ok(match self {
            OffspringLaw::LogNormal { n_children, mu, s2 } => StepLaw::Gaussian {
                mean: -(theta * mu + theta * theta * s2),
                var: theta * theta * s2,
                nu: Some(*n_children),
            },
            OffspringLaw::DiscreteTable { atoms } => {
                let norm = psi.exp();
                let mut out = Vec::new();
                for atom in atoms {
                    for a in &atom.a_values {
                        let weight = atom.prob * a.powf(theta) / norm;
                        if weight > 0.0 {
                            out.push(StepAtom { weight, point: -theta * a.ln(), nu: Some(atom.a_values.len() as u32) });
                        }
                    }
                }
                StepLaw::Mixture { atoms: out }
            }
        })
    }
}

/// Root of an increasing function on `[lo, hi]` by bisection.
pub(crate) fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn critical() -> OffspringLaw {
        OffspringLaw::LogNormal { n_children: 2, mu: -2.0 * LN_2, s2: 2.0 * LN_2 }
    }

    #[test]
    fn lognormal_psi_closed_form() {
        let law = critical();
        for t in [0.0, 0.3, 1.0, 2.5] {
            let expect = 2f64.ln() - 2.0 * LN_2 * t + LN_2 * t * t;
            assert!((law.psi(t).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn table_psi_matches_lognormal_free_case() {
        let law = OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: vec![0.5, 0.5] }] };
        assert!(law.psi(1.0).unwrap().abs() < 1e-15);
        assert!((law.psi_prime(1.0).unwrap() + LN_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_tables() {
        let bad = OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 0.5, a_values: vec![1.0] }] };
        assert!(matches!(bad.validate(), Err(Error::InvalidLaw(_))));
        let neg = OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: vec![-1.0] }] };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn bisection_converges() {
        let r = bisect_increasing(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
