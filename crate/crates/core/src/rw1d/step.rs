use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAtom {
    pub weight: f64,
    pub point: f64,
    /// Offspring count attached to this increment, if tracked.
    #[serde(default)]
    pub nu: Option<u32>,
}

/// Law of one increment of a one-dimensional walk, optionally jointly with
/// an offspring count `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepLaw {
    /// Uniform on `{-1, +1}`.
    Rademacher,
    Gaussian {
        mean: f64,
        var: f64,
        #[serde(default)]
        nu: Option<u32>,
    },
    Mixture {
        atoms: Vec<StepAtom>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub x: f64,
    pub nu: Option<u32>,
}

impl StepLaw {
    pub fn gaussian(mean: f64, var: f64) -> Self {
        StepLaw::Gaussian { mean, var, nu: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepLaw::Rademacher => Ok(()),
            StepLaw::Gaussian { mean, var, .. } => {
                if mean.is_finite() && var.is_finite() && *var >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("bad gaussian step ({mean}, {var})")))
                }
            }
            StepLaw::Mixture { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if atoms.is_empty() || atoms.iter().any(|a| !(a.weight >= 0.0) || !a.point.is_finite()) {
                    return Err(Error::InvalidArgument("bad mixture atoms".into()));
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("mixture weights sum to {total}")));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            StepLaw::Rademacher => 0.0,
            StepLaw::Gaussian { mean, .. } => *mean,
            StepLaw::Mixture { atoms } => atoms.iter().map(|a| a.weight * a.point).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            StepLaw::Rademacher => 1.0,
            StepLaw::Gaussian { var, .. } => *var,
            StepLaw::Mixture { atoms } => {
                let m = self.mean();
                atoms.iter().map(|a| a.weight * (a.point - m).powi(2)).sum()
            }
        }
    }

    /// Largest possible absolute increment, `None` when unbounded.
    pub fn max_abs_step(&self) -> Option<f64> {
        match self {
            StepLaw::Rademacher => Some(1.0),
            StepLaw::Gaussian { mean, var, .. } => (*var == 0.0).then_some(mean.abs()),
            StepLaw::Mixture { atoms } => {
                Some(atoms.iter().filter(|a| a.weight > 0.0).map(|a| a.point.abs()).fold(0.0, f64::max))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Step {
        match self {
            StepLaw::Rademacher => Step { x: if rng.random::<bool>() { 1.0 } else { -1.0 }, nu: None },
            StepLaw::Gaussian { mean, var, nu } => {
                let z: f64 = rng.sample(StandardNormal);
                Step { x: mean + var.sqrt() * z, nu: *nu }
            }
            StepLaw::Mixture { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return Step { x: a.point, nu: a.nu };
                    }
                }
                let a = atoms.last().expect("nonempty mixture");
                Step { x: a.point, nu: a.nu }
            }
        }
    }

    /// Exponentially tilted law `P_lambda(dx) = e^{lambda x} P(dx) / M(lambda)`
    /// together with `log M(lambda)`.
    pub fn exp_tilt(&self, lambda: f64) -> (StepLaw, f64) {
        match self {
            StepLaw::Rademacher => {
                let log_m = lambda.cosh().ln();
                let up = lambda.exp() / (2.0 * lambda.cosh());
                let atoms = vec![
                    StepAtom { weight: up, point: 1.0, nu: None },
                    StepAtom { weight: 1.0 - up, point: -1.0, nu: None },
                ];
                (StepLaw::Mixture { atoms }, log_m)
            }
            StepLaw::Gaussian { mean, var, nu } => (
                StepLaw::Gaussian { mean: mean + lambda * var, var: *var, nu: *nu },
                lambda * mean + 0.5 * lambda * lambda * var,
            ),
            StepLaw::Mixture { atoms } => {
                let shift = atoms.iter().map(|a| lambda * a.point).fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = atoms.iter().map(|a| a.weight * (lambda * a.point - shift).exp()).sum();
                let tilted = atoms
                    .iter()
                    .map(|a| StepAtom { weight: a.weight * (lambda * a.point - shift).exp() / total, ..*a })
                    .collect();
                (StepLaw::Mixture { atoms: tilted }, shift + total.ln())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_key;

    #[test]
    fn tilt_of_gaussian() {
        let (t, lm) = StepLaw::gaussian(0.5, 2.0).exp_tilt(1.0);
        assert_eq!(t, StepLaw::gaussian(2.5, 2.0));
        assert!((lm - 1.5).abs() < 1e-15);
    }

    #[test]
    fn tilt_of_rademacher_has_log_cosh_mgf() {
        let (t, lm) = StepLaw::Rademacher.exp_tilt(0.7);
        assert!((lm - 0.7f64.cosh().ln()).abs() < 1e-15);
        assert!((t.mean() - 0.7f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn mixture_moments_and_sampling() {
        let law = StepLaw::Mixture {
            atoms: vec![
                StepAtom { weight: 0.25, point: -2.0, nu: Some(1) },
                StepAtom { weight: 0.75, point: 1.0, nu: Some(3) },
            ],
        };
        law.validate().unwrap();
        assert!((law.mean() - 0.25).abs() < 1e-15);
        let mut rng = rng_from_key(1);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| law.sample(&mut rng).x).sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 0.02);
        assert_eq!(law.max_abs_step(), Some(2.0));
    }
}
