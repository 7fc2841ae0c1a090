use serde::{Deserialize, Serialize};

/// A point estimate with its standard error.
///
/// For event probabilities `value` is the probability estimate and `hits`
/// counts the replicas that realized the event. For means of general
/// observables `hits` counts replicas with a nonzero contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub value: f64,
    pub se: f64,
    pub reps: u64,
    pub hits: u64,
    /// Normalized rate `-(scale) * log(value)`, when a scale applies.
    pub rate: Option<f64>,
    /// Theoretical rate for the same normalization, when one is known.
    pub predicted_rate: Option<f64>,
}

impl RateEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0, reps: 0, hits: 0, rate: None, predicted_rate: None }
    }

    /// Bernoulli proportion `hits / reps`.
    pub fn proportion(hits: u64, reps: u64) -> Self {
        let p = if reps == 0 { 0.0 } else { hits as f64 / reps as f64 };
        let se = if reps == 0 { 0.0 } else { (p * (1.0 - p) / reps as f64).sqrt() };
        Self { value: p, se, reps, hits, rate: None, predicted_rate: None }
    }

    /// Sample mean with the usual standard error.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = MeanAccumulator::default();
        for &x in samples {
            acc.push(x);
        }
        acc.estimate()
    }

    /// Attaches the rate `-scale * log(value)`.
    pub fn with_rate(mut self, scale: f64) -> Self {
        self.rate = (self.value > 0.0).then(|| -scale * self.value.ln());
        self
    }

    pub fn with_predicted(mut self, predicted: f64) -> Self {
        self.predicted_rate = Some(predicted);
        self
    }

    /// True when `target` lies within `k` standard errors of the estimate.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    nonzero: u64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        if x != 0.0 {
            self.nonzero += 1;
        }
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
        self.nonzero += other.nonzero;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> RateEstimate {
        let se = if self.n < 2 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        RateEstimate { value: self.mean, se, reps: self.n, hits: self.nonzero, rate: None, predicted_rate: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let mut a = MeanAccumulator::default();
        let mut b = MeanAccumulator::default();
        let mut all = MeanAccumulator::default();
        for (i, &x) in xs.iter().enumerate() {
            all.push(x);
            if i < 20 {
                a.push(x)
            } else {
                b.push(x)
            }
        }
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn proportion_rate() {
        let e = RateEstimate::proportion(1, 100).with_rate(2.0);
        assert!((e.rate.unwrap() - 2.0 * 100f64.ln()).abs() < 1e-12);
        assert!(RateEstimate::proportion(0, 10).with_rate(1.0).rate.is_none());
    }
}
