//! Experiment configuration files.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use rwre_core::law::OffspringLaw;
use rwre_core::rw1d::{BrownianVariant, CorollaryVariant, Estimator, Profile};
use rwre_core::spine::{BirthDeathSpec, PathFunctional, TreeFunctional};
use rwre_core::{presets, StepLaw};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub law: Option<LawSpec>,
    /// Base seed; replica `i` uses `replica_seed(seed, i)`.
    #[serde(default)]
    pub seed: u64,
    /// Output directory for `<name>.csv` and `<name>.summary.json`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub experiment: Experiment,
}

/// A preset name or an explicit law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct LawSpec(pub OffspringLaw);

impl TryFrom<serde_json::Value> for LawSpec {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        let preset = match &v {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Object(m) => m.get("preset").and_then(|p| p.as_str()).map(str::to_owned),
            _ => None,
        };
        if let Some(name) = preset {
            return presets::by_name(&name)
                .map(LawSpec)
                .ok_or_else(|| format!("unknown preset `{name}` (known: {})", presets::NAMES.join(", ")));
        }
        OffspringLaw::deserialize(v).map(LawSpec).map_err(|e| format!("law: {e}"))
    }
}

impl From<LawSpec> for serde_json::Value {
    fn from(l: LawSpec) -> Self {
        serde_json::to_value(l.0).expect("laws serialize")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    AnalyzeLaw,
    SolveEnsemble {
        n_list: Vec<u32>,
        trees: u64,
    },
    WalkScaling {
        steps: u64,
        replicas: u64,
        #[serde(default)]
        depth_cap: Option<u32>,
    },
    MinVbarScaling {
        n_list: Vec<u32>,
        trees: u64,
        threshold_factor: f64,
        #[serde(default = "default_budget")]
        budget: u64,
    },
    Rw1dSuite {
        variants: Vec<Rw1dItem>,
    },
    SpineSuite {
        checks: Vec<SpineCheck>,
    },
}

fn default_budget() -> u64 {
    100_000_000
}

fn rademacher() -> StepLaw {
    StepLaw::Rademacher
}

/// A constant or a list of grid values on `[0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(f64),
    Values(Vec<f64>),
}

impl ProfileSpec {
    pub fn to_profile(&self) -> Result<Profile> {
        match self {
            ProfileSpec::Constant(c) => Ok(Profile::constant(*c)),
            ProfileSpec::Values(v) => Ok(Profile::from_values(v.clone())?),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rw1dItem {
    Band {
        lo: f64,
        hi: f64,
        n: usize,
        estimator: Estimator,
        #[serde(default = "rademacher")]
        step: StepLaw,
        #[serde(default)]
        endpoint_b: Option<f64>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Reflected {
        f: ProfileSpec,
        delta: f64,
        n: usize,
        estimator: Estimator,
        #[serde(default = "rademacher")]
        step: StepLaw,
        #[serde(default)]
        endpoint_b: Option<f64>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Chung {
        r: f64,
        n: usize,
        estimator: Estimator,
        #[serde(default = "rademacher")]
        step: StepLaw,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Corollary {
        variant: CorollaryVariant,
        n: usize,
        estimator: Estimator,
        #[serde(default = "rademacher")]
        step: StepLaw,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    Sandwich {
        r: f64,
        n: usize,
        aux_prob: f64,
        estimator: Estimator,
        #[serde(default = "rademacher")]
        step: StepLaw,
    },
    Brownian {
        u: f64,
        n: usize,
        estimator: Estimator,
        variant: BrownianVariant,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpineCheck {
    Martingale {
        n: u32,
        reps: u64,
    },
    ManyToOne {
        n: u32,
        functional: PathFunctional,
        reps: u64,
    },
    SpineLaw {
        reps: u64,
    },
    AbsoluteContinuity {
        n: u32,
        functional: TreeFunctional,
        reps: u64,
    },
    ProductBound {
        instances: u64,
        max_n: usize,
        max_k: usize,
    },
    BirthDeath {
        spec: BirthDeathSpec,
        ell: usize,
        m: usize,
        excursions: u64,
    },
    Convexity {
        c: f64,
        a: Vec<f64>,
        samples: u64,
    },
    YRecursion {
        n: u32,
        trees: u64,
    },
    /// `a` and `b` default to the critical window `(3 pi^2 sigma^2 / 2)^(1/3)`.
    FirstMoment {
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
        n: usize,
        estimator: Estimator,
    },
    SecondMoment {
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
        eps: f64,
        n: usize,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::AnalyzeLaw => "analyze_law",
            Experiment::SolveEnsemble { .. } => "solve_ensemble",
            Experiment::WalkScaling { .. } => "walk_scaling",
            Experiment::MinVbarScaling { .. } => "min_vbar_scaling",
            Experiment::Rw1dSuite { .. } => "rw1d_suite",
            Experiment::SpineSuite { .. } => "spine_suite",
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        let spec: Self = serde_json::from_str(&text)
            .map_err(|source| CliError::Config { path: path.display().to_string(), source })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Invalid(format!("name `{}` must be a nonempty file stem", self.name)));
        }
        let needs_law = !matches!(self.experiment, Experiment::Rw1dSuite { .. });
        if needs_law && self.law.is_none() {
            return Err(CliError::Invalid(format!("`law` is required for {} experiments", self.experiment.kind())));
        }
        if let Some(law) = &self.law {
            law.0.validate()?;
        }
        let increasing = |l: &[u32]| !l.is_empty() && l[0] >= 1 && l.windows(2).all(|w| w[0] < w[1]);
        match &self.experiment {
            Experiment::SolveEnsemble { n_list, trees } | Experiment::MinVbarScaling { n_list, trees, .. } => {
                if !increasing(n_list) {
                    return Err(CliError::Invalid("`n_list` must be positive and strictly increasing".into()));
                }
                if *trees == 0 {
                    return Err(CliError::Invalid("`trees` must be at least 1".into()));
                }
            }
            Experiment::WalkScaling { steps, replicas, .. } if *replicas == 0 || *steps == 0 => {
                return Err(CliError::Invalid("`steps` and `replicas` must be at least 1".into()));
            }
            _ => {}
        }
        if let Experiment::MinVbarScaling { threshold_factor, .. } = &self.experiment {
            if threshold_factor.is_nan() || *threshold_factor <= 0.0 {
                return Err(CliError::Invalid("`threshold_factor` must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn law(&self) -> Result<&OffspringLaw> {
        self.law.as_ref().map(|l| &l.0).ok_or_else(|| CliError::Invalid("`law` is required".into()))
    }
}
