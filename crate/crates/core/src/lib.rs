//! Randomly biased random walks on supercritical Galton-Watson trees.
//!
//! The crate covers the whole pipeline: the environment law and its regime
//! classification ([`law`]), marked trees ([`tree`]), exact quenched
//! escape probabilities ([`quenched`]), walk simulation ([`walk`]),
//! small-deviation estimators for one-dimensional walks ([`rw1d`]) and
//! size-biased spine sampling ([`spine`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod law;
pub mod presets;
pub mod quenched;
pub mod replicas;
pub mod rng;
pub mod rw1d;
pub mod spine;
pub mod tree;
pub mod walk;

pub use error::{Error, Result};
pub use estimate::RateEstimate;
pub use law::{Kappa, OffspringLaw, Regime, RegimeReport};
pub use rw1d::StepLaw;
pub use tree::{ExtinctionPolicy, MarkedTree, Site};
