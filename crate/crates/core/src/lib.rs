//! Exact and Monte Carlo analysis of the additive automaton
//! `(x_n) -> (x_n + x_{n+1})` acting on Markov subgroup shifts.
//!
//! The crate provides:
//!
//! - arithmetic of finite Abelian p^s-torsion groups ([`group`]);
//! - Markov subgroup shifts: incidence validation, follower cosets, mixing
//!   index, path counts, and the Haar measure ([`shift`], [`dist`]);
//! - compatible Markov measures with a regenerative sampler and the
//!   associated renewal process ([`measure`]);
//! - binomial coefficients modulo prime powers, carry counting, digit
//!   statistics and isolated coefficient positions ([`binomial`]);
//! - marginals of the iterated automaton: exact transfer dynamic program,
//!   brute-force oracle, Monte Carlo estimator, Cesàro averaging, and
//!   total-variation comparisons against Haar ([`pushforward`]).
//!
//! Probability-carrying code is generic over [`scalar::Scalar`]; `f64` is
//! the default and `BigRational` drives the exact calibration oracles.

pub mod binomial;
pub mod dist;
pub mod error;
pub mod group;
pub mod measure;
pub mod presets;
pub mod pushforward;
pub mod scalar;
pub mod shift;

pub use dist::{tv_distance, CylinderDistribution};
pub use error::{Error, Result};
pub use group::{unit_inverse, GroupElement, GroupSpec};
pub use measure::{MarkovMeasure, PathTrace, RegenSampler, RenewalStats};
pub use scalar::{Exact, Prob, Scalar};
pub use shift::{Caps, IncidenceMatrix, SubgroupShift};

/// Cylinder table over the exact scalar, as produced by the calibration
/// oracles.
pub type ExactCylinder = dist::CylinderDistribution<Exact>;

/// Markov measure over the exact scalar.
pub type ExactMeasure = measure::MarkovMeasure<Exact>;
