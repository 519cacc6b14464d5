//! Sequential multiple testing for `K` equicorrelated Gaussian streams.
//!
//! Each stream tests `N(0, 1)` against `N(mu, 1)`; the per-step observation
//! vector has common pairwise correlation `rho`. The crate provides
//!
//! * [`model`]: the stream model, its shared-factor sampler, and the
//!   cumulative-sum statistics the rules act on;
//! * [`sprt`]: Wald's SPRT, its boundaries and ASN approximations;
//! * [`rules`]: the gap, max-gap and gap-intersection stopping rules with
//!   their threshold calibrations;
//! * [`metrics`]: FWER, PICS, FDR, FNR, pFDR and pFNR estimation;
//! * [`montecarlo`]: a seeded, parallel replication harness with
//!   asymptotic-ASN comparisons.

pub mod error;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod rules;
pub mod sprt;

pub use error::{Error, Result};
pub use model::{ModelParams, ObservationBatch, SufficientStats};
pub use montecarlo::{ExperimentSpec, ExperimentSummary, RuleKind, TrialResult, GENERATOR_ID};
pub use rules::{MaxGapVariant, Rule, StopDecision};
