//! Sequential multiple-testing rules: calibration and per-step stopping logic.
//!
//! * [`gap`]: known number of signals `m`. Stop when the gap between the
//!   `m`-th and `(m+1)`-th largest sums reaches a fixed threshold.
//! * [`maxgap`]: strict bounds `l < |A| < u`. Stop when the largest eligible
//!   ordered-sum gap reaches a threshold that grows linearly in `n`.
//! * [`gi`]: the gap-intersection rule for independent streams, driven by
//!   per-stream log-likelihood ratios and four thresholds.
//!
//! All stopping inequalities are non-strict.

pub mod gap;
pub mod gi;
pub mod maxgap;

use crate::error::{Error, Result};
use crate::model::{ModelParams, SufficientStats};

pub use gap::{calibrate_gap, gap_rule_step, GapRuleConfig};
pub use gi::{calibrate_gi, gi_rule_step, GIRuleConfig};
pub use maxgap::{calibrate_maxgap, maxgap_rule_step, MaxGapRuleConfig, MaxGapVariant};

/// Outcome of one stopping check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    /// Stop sampling; `rejected` holds the zero-based streams declared signal,
    /// in decreasing order of their sums.
    Stop {
        rejected: Vec<usize>,
    },
}

impl StopDecision {
    pub fn is_stop(&self) -> bool {
        matches!(self, StopDecision::Stop { .. })
    }

    pub fn rejected(&self) -> Option<&[usize]> {
        match self {
            StopDecision::Stop { rejected } => Some(rejected),
            StopDecision::Continue => None,
        }
    }
}

/// A calibrated rule ready to be stepped.
#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    Gap(GapRuleConfig),
    MaxGap(MaxGapRuleConfig),
    GapIntersection(GIRuleConfig),
}

/// Reusable buffers for [`Rule::step_with`].
#[derive(Debug, Default, Clone)]
pub struct StepScratch {
    order: Vec<usize>,
    llrs: Vec<f64>,
}

impl Rule {
    pub fn step(&self, stats: &SufficientStats, params: &ModelParams) -> StopDecision {
        self.step_with(stats, params, &mut StepScratch::default())
    }

    pub fn step_with(
        &self,
        stats: &SufficientStats,
        params: &ModelParams,
        scratch: &mut StepScratch,
    ) -> StopDecision {
        match self {
            Rule::Gap(cfg) => {
                stats.order_into(&mut scratch.order);
                gap::step_ordered(stats.sums(), &scratch.order, cfg)
            }
            Rule::MaxGap(cfg) => {
                stats.order_into(&mut scratch.order);
                maxgap::step_ordered(stats.sums(), &scratch.order, stats.n(), cfg)
            }
            Rule::GapIntersection(cfg) => {
                scratch.llrs.clear();
                scratch.llrs.extend(stats.sums().iter().map(|&s| {
                    crate::model::llr_star_value(s, stats.n(), params.mu(), params.rho())
                }));
                gi::step_llrs(&scratch.llrs, &mut scratch.order, cfg)
            }
        }
    }
}

/// Kullback-Leibler numbers for the unit-variance mean-shift problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlNumbers {
    pub d0: f64,
    pub d1: f64,
    pub eta0: f64,
    pub eta1: f64,
}

/// Every stream tests `N(0, 1)` against `N(mu, 1)`, so `D0 = D1 = mu^2 / 2`
/// and the minima over any subset coincide with them.
pub fn kl_numbers(params: &ModelParams) -> KlNumbers {
    let d = params.mu() * params.mu() / 2.0;
    KlNumbers {
        d0: d,
        d1: d,
        eta0: d,
        eta1: d,
    }
}

pub(crate) fn check_level(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel { name, value })
    }
}

/// Validates `alpha`, `beta` and their `C1`-adjusted versions.
pub(crate) fn adjusted_levels(alpha: f64, beta: f64, c1_adjust: f64) -> Result<(f64, f64)> {
    check_level("alpha", alpha)?;
    check_level("beta", beta)?;
    if !(c1_adjust > 0.0 && c1_adjust.is_finite()) {
        return Err(Error::InvalidExperiment(format!(
            "c1_adjust must be positive (got {c1_adjust})"
        )));
    }
    let (a, b) = (alpha / c1_adjust, beta / c1_adjust);
    check_level("alpha / c1_adjust", a)?;
    check_level("beta / c1_adjust", b)?;
    Ok((a, b))
}

pub(crate) fn check_model_scale(rho: f64, mu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::RhoOutOfRange(rho));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::NonPositiveMu(mu));
    }
    Ok(())
}
