//! Max-gap rule for strict bounds `l < |A| < u` on the number of signals.
//!
//! The threshold grows linearly in `n`:
//!
//! ```text
//! inner = max{ |ln((alpha/C1) / (2 (K-l) (K-l-1)))|, |ln((beta/C1) / (2 u (u-1)))| }
//! PaperLiteral:          e(n) = (1-rho)/mu * inner + n mu / 2
//! DerivationConsistent:  e(n) = sqrt(2) * [(1-rho)/mu * inner + n mu / 2]
//! ```
//!
//! The union bound behind the threshold controls `P(S_i - S_j >= e)` through
//! `e / sqrt(2)`, so the bound chain holds for the `DerivationConsistent`
//! form. `PaperLiteral` keeps the unscaled closed form for comparison. The
//! default is `DerivationConsistent`.

use std::f64::consts::SQRT_2;

use super::{adjusted_levels, check_model_scale, StopDecision};
use crate::error::{Error, Result};
use crate::model::{ranked_gap, SufficientStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxGapVariant {
    PaperLiteral,
    #[default]
    DerivationConsistent,
}

impl MaxGapVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            MaxGapVariant::PaperLiteral => "paper_literal",
            MaxGapVariant::DerivationConsistent => "derivation_consistent",
        }
    }
}

impl std::str::FromStr for MaxGapVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" => Ok(MaxGapVariant::PaperLiteral),
            "derivation_consistent" => Ok(MaxGapVariant::DerivationConsistent),
            other => Err(Error::InvalidExperiment(format!(
                "unknown max-gap variant {other:?} (expected paper_literal or derivation_consistent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxGapRuleConfig {
    pub l: usize,
    pub u: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c1_adjust: f64,
    pub variant: MaxGapVariant,
    /// The larger of the two log terms.
    pub inner: f64,
    /// `n`-independent part of `e(n)`.
    pub base: f64,
    /// Coefficient of `n` in `e(n)`.
    pub slope: f64,
}

impl MaxGapRuleConfig {
    pub fn threshold(&self, n: u64) -> f64 {
        self.base + self.slope * n as f64
    }

    /// One-based ranks eligible for the maximum: `l < i < u`.
    pub fn eligible_ranks(&self) -> std::ops::Range<usize> {
        self.l + 1..self.u
    }
}

#[allow(clippy::too_many_arguments)]
pub fn calibrate_maxgap(
    l: usize,
    u: usize,
    k: usize,
    alpha: f64,
    beta: f64,
    rho: f64,
    mu: f64,
    c1_adjust: f64,
    variant: MaxGapVariant,
) -> Result<MaxGapRuleConfig> {
    if k < 2 {
        return Err(Error::TooFewStreams(k));
    }
    if l == 0 || u >= k || l >= u {
        return Err(Error::InvalidBounds(format!(
            "max-gap rule needs 1 <= l < u <= K - 1 (got l = {l}, u = {u}, K = {k})"
        )));
    }
    if u < l + 2 {
        return Err(Error::InvalidBounds(format!(
            "no rank i with l < i < u for l = {l}, u = {u}; need u >= l + 2"
        )));
    }
    check_model_scale(rho, mu)?;
    let (a, b) = adjusted_levels(alpha, beta, c1_adjust)?;
    let noise_pairs = (2 * (k - l) * (k - l - 1)) as f64;
    let signal_pairs = (2 * u * (u - 1)) as f64;
    let inner = (a / noise_pairs)
        .ln()
        .abs()
        .max((b / signal_pairs).ln().abs());
    let literal_base = (1.0 - rho) / mu * inner;
    let literal_slope = mu / 2.0;
    let (base, slope) = match variant {
        MaxGapVariant::PaperLiteral => (literal_base, literal_slope),
        MaxGapVariant::DerivationConsistent => (SQRT_2 * literal_base, SQRT_2 * literal_slope),
    };
    Ok(MaxGapRuleConfig {
        l,
        u,
        k,
        alpha,
        beta,
        c1_adjust,
        variant,
        inner,
        base,
        slope,
    })
}

pub(crate) fn step_ordered(
    sums: &[f64],
    order: &[usize],
    n: u64,
    cfg: &MaxGapRuleConfig,
) -> StopDecision {
    let mut best_rank = cfg.l + 1;
    let mut best_gap = f64::NEG_INFINITY;
    for rank in cfg.eligible_ranks() {
        let g = ranked_gap(sums, order, rank);
        if g > best_gap {
            best_gap = g;
            best_rank = rank;
        }
    }
    if best_gap >= cfg.threshold(n) {
        StopDecision::Stop {
            rejected: order[..best_rank].to_vec(),
        }
    } else {
        StopDecision::Continue
    }
}

/// Stop when `max_{l<i<u} (S_(i) - S_(i+1)) >= e(n)`; reject the top `p`
/// streams where `p` is the smallest maximizing rank.
pub fn maxgap_rule_step(stats: &SufficientStats, cfg: &MaxGapRuleConfig) -> StopDecision {
    let mut order = Vec::with_capacity(stats.k());
    stats.order_into(&mut order);
    step_ordered(stats.sums(), &order, stats.n(), cfg)
}
