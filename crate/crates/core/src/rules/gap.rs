//! Gap rule for a known number of signals.

use super::{adjusted_levels, check_model_scale, StopDecision};
use crate::error::{Error, Result};
use crate::model::{ranked_gap, SufficientStats};

/// Calibrated gap rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRuleConfig {
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c1_adjust: f64,
    /// Log-likelihood-scale threshold `|ln((alpha/C1) ^ (beta/C1))| + ln(m (K - m))`.
    pub c: f64,
    /// Sum-scale threshold `(1 - rho) c / mu`.
    pub threshold: f64,
}

impl GapRuleConfig {
    /// Union bound `m (K - m) e^{-c}` on the probability of incorrect selection.
    pub fn pics_bound(&self) -> f64 {
        (self.m * (self.k - self.m)) as f64 * (-self.c).exp()
    }
}

pub fn calibrate_gap(
    m: usize,
    k: usize,
    alpha: f64,
    beta: f64,
    rho: f64,
    mu: f64,
    c1_adjust: f64,
) -> Result<GapRuleConfig> {
    if k < 2 {
        return Err(Error::TooFewStreams(k));
    }
    if m == 0 || m >= k {
        return Err(Error::InvalidBounds(format!(
            "gap rule needs 1 <= m <= K - 1 (got m = {m}, K = {k})"
        )));
    }
    check_model_scale(rho, mu)?;
    let (a, b) = adjusted_levels(alpha, beta, c1_adjust)?;
    let c = a.min(b).ln().abs() + ((m * (k - m)) as f64).ln();
    let threshold = (1.0 - rho) / mu * c;
    Ok(GapRuleConfig {
        m,
        k,
        alpha,
        beta,
        c1_adjust,
        c,
        threshold,
    })
}

pub(crate) fn step_ordered(sums: &[f64], order: &[usize], cfg: &GapRuleConfig) -> StopDecision {
    if ranked_gap(sums, order, cfg.m) >= cfg.threshold {
        StopDecision::Stop {
            rejected: order[..cfg.m].to_vec(),
        }
    } else {
        StopDecision::Continue
    }
}

/// Stop when `S_(m) - S_(m+1) >= G` and reject the `m` largest sums.
pub fn gap_rule_step(stats: &SufficientStats, cfg: &GapRuleConfig) -> StopDecision {
    let mut order = Vec::with_capacity(stats.k());
    stats.order_into(&mut order);
    step_ordered(stats.sums(), &order, cfg)
}
