//! Wald's sequential probability ratio test for a Gaussian mean.
//!
//! Tests `H0: U ~ N(theta0, sigma2)` against `H1: U ~ N(theta1, sigma2)` with
//! `theta0 < theta1`. Sampling continues while the centered sum
//! `sum(U) - n (theta0 + theta1) / 2` stays strictly between
//! `b sigma2 / (theta1 - theta0)` and `a sigma2 / (theta1 - theta0)`, where
//! `a = ln((1 - delta) / gamma)` and `b = ln(delta / (1 - gamma))`.
//!
//! Setting `delta = 0` gives the one-sided test: `b = -inf`, so the test can
//! only ever stop by rejecting `H0`.

use crate::error::{Error, Result};

/// Hypotheses and target error levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtConfig {
    pub theta0: f64,
    pub theta1: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl SprtConfig {
    pub fn new(theta0: f64, theta1: f64, sigma2: f64, gamma: f64, delta: f64) -> Result<Self> {
        let cfg = Self {
            theta0,
            theta1,
            sigma2,
            gamma,
            delta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSprt(msg));
        if !(self.theta0.is_finite() && self.theta1.is_finite() && self.theta0 < self.theta1) {
            return bad(format!(
                "need finite theta0 < theta1 (got {} and {})",
                self.theta0, self.theta1
            ));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be positive (got {})", self.sigma2));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1) (got {})", self.gamma));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1) (got {})", self.delta));
        }
        if self.gamma + self.delta >= 1.0 {
            return bad(format!(
                "gamma + delta must be < 1 (got {})",
                self.gamma + self.delta
            ));
        }
        Ok(())
    }

    /// Per-observation Kullback-Leibler divergence `(theta1 - theta0)^2 / (2 sigma2)`.
    pub fn kl(&self) -> f64 {
        let d = self.theta1 - self.theta0;
        d * d / (2.0 * self.sigma2)
    }

    pub fn is_one_sided(&self) -> bool {
        self.delta == 0.0
    }

    fn sum_scale(&self) -> f64 {
        self.sigma2 / (self.theta1 - self.theta0)
    }

    fn midpoint(&self) -> f64 {
        (self.theta1 + self.theta0) / 2.0
    }
}

/// Log-likelihood-ratio boundaries and their sum-scale images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprtBoundaries {
    /// Upper log boundary; crossing it rejects `H0`.
    pub a: f64,
    /// Lower log boundary, `-inf` for the one-sided test.
    pub b: f64,
    scale: f64,
    midpoint: f64,
}

impl SprtBoundaries {
    /// Log boundaries for raw levels, without checking that they form a
    /// usable test.
    pub fn from_levels(gamma: f64, delta: f64) -> (f64, f64) {
        let a = ((1.0 - delta) / gamma).ln();
        let b = if delta == 0.0 {
            f64::NEG_INFINITY
        } else {
            (delta / (1.0 - gamma)).ln()
        };
        (a, b)
    }

    /// Threshold on `sum(U) - n (theta0 + theta1) / 2` for rejecting `H0`.
    pub fn upper_centered(&self) -> f64 {
        self.a * self.scale
    }

    /// Threshold on the centered sum for accepting `H0`.
    pub fn lower_centered(&self) -> f64 {
        self.b * self.scale
    }

    /// Upper boundary on the raw cumulative sum after `n` observations.
    pub fn upper_sum_bound(&self, n: u64) -> f64 {
        self.upper_centered() + n as f64 * self.midpoint
    }

    /// Lower boundary on the raw cumulative sum after `n` observations.
    pub fn lower_sum_bound(&self, n: u64) -> f64 {
        self.lower_centered() + n as f64 * self.midpoint
    }
}

pub fn boundaries(config: &SprtConfig) -> Result<SprtBoundaries> {
    config.validate()?;
    let (a, b) = SprtBoundaries::from_levels(config.gamma, config.delta);
    Ok(SprtBoundaries {
        a,
        b,
        scale: config.sum_scale(),
        midpoint: config.midpoint(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SprtDecision {
    Continue,
    AcceptH0,
    RejectH0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SprtOutcome {
    pub decision: SprtDecision,
    pub stopping_time: u64,
}

/// Result of driving an SPRT over a stream of increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SprtRun {
    Decided(SprtOutcome),
    /// No boundary was crossed within `n` observations.
    Truncated {
        n: u64,
    },
}

/// Decision after `n` observations whose total is `cum_sum`. A simultaneous
/// crossing of both boundaries (only possible when `a <= b`) rejects.
pub fn sprt_step(
    boundaries: &SprtBoundaries,
    config: &SprtConfig,
    n: u64,
    cum_sum: f64,
) -> SprtDecision {
    let centered = cum_sum - n as f64 * config.midpoint();
    if centered >= boundaries.upper_centered() {
        SprtDecision::RejectH0
    } else if centered <= boundaries.lower_centered() {
        SprtDecision::AcceptH0
    } else {
        SprtDecision::Continue
    }
}

/// Feeds increments one at a time until a boundary is crossed, the source
/// runs dry, or `horizon_cap` observations have been used.
pub fn run_sprt<I>(config: &SprtConfig, increments: I, horizon_cap: u64) -> Result<SprtRun>
where
    I: IntoIterator<Item = f64>,
{
    if horizon_cap == 0 {
        return Err(Error::InvalidSprt("horizon_cap must be >= 1".into()));
    }
    let bounds = boundaries(config)?;
    let mut sum = 0.0;
    let mut n = 0;
    for u in increments.into_iter().take(horizon_cap as usize) {
        n += 1;
        sum += u;
        match sprt_step(&bounds, config, n, sum) {
            SprtDecision::Continue => {}
            decision => {
                return Ok(SprtRun::Decided(SprtOutcome {
                    decision,
                    stopping_time: n,
                }))
            }
        }
    }
    Ok(SprtRun::Truncated { n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1,
}

// x * ln(y) with the 0 * ln(0) = 0 convention.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Wald's approximate average sample number under `H0` or `H1`, ignoring
/// overshoot.
pub fn asn_wald(config: &SprtConfig, under: Hypothesis) -> Result<f64> {
    config.validate()?;
    let (g, d) = (config.gamma, config.delta);
    let l = config.kl();
    match under {
        Hypothesis::H0 => {
            if d == 0.0 {
                return Err(Error::OneSidedWaldAsn);
            }
            Ok(((1.0 - g) * (d / (1.0 - g)).ln() + g * ((1.0 - d) / g).ln()) / -l)
        }
        Hypothesis::H1 => Ok((xlny(d, d / (1.0 - g)) + (1.0 - d) * ((1.0 - d) / g).ln()) / l),
    }
}

/// Leading-order ASN `2 sigma2 / (theta1 - theta0)^2 * |ln(gamma ^ delta)|`,
/// with `gamma ^ 0` read as `gamma`.
pub fn asn_asymptotic(config: &SprtConfig) -> Result<f64> {
    config.validate()?;
    let level = if config.delta == 0.0 {
        config.gamma
    } else {
        config.gamma.min(config.delta)
    };
    let d = config.theta1 - config.theta0;
    Ok(2.0 * config.sigma2 / (d * d) * level.ln().abs())
}
