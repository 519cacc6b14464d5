//! Gap-intersection rule, the baseline for independent streams.
//!
//! With ordered log-likelihood ratios `lam^(1) >= ... >= lam^(K)` and
//! `p(n) = #{k : lam_k(n) > 0}`, the rule stops at the first `n` where any of
//!
//! * `lam^(l+1) <= -a` and `lam^(l) - lam^(l+1) >= c`
//! * `l <= p(n) <= u` and no `lam_k` lies in `(-a, b)`
//! * `lam^(u) >= b` and `lam^(u) - lam^(u+1) >= d`
//!
//! holds, then rejects the top `p'` streams with `p' = clamp(p(n), l, u)`.

use super::{check_level, StopDecision};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GIRuleConfig {
    pub l: usize,
    pub u: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Thresholds `a = |ln beta| + ln K`, `b = |ln alpha| + ln K`,
/// `c = |ln alpha| + ln((K - l) K)`, `d = |ln beta| + ln(u K)`.
pub fn calibrate_gi(l: usize, u: usize, k: usize, alpha: f64, beta: f64) -> Result<GIRuleConfig> {
    if k < 2 {
        return Err(Error::TooFewStreams(k));
    }
    if l == 0 || l >= u || u >= k {
        return Err(Error::InvalidBounds(format!(
            "gap-intersection rule needs 0 < l < u < K (got l = {l}, u = {u}, K = {k})"
        )));
    }
    check_level("alpha", alpha)?;
    check_level("beta", beta)?;
    let kf = k as f64;
    let la = alpha.ln().abs();
    let lb = beta.ln().abs();
    Ok(GIRuleConfig {
        l,
        u,
        k,
        a: lb + kf.ln(),
        b: la + kf.ln(),
        c: la + (((k - l) * k) as f64).ln(),
        d: lb + ((u * k) as f64).ln(),
    })
}

pub(crate) fn step_llrs(llrs: &[f64], order: &mut Vec<usize>, cfg: &GIRuleConfig) -> StopDecision {
    order.clear();
    order.extend(0..llrs.len());
    order.sort_by(|&x, &y| llrs[y].total_cmp(&llrs[x]).then(x.cmp(&y)));
    // One-based rank access.
    let ranked = |r: usize| llrs[order[r - 1]];

    let (l, u) = (cfg.l, cfg.u);
    let p = llrs.iter().filter(|&&x| x > 0.0).count();

    let tau1 = ranked(l + 1) <= -cfg.a && ranked(l) - ranked(l + 1) >= cfg.c;
    let tau2 = (l..=u).contains(&p) && llrs.iter().all(|&x| x <= -cfg.a || x >= cfg.b);
    let tau3 = ranked(u) >= cfg.b && ranked(u) - ranked(u + 1) >= cfg.d;

    if tau1 || tau2 || tau3 {
        let p_prime = p.clamp(l, u);
        StopDecision::Stop {
            rejected: order[..p_prime].to_vec(),
        }
    } else {
        StopDecision::Continue
    }
}

/// One stopping check on the current per-stream log-likelihood ratios.
pub fn gi_rule_step(llrs: &[f64], cfg: &GIRuleConfig) -> Result<StopDecision> {
    if llrs.len() != cfg.k {
        return Err(Error::LengthMismatch {
            expected: cfg.k,
            got: llrs.len(),
        });
    }
    Ok(step_llrs(llrs, &mut Vec::with_capacity(cfg.k), cfg))
}
