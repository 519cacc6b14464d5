//! Per-trial confusion accounting and Monte Carlo error-rate estimates.
//!
//! For a decision `D` against the true signal set `A`:
//! `V = |D \ A|` (true nulls rejected), `W = |A \ D|` (false nulls accepted),
//! `R = |D|`. The estimated metrics are
//!
//! | metric | per-trial quantity            |
//! |--------|-------------------------------|
//! | FWER1  | `1{V >= 1}`                   |
//! | FWER2  | `1{W >= 1}`                   |
//! | PICS   | `1{D != A}`                   |
//! | FDR    | `V / max(R, 1)`               |
//! | FNR    | `W / max(K - R, 1)`           |
//! | pFDR   | `V / R` given `R >= 1`        |
//! | pFNR   | `W / (K - R)` given `K - R >= 1` |

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub v: usize,
    pub w: usize,
    pub r: usize,
    pub k: usize,
}

/// Counts errors of a rejected set against the true signal set. Both sets hold
/// zero-based stream indices below `k`.
pub fn confusion(
    rejected: &[usize],
    signal_set: &BTreeSet<usize>,
    k: usize,
) -> Result<ConfusionCounts> {
    let mut seen = vec![false; k];
    for &i in rejected {
        if i >= k {
            return Err(Error::SignalOutOfRange { index: i, k });
        }
        seen[i] = true;
    }
    if let Some(&index) = signal_set.iter().find(|&&i| i >= k) {
        return Err(Error::SignalOutOfRange { index, k });
    }
    let r = seen.iter().filter(|&&x| x).count();
    let v = (0..k)
        .filter(|&i| seen[i] && !signal_set.contains(&i))
        .count();
    let w = signal_set.iter().filter(|&&i| !seen[i]).count();
    Ok(ConfusionCounts { v, w, r, k })
}

/// Per-trial contributions to each metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialContribs {
    pub fdp: f64,
    pub fnp: f64,
    pub any_false_rej: bool,
    pub any_false_acc: bool,
    pub incorrect_selection: bool,
    pub r_positive: bool,
    pub k_minus_r_positive: bool,
}

pub fn per_trial_contribs(counts: &ConfusionCounts) -> TrialContribs {
    let ConfusionCounts { v, w, r, k } = *counts;
    TrialContribs {
        fdp: v as f64 / r.max(1) as f64,
        fnp: w as f64 / (k - r).max(1) as f64,
        any_false_rej: v > 0,
        any_false_acc: w > 0,
        incorrect_selection: v + w > 0,
        r_positive: r > 0,
        k_minus_r_positive: k > r,
    }
}

impl TrialContribs {
    /// Checks `fdp <= 1{V>=1} <= K fdp` and `fnp <= 1{W>=1} <= K fnp`.
    pub fn sandwich_holds(&self, k: usize) -> bool {
        let kf = k as f64;
        let rej = f64::from(u8::from(self.any_false_rej));
        let acc = f64::from(u8::from(self.any_false_acc));
        self.fdp <= rej && rej <= kf * self.fdp && self.fnp <= acc && acc <= kf * self.fnp
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// A conditional mean that is undefined when no trial qualifies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEstimate {
    pub value: Option<f64>,
    pub qualifying: usize,
}

impl ConditionalEstimate {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEstimates {
    pub trials: usize,
    pub fwer1: Estimate,
    pub fwer2: Estimate,
    pub pics: Estimate,
    pub fdr: Estimate,
    pub fnr: Estimate,
    pub pfdr: ConditionalEstimate,
    pub pfnr: ConditionalEstimate,
}

fn indicator_estimate(hits: usize, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate {
        value: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

fn mean_estimate(values: impl Iterator<Item = f64> + Clone, n: usize) -> Estimate {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return Estimate {
            value: mean,
            se: 0.0,
        };
    }
    let ss: f64 = values.map(|x| (x - mean) * (x - mean)).sum();
    Estimate {
        value: mean,
        se: (ss / (nf - 1.0) / nf).sqrt(),
    }
}

fn conditional(pairs: impl Iterator<Item = (bool, f64)>) -> ConditionalEstimate {
    let (count, total) = pairs
        .filter(|&(ok, _)| ok)
        .fold((0usize, 0.0), |(c, s), (_, x)| (c + 1, s + x));
    ConditionalEstimate {
        value: (count > 0).then(|| total / count as f64),
        qualifying: count,
    }
}

/// Aggregates trials in the order given; the result depends only on that order.
pub fn aggregate(contribs: &[TrialContribs]) -> Result<MetricEstimates> {
    let n = contribs.len();
    if n == 0 {
        return Err(Error::NoTrials);
    }
    let count = |f: fn(&TrialContribs) -> bool| contribs.iter().filter(|c| f(c)).count();
    Ok(MetricEstimates {
        trials: n,
        fwer1: indicator_estimate(count(|c| c.any_false_rej), n),
        fwer2: indicator_estimate(count(|c| c.any_false_acc), n),
        pics: indicator_estimate(count(|c| c.incorrect_selection), n),
        fdr: mean_estimate(contribs.iter().map(|c| c.fdp), n),
        fnr: mean_estimate(contribs.iter().map(|c| c.fnp), n),
        pfdr: conditional(contribs.iter().map(|c| (c.r_positive, c.fdp))),
        pfnr: conditional(contribs.iter().map(|c| (c.k_minus_r_positive, c.fnp))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn confusion_examples() {
        // D = {1, 3}, A = {1, 2} in one-based terms.
        assert_eq!(
            confusion(&[0, 2], &set(&[0, 1]), 4).unwrap(),
            ConfusionCounts {
                v: 1,
                w: 1,
                r: 2,
                k: 4
            }
        );
        assert_eq!(
            confusion(&[0, 1], &set(&[0, 1]), 4).unwrap(),
            ConfusionCounts {
                v: 0,
                w: 0,
                r: 2,
                k: 4
            }
        );
        assert_eq!(
            confusion(&[], &set(&[0, 1, 2, 3]), 4).unwrap(),
            ConfusionCounts {
                v: 0,
                w: 4,
                r: 0,
                k: 4
            }
        );
        assert!(confusion(&[4], &set(&[0]), 4).is_err());
        assert!(confusion(&[0], &set(&[7]), 4).is_err());
    }

    #[test]
    fn contrib_examples() {
        let c = per_trial_contribs(&ConfusionCounts {
            v: 1,
            w: 1,
            r: 2,
            k: 4,
        });
        assert_eq!((c.fdp, c.fnp), (0.5, 0.5));
        assert!(c.any_false_rej && c.any_false_acc && c.incorrect_selection);
        assert!(c.r_positive && c.k_minus_r_positive);

        let c = per_trial_contribs(&ConfusionCounts {
            v: 0,
            w: 0,
            r: 2,
            k: 4,
        });
        assert_eq!((c.fdp, c.fnp), (0.0, 0.0));
        assert!(!c.any_false_rej && !c.any_false_acc && !c.incorrect_selection);

        let c = per_trial_contribs(&ConfusionCounts {
            v: 0,
            w: 2,
            r: 0,
            k: 4,
        });
        assert_eq!((c.fdp, c.fnp), (0.0, 0.5));
    }

    #[test]
    fn pfdr_is_conditional_mean() {
        let trials: Vec<_> = [(1, 2), (0, 2), (0, 0)]
            .iter()
            .map(|&(v, r)| per_trial_contribs(&ConfusionCounts { v, w: 0, r, k: 4 }))
            .collect();
        let m = aggregate(&trials).unwrap();
        assert_eq!(m.pfdr.value, Some(0.25));
        assert_eq!(m.pfdr.qualifying, 2);
    }

    #[test]
    fn all_zero_trials() {
        let zero = per_trial_contribs(&ConfusionCounts {
            v: 0,
            w: 0,
            r: 0,
            k: 4,
        });
        let m = aggregate(&vec![zero; 100]).unwrap();
        for e in [m.fwer1, m.fwer2, m.pics, m.fdr, m.fnr] {
            assert_eq!(
                e,
                Estimate {
                    value: 0.0,
                    se: 0.0
                }
            );
        }
        assert!(!m.pfdr.is_defined());
        assert_eq!(m.pfnr.value, Some(0.0));
    }

    #[test]
    fn single_trial_has_zero_se() {
        let t = per_trial_contribs(&ConfusionCounts {
            v: 1,
            w: 0,
            r: 3,
            k: 4,
        });
        let m = aggregate(&[t]).unwrap();
        assert_eq!(
            m.fdr,
            Estimate {
                value: 1.0 / 3.0,
                se: 0.0
            }
        );
        assert_eq!(
            m.fwer1,
            Estimate {
                value: 1.0,
                se: 0.0
            }
        );
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(aggregate(&[]), Err(Error::NoTrials));
    }

    fn arb_trial() -> impl Strategy<Value = (BTreeSet<usize>, Vec<usize>, usize)> {
        (2usize..9).prop_flat_map(|k| {
            (
                prop::collection::btree_set(0..k, 0..=k),
                prop::collection::btree_set(0..k, 0..=k),
                Just(k),
            )
                .prop_map(|(a, d, k)| (a, d.into_iter().collect(), k))
        })
    }

    proptest! {
        #[test]
        fn reconstruction_and_sandwich((a, d, k) in arb_trial()) {
            let c = confusion(&d, &a, k).unwrap();
            prop_assert_eq!(c.r, c.v + a.len() - c.w);
            let t = per_trial_contribs(&c);
            prop_assert!(t.sandwich_holds(k));
            prop_assert!((0.0..=1.0).contains(&t.fdp) && (0.0..=1.0).contains(&t.fnp));
            if d.len() == a.len() {
                prop_assert_eq!(t.any_false_rej, t.incorrect_selection);
                prop_assert_eq!(t.any_false_acc, t.incorrect_selection);
            }
        }

        #[test]
        fn aggregated_sandwich(trials in prop::collection::vec(arb_trial(), 1..40)) {
            let contribs: Vec<_> = trials
                .iter()
                .map(|(a, d, k)| per_trial_contribs(&confusion(d, a, *k).unwrap()))
                .collect();
            let kmax = trials.iter().map(|t| t.2).max().unwrap() as f64;
            let m = aggregate(&contribs).unwrap();
            prop_assert!(m.fdr.value <= m.fwer1.value + 1e-12);
            prop_assert!(m.fnr.value <= m.fwer2.value + 1e-12);
            prop_assert!(m.fdr.value >= m.fwer1.value / kmax - 1e-12);
            prop_assert!(m.fnr.value >= m.fwer2.value / kmax - 1e-12);
        }
    }
}
