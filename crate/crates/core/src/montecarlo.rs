//! Deterministic, parallel Monte Carlo harness.
//!
//! Every trial draws from its own ChaCha20 stream seeded by
//! [`derive_trial_seed`]`(master_seed, trial_index)`, so a trial's outcome is a
//! pure function of the spec and its index. Trials may run on any number of
//! workers; results are collected and aggregated in trial-index order.
//!
//! A trial that reaches `horizon_cap` without stopping is recorded as
//! truncated. For error metrics it is scored as the worst possible decision
//! (every null rejected, every signal accepted), and it contributes
//! `horizon_cap` to the mean stopping time. Experiments with more than 5%
//! truncated trials are flagged unreliable.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, confusion, per_trial_contribs, ConfusionCounts, MetricEstimates, TrialContribs,
};
use crate::model::{ModelParams, Sampler, SufficientStats};
use crate::rules::{
    calibrate_gap, calibrate_gi, calibrate_maxgap, kl_numbers, MaxGapVariant, Rule, StepScratch,
    StopDecision,
};
use crate::sprt::{asn_asymptotic, SprtConfig};

/// Identifies the random stream construction. Recorded in every report.
pub const GENERATOR_ID: &str =
    "chacha20(rand_chacha-0.9,seed_from_u64)+ziggurat-normal(rand_distr-0.5);trial_seed=splitmix64";

/// Fraction of truncated trials above which an experiment is unreliable.
pub const MAX_TRUNCATION_FRACTION: f64 = 0.05;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `mix(mix(master) + index * golden_gamma)`, where `mix` is
/// the SplitMix64 finalizer. Both steps are bijections on `u64`, so seeds
/// are distinct across all indices for a fixed master.
pub fn derive_trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed).wrapping_add(trial_index.wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator for one trial.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_trial_seed(master_seed, trial_index))
}

/// Which rule to run, before calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Gap {
        m: usize,
    },
    MaxGap {
        l: usize,
        u: usize,
        variant: MaxGapVariant,
    },
    GapIntersection {
        l: usize,
        u: usize,
    },
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::Gap { .. } => "gap",
            RuleKind::MaxGap { .. } => "maxgap",
            RuleKind::GapIntersection { .. } => "gi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub rule: RuleKind,
    pub alpha: f64,
    pub beta: f64,
    /// Level divisor for general error metrics; 1 for FWER control.
    pub c1_adjust: f64,
    /// Run the gap-intersection baseline on correlated streams using the
    /// latent log-likelihood ratios. Off by default; the baseline is only
    /// justified for `rho = 0`.
    pub allow_dependent_gi: bool,
    pub replications: u64,
    pub master_seed: u64,
    /// `None` selects [`default_horizon`].
    pub horizon_cap: Option<u64>,
}

impl ExperimentSpec {
    pub fn new(params: ModelParams, rule: RuleKind, alpha: f64, beta: f64) -> Self {
        Self {
            params,
            rule,
            alpha,
            beta,
            c1_adjust: 1.0,
            allow_dependent_gi: false,
            replications: 10_000,
            master_seed: 0,
            horizon_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidExperiment("replications must be >= 1".into()));
        }
        if self.horizon_cap == Some(0) {
            return Err(Error::InvalidExperiment("horizon_cap must be >= 1".into()));
        }
        let a = self.params.num_signals();
        match self.rule {
            RuleKind::Gap { m } if a != m => Err(Error::InvalidExperiment(format!(
                "gap rule with m = {m} needs exactly {m} signals (signal set has {a})"
            ))),
            RuleKind::MaxGap { l, u, .. } if !(l < a && a < u) => Err(Error::InvalidExperiment(
                format!("max-gap rule needs l < |A| < u (l = {l}, u = {u}, |A| = {a})"),
            )),
            RuleKind::GapIntersection { l, u } if !(l <= a && a <= u) => {
                Err(Error::InvalidExperiment(format!(
                    "gap-intersection rule needs l <= |A| <= u (l = {l}, u = {u}, |A| = {a})"
                )))
            }
            RuleKind::GapIntersection { .. }
                if self.params.rho() > 0.0 && !self.allow_dependent_gi =>
            {
                Err(Error::InvalidExperiment(
                    "the gap-intersection baseline assumes independent streams (rho = 0); \
                     set allow_dependent_gi to run it on correlated streams"
                        .into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn calibrate(&self) -> Result<Rule> {
        let p = &self.params;
        Ok(match self.rule {
            RuleKind::Gap { m } => Rule::Gap(calibrate_gap(
                m,
                p.k(),
                self.alpha,
                self.beta,
                p.rho(),
                p.mu(),
                self.c1_adjust,
            )?),
            RuleKind::MaxGap { l, u, variant } => Rule::MaxGap(calibrate_maxgap(
                l,
                u,
                p.k(),
                self.alpha,
                self.beta,
                p.rho(),
                p.mu(),
                self.c1_adjust,
                variant,
            )?),
            RuleKind::GapIntersection { l, u } => Rule::GapIntersection(calibrate_gi(
                l,
                u,
                p.k(),
                self.alpha / self.c1_adjust,
                self.beta / self.c1_adjust,
            )?),
        })
    }

    pub fn resolved_horizon(&self) -> u64 {
        self.horizon_cap
            .unwrap_or_else(|| default_horizon(theoretical_asymptote(self)))
    }
}

/// `max(1000, ceil(50 * asymptote))`.
pub fn default_horizon(asymptote: f64) -> u64 {
    ((50.0 * asymptote).ceil() as u64).max(1000)
}

/// First-order expected stopping time of the configured rule as
/// `alpha, beta -> 0`.
///
/// * gap: `(1 - rho) / mu^2 * |ln(alpha ^ beta)|`
/// * max-gap: `2 (1 - rho) / mu^2 * |ln(alpha ^ beta)|`
/// * gap-intersection: the piecewise independent-stream expression in the
///   KL numbers, which depends on whether `|A|` sits at `l`, strictly inside,
///   or at `u`. With `allow_dependent_gi` the KL numbers of the latent
///   streams, `mu^2 / (2 (1 - rho))`, are used.
pub fn theoretical_asymptote(spec: &ExperimentSpec) -> f64 {
    let p = &spec.params;
    let rho = p.rho();
    let mu2 = p.mu() * p.mu();
    let la = spec.alpha.ln().abs();
    let lb = spec.beta.ln().abs();
    let lmin = spec.alpha.min(spec.beta).ln().abs();
    match spec.rule {
        RuleKind::Gap { .. } => (1.0 - rho) / mu2 * lmin,
        RuleKind::MaxGap { .. } => 2.0 * (1.0 - rho) / mu2 * lmin,
        RuleKind::GapIntersection { l, u } => {
            let kl = kl_numbers(p);
            let scale = 1.0 / (1.0 - rho);
            let (eta0, eta1) = (kl.eta0 * scale, kl.eta1 * scale);
            let a = p.num_signals();
            if a == l {
                (lb / eta0).max(la / (eta0 + eta1))
            } else if a == u {
                (la / eta1).max(lb / (eta0 + eta1))
            } else {
                (lb / eta0).max(la / eta1)
            }
        }
    }
}

/// Independent-stream gap-rule asymptote `|ln(alpha ^ beta)| / (eta0 + eta1)`.
pub fn independent_gap_asymptote(params: &ModelParams, alpha: f64, beta: f64) -> f64 {
    let kl = kl_numbers(params);
    alpha.min(beta).ln().abs() / (kl.eta0 + kl.eta1)
}

/// One realized stopping time and decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialResult {
    pub stopping_time: u64,
    /// Zero-based streams declared signal; empty when truncated.
    pub rejected: Vec<usize>,
    pub truncated: bool,
}

impl TrialResult {
    /// Confusion counts used for the error metrics. A truncated trial is
    /// scored as if the complement of the signal set had been rejected.
    pub fn counts(&self, params: &ModelParams) -> ConfusionCounts {
        let k = params.k();
        if self.truncated {
            let a = params.num_signals();
            return ConfusionCounts {
                v: k - a,
                w: a,
                r: k - a,
                k,
            };
        }
        confusion(&self.rejected, params.signal_set(), k)
            .expect("rule rejects only valid stream indices")
    }

    pub fn contribs(&self, params: &ModelParams) -> TrialContribs {
        per_trial_contribs(&self.counts(params))
    }
}

/// Per-step record of a single trial, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    /// `sums[n - 1]` holds the cumulative sums after `n` observations.
    pub sums: Vec<Vec<f64>>,
    /// Rule statistic at each step (the gap, max eligible gap, or zero for
    /// the gap-intersection rule).
    pub statistic: Vec<f64>,
    /// Threshold the statistic is compared against at each step.
    pub threshold: Vec<f64>,
    pub result: TrialResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub metrics: MetricEstimates,
    pub mean_t: f64,
    pub se_t: f64,
    pub asymptote: f64,
    pub ratio: f64,
    pub truncation_count: u64,
    pub replications: u64,
    pub horizon_cap: u64,
    pub generator_id: &'static str,
    pub master_seed: u64,
}

impl ExperimentSummary {
    pub fn reliable(&self) -> bool {
        (self.truncation_count as f64) <= MAX_TRUNCATION_FRACTION * self.replications as f64
    }
}

/// A validated, calibrated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    spec: ExperimentSpec,
    rule: Rule,
    horizon: u64,
}

impl Experiment {
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let rule = spec.calibrate()?;
        let horizon = spec.resolved_horizon();
        Ok(Self {
            spec,
            rule,
            horizon,
        })
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn run_trial(&self, trial_index: u64) -> TrialResult {
        let params = &self.spec.params;
        let mut rng = trial_rng(self.spec.master_seed, trial_index);
        let mut sampler = Sampler::new(params);
        let mut stats = SufficientStats::new(params.k());
        let mut obs = vec![0.0; params.k()];
        let mut scratch = StepScratch::default();
        for _ in 0..self.horizon {
            sampler.fill(&mut rng, &mut obs);
            stats.update(&obs).expect("sampler emits K values");
            if let StopDecision::Stop { rejected } =
                self.rule.step_with(&stats, params, &mut scratch)
            {
                return TrialResult {
                    stopping_time: stats.n(),
                    rejected,
                    truncated: false,
                };
            }
        }
        TrialResult {
            stopping_time: self.horizon,
            rejected: Vec::new(),
            truncated: true,
        }
    }

    /// Same path as [`Self::run_trial`], keeping every intermediate state.
    pub fn trace_trial(&self, trial_index: u64) -> TrialTrace {
        let params = &self.spec.params;
        let mut rng = trial_rng(self.spec.master_seed, trial_index);
        let mut sampler = Sampler::new(params);
        let mut stats = SufficientStats::new(params.k());
        let mut obs = vec![0.0; params.k()];
        let mut scratch = StepScratch::default();
        let mut trace = TrialTrace {
            sums: Vec::new(),
            statistic: Vec::new(),
            threshold: Vec::new(),
            result: TrialResult {
                stopping_time: self.horizon,
                rejected: Vec::new(),
                truncated: true,
            },
        };
        for _ in 0..self.horizon {
            sampler.fill(&mut rng, &mut obs);
            stats.update(&obs).expect("sampler emits K values");
            let (stat, thr) = self.monitored(&stats);
            trace.sums.push(stats.sums().to_vec());
            trace.statistic.push(stat);
            trace.threshold.push(thr);
            if let StopDecision::Stop { rejected } =
                self.rule.step_with(&stats, params, &mut scratch)
            {
                trace.result = TrialResult {
                    stopping_time: stats.n(),
                    rejected,
                    truncated: false,
                };
                break;
            }
        }
        trace
    }

    fn monitored(&self, stats: &SufficientStats) -> (f64, f64) {
        match &self.rule {
            Rule::Gap(cfg) => (stats.gap_statistic(cfg.m).unwrap_or(0.0), cfg.threshold),
            Rule::MaxGap(cfg) => {
                let best = cfg
                    .eligible_ranks()
                    .map(|r| stats.gap_statistic(r).unwrap_or(0.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                (best, cfg.threshold(stats.n()))
            }
            Rule::GapIntersection(_) => (0.0, 0.0),
        }
    }

    pub fn run_trials(&self, execution: Execution) -> Vec<TrialResult> {
        let n = self.spec.replications;
        match execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(|i| self.run_trial(i)).collect()
            }
            _ => (0..n).map(|i| self.run_trial(i)).collect(),
        }
    }

    pub fn summarize(&self, trials: &[TrialResult]) -> Result<ExperimentSummary> {
        let params = &self.spec.params;
        let contribs: Vec<_> = trials.iter().map(|t| t.contribs(params)).collect();
        let metrics = aggregate(&contribs)?;
        let n = trials.len() as f64;
        let mean_t = trials.iter().map(|t| t.stopping_time as f64).sum::<f64>() / n;
        let se_t = if trials.len() < 2 {
            0.0
        } else {
            let ss: f64 = trials
                .iter()
                .map(|t| (t.stopping_time as f64 - mean_t).powi(2))
                .sum();
            (ss / (n - 1.0) / n).sqrt()
        };
        let asymptote = theoretical_asymptote(&self.spec);
        Ok(ExperimentSummary {
            metrics,
            mean_t,
            se_t,
            asymptote,
            ratio: mean_t / asymptote,
            truncation_count: trials.iter().filter(|t| t.truncated).count() as u64,
            replications: trials.len() as u64,
            horizon_cap: self.horizon,
            generator_id: GENERATOR_ID,
            master_seed: self.spec.master_seed,
        })
    }

    pub fn run(&self, execution: Execution) -> Result<(ExperimentSummary, Vec<TrialResult>)> {
        let trials = self.run_trials(execution);
        Ok((self.summarize(&trials)?, trials))
    }
}

pub fn run_trial(spec: &ExperimentSpec, trial_index: u64) -> Result<TrialResult> {
    Ok(Experiment::new(spec.clone())?.run_trial(trial_index))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    Ok(run_experiment_with_trials(spec, Execution::Parallel)?.0)
}

pub fn run_experiment_with_trials(
    spec: &ExperimentSpec,
    execution: Execution,
) -> Result<(ExperimentSummary, Vec<TrialResult>)> {
    Experiment::new(spec.clone())?.run(execution)
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub summary: ExperimentSummary,
}

/// Runs the template at `alpha = beta = a` for each grid value, reusing the
/// template's master seed at every point. The grid must be nonempty and
/// strictly decreasing.
pub fn ratio_sweep(template: &ExperimentSpec, alpha_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if alpha_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if alpha_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::UnsortedGrid);
    }
    alpha_grid
        .iter()
        .map(|&a| {
            let spec = ExperimentSpec {
                alpha: a,
                beta: a,
                ..template.clone()
            };
            let summary = run_experiment(&spec)?;
            Ok(SweepRow {
                alpha: a,
                beta: a,
                rho: spec.params.rho(),
                summary,
            })
        })
        .collect()
}

/// Runs the template at each correlation with a common master seed.
pub fn rho_sweep(template: &ExperimentSpec, rhos: &[f64]) -> Result<Vec<SweepRow>> {
    if rhos.is_empty() {
        return Err(Error::EmptyGrid);
    }
    rhos.iter()
        .map(|&rho| {
            let spec = ExperimentSpec {
                params: template.params.with_rho(rho)?,
                ..template.clone()
            };
            let summary = run_experiment(&spec)?;
            Ok(SweepRow {
                alpha: spec.alpha,
                beta: spec.beta,
                rho,
                summary,
            })
        })
        .collect()
}

/// Gap rule measured against the one-sided SPRT for the pairwise problem
/// `N(-mu, 2(1-rho))` vs `N(mu, 2(1-rho))` at level `(alpha ^ beta) / (m (K - m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SprtBenchmark {
    pub sprt: SprtConfig,
    /// Asymptotic ASN of the pairwise SPRT at the union-bound level.
    pub sprt_asn: f64,
    /// Same SPRT at level `alpha ^ beta`; the leading-order term.
    pub leading_order_asn: f64,
    pub gap_asymptote: f64,
    pub mean_t: f64,
    pub se_t: f64,
    /// `mean_t / sprt_asn`.
    pub ratio: f64,
}

pub fn pairwise_sprt(spec: &ExperimentSpec, level: f64) -> Result<SprtConfig> {
    let p = &spec.params;
    SprtConfig::new(-p.mu(), p.mu(), 2.0 * (1.0 - p.rho()), level, 0.0)
}

pub fn sprt_benchmark(spec: &ExperimentSpec) -> Result<SprtBenchmark> {
    let summary = run_experiment(spec)?;
    sprt_benchmark_from(spec, &summary)
}

/// Benchmark record from an already-run gap experiment.
pub fn sprt_benchmark_from(
    spec: &ExperimentSpec,
    summary: &ExperimentSummary,
) -> Result<SprtBenchmark> {
    let RuleKind::Gap { m } = spec.rule else {
        return Err(Error::InvalidExperiment(
            "the SPRT benchmark applies to the gap rule".into(),
        ));
    };
    let k = spec.params.k();
    let level = spec.alpha.min(spec.beta);
    let sprt = pairwise_sprt(spec, level / (m * (k - m)) as f64)?;
    let sprt_asn = asn_asymptotic(&sprt)?;
    let leading_order_asn = asn_asymptotic(&pairwise_sprt(spec, level)?)?;
    Ok(SprtBenchmark {
        sprt,
        sprt_asn,
        leading_order_asn,
        gap_asymptote: theoretical_asymptote(spec),
        mean_t: summary.mean_t,
        se_t: summary.se_t,
        ratio: summary.mean_t / sprt_asn,
    })
}
