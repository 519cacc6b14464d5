//! Experiment configuration files.
//!
//! A config is a JSON document with `model`, `rule`, `targets`, `mc`,
//! `output` and an optional `sweep` section. Stream indices in
//! `signal_set` are one-based. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "model": { "K": 4, "rho": 0.5, "mu": 1.0, "signal_set": [1, 2] },
//!   "rule": { "kind": "gap", "m": 2, "target_metric": "fwer" },
//!   "targets": { "alpha": 0.01, "beta": 0.01 },
//!   "mc": { "replications": 20000, "master_seed": 42 },
//!   "output": { "path": "gap.csv", "format": "csv" }
//! }
//! ```

use std::path::{Path, PathBuf};

use seqmt::{ExperimentSpec, MaxGapVariant, ModelParams, RuleKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment_id: Option<String>,
    pub model: ModelSection,
    pub rule: RuleSection,
    pub targets: TargetsSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "K")]
    pub k: usize,
    pub rho: f64,
    pub mu: f64,
    /// One-based indices of the signal streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_set: Option<Vec<usize>>,
    /// Number of leading signal streams when `signal_set` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_signals: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Gap,
    Maxgap,
    Gi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    PaperLiteral,
    DerivationConsistent,
}

impl From<VariantName> for MaxGapVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::PaperLiteral => MaxGapVariant::PaperLiteral,
            VariantName::DerivationConsistent => MaxGapVariant::DerivationConsistent,
        }
    }
}

impl From<MaxGapVariant> for VariantName {
    fn from(v: MaxGapVariant) -> Self {
        match v {
            MaxGapVariant::PaperLiteral => VariantName::PaperLiteral,
            MaxGapVariant::DerivationConsistent => VariantName::DerivationConsistent,
        }
    }
}

/// Error metric the targets refer to; selects the level divisor `C1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMetric {
    #[default]
    Fwer,
    Fdr,
    Fnr,
    Pfdr,
    Pfnr,
    Pfer,
}

impl TargetMetric {
    /// FWER, FDR, FNR and their positive variants are bounded by the FWERs,
    /// so `C1 = 1`; the per-family error rate needs `C1 = K`.
    pub fn c1_adjust(self, k: usize) -> f64 {
        match self {
            TargetMetric::Pfer => k as f64,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSection {
    pub kind: RuleName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantName>,
    /// Explicit level divisor; overrides the one implied by `target_metric`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_adjust: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_metric: Option<TargetMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_dependent_gi: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsSection {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_cap: Option<u64>,
}

fn default_replications() -> u64 {
    10_000
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            master_seed: 0,
            horizon_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Exactly one of the two grids must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// `alpha = beta` grid, strictly decreasing.
    Alpha(Vec<f64>),
    Rho(Vec<f64>),
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment_id: String,
    pub spec: ExperimentSpec,
    pub target_metric: TargetMetric,
    pub output: OutputSection,
    pub sweep: Option<Sweep>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn reject_field<T>(field: &Option<T>, name: &str, kind: &str) -> Result<()> {
    if field.is_some() {
        return Err(config_err(format!(
            "rule.{name} does not apply to rule kind {kind}"
        )));
    }
    Ok(())
}

fn require<T: Copy>(field: Option<T>, name: &str, kind: &str) -> Result<T> {
    field.ok_or_else(|| config_err(format!("rule kind {kind} needs rule.{name}")))
}

impl ConfigFile {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigParse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies defaults and validates. `default_id` is used when the file has
    /// no `experiment_id`.
    pub fn resolve(&self, default_id: &str) -> Result<RunConfig> {
        let rule_sec = &self.rule;
        let kind = match rule_sec.kind {
            RuleName::Gap => {
                reject_field(&rule_sec.l, "l", "gap")?;
                reject_field(&rule_sec.u, "u", "gap")?;
                reject_field(&rule_sec.variant, "variant", "gap")?;
                reject_field(&rule_sec.allow_dependent_gi, "allow_dependent_gi", "gap")?;
                RuleKind::Gap {
                    m: require(rule_sec.m, "m", "gap")?,
                }
            }
            RuleName::Maxgap => {
                reject_field(&rule_sec.m, "m", "maxgap")?;
                reject_field(&rule_sec.allow_dependent_gi, "allow_dependent_gi", "maxgap")?;
                RuleKind::MaxGap {
                    l: require(rule_sec.l, "l", "maxgap")?,
                    u: require(rule_sec.u, "u", "maxgap")?,
                    variant: rule_sec.variant.map(Into::into).unwrap_or_default(),
                }
            }
            RuleName::Gi => {
                reject_field(&rule_sec.m, "m", "gi")?;
                reject_field(&rule_sec.variant, "variant", "gi")?;
                RuleKind::GapIntersection {
                    l: require(rule_sec.l, "l", "gi")?,
                    u: require(rule_sec.u, "u", "gi")?,
                }
            }
        };

        let model = &self.model;
        let params = match (&model.signal_set, model.num_signals) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "give either model.signal_set or model.num_signals, not both",
                ));
            }
            (Some(set), None) => {
                let mut zero_based = Vec::with_capacity(set.len());
                for &i in set {
                    if i == 0 || i > model.k {
                        return Err(config_err(format!(
                            "model.signal_set entry {i} is outside 1..={}",
                            model.k
                        )));
                    }
                    zero_based.push(i - 1);
                }
                ModelParams::new(model.k, model.rho, model.mu, zero_based)?
            }
            (None, count) => {
                let m = count.unwrap_or(match kind {
                    RuleKind::Gap { m } => m,
                    RuleKind::MaxGap { l, .. } | RuleKind::GapIntersection { l, .. } => l + 1,
                });
                ModelParams::with_leading_signals(model.k, model.rho, model.mu, m)?
            }
        };

        let target_metric = rule_sec.target_metric.unwrap_or_default();
        let mut spec = ExperimentSpec::new(params, kind, self.targets.alpha, self.targets.beta);
        spec.c1_adjust = rule_sec
            .c1_adjust
            .unwrap_or_else(|| target_metric.c1_adjust(model.k));
        spec.allow_dependent_gi = rule_sec.allow_dependent_gi.unwrap_or(false);
        spec.replications = self.mc.replications;
        spec.master_seed = self.mc.master_seed;
        spec.horizon_cap = self.mc.horizon_cap;
        spec.validate()?;
        spec.calibrate()?;

        let sweep = match &self.sweep {
            None => None,
            Some(SweepSection {
                alpha: Some(a),
                rho: None,
            }) => Some(Sweep::Alpha(a.clone())),
            Some(SweepSection {
                alpha: None,
                rho: Some(r),
            }) => Some(Sweep::Rho(r.clone())),
            Some(_) => return Err(config_err("sweep needs exactly one of alpha or rho")),
        };

        Ok(RunConfig {
            experiment_id: self
                .experiment_id
                .clone()
                .unwrap_or_else(|| default_id.to_string()),
            spec,
            target_metric,
            output: self.output.clone().unwrap_or_default(),
            sweep,
        })
    }
}

impl RunConfig {
    /// The fully explicit config file that resolves back to `self`.
    pub fn to_file(&self) -> ConfigFile {
        let spec = &self.spec;
        let p = &spec.params;
        let mut rule = RuleSection {
            kind: RuleName::Gap,
            m: None,
            l: None,
            u: None,
            variant: None,
            c1_adjust: Some(spec.c1_adjust),
            target_metric: Some(self.target_metric),
            allow_dependent_gi: None,
        };
        match spec.rule {
            RuleKind::Gap { m } => rule.m = Some(m),
            RuleKind::MaxGap { l, u, variant } => {
                rule.kind = RuleName::Maxgap;
                rule.l = Some(l);
                rule.u = Some(u);
                rule.variant = Some(variant.into());
            }
            RuleKind::GapIntersection { l, u } => {
                rule.kind = RuleName::Gi;
                rule.l = Some(l);
                rule.u = Some(u);
                rule.allow_dependent_gi = Some(spec.allow_dependent_gi);
            }
        }
        ConfigFile {
            experiment_id: Some(self.experiment_id.clone()),
            model: ModelSection {
                k: p.k(),
                rho: p.rho(),
                mu: p.mu(),
                signal_set: Some(p.signal_set().iter().map(|i| i + 1).collect()),
                num_signals: None,
            },
            rule,
            targets: TargetsSection {
                alpha: spec.alpha,
                beta: spec.beta,
            },
            mc: McSection {
                replications: spec.replications,
                master_seed: spec.master_seed,
                horizon_cap: spec.horizon_cap,
            },
            output: (self.output != OutputSection::default()).then(|| self.output.clone()),
            sweep: self.sweep.as_ref().map(|s| match s {
                Sweep::Alpha(a) => SweepSection {
                    alpha: Some(a.clone()),
                    rho: None,
                },
                Sweep::Rho(r) => SweepSection {
                    alpha: None,
                    rho: Some(r.clone()),
                },
            }),
        }
    }

    /// Applies command-line overrides and revalidates.
    pub fn override_mc(
        &mut self,
        seed: Option<u64>,
        reps: Option<u64>,
        horizon: Option<u64>,
    ) -> Result<()> {
        if let Some(s) = seed {
            self.spec.master_seed = s;
        }
        if let Some(r) = reps {
            self.spec.replications = r;
        }
        if let Some(h) = horizon {
            self.spec.horizon_cap = Some(h);
        }
        self.spec.validate()?;
        Ok(())
    }
}

/// Reads, parses and resolves a config file. The experiment id defaults to
/// the file stem.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}", path.display()), e))?;
    let file = ConfigFile::from_json(&text, path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".to_string());
    file.resolve(&stem)
}
