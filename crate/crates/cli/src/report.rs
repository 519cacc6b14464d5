//! Report rows, per-trial dumps and their CSV and JSON encodings.
//!
//! Every file starts with its provenance: CSV files carry `#` comment lines
//! with the tool version, generator id, master seed and the resolved config;
//! JSON files carry the same fields at the top level.

use std::io::Write;

use seqmt::montecarlo::TrialResult;
use seqmt::{ExperimentSpec, ExperimentSummary, RuleKind, GENERATOR_ID};
use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::Result;

pub const TOOL_NAME: &str = "seqmt";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One summary row; the field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment_id: String,
    pub rule: String,
    pub variant: Option<String>,
    #[serde(rename = "K")]
    pub k: usize,
    /// Number of signal streams.
    pub m: usize,
    pub l: Option<usize>,
    pub u: Option<usize>,
    pub rho: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c1_adjust: f64,
    pub replications: u64,
    pub horizon_cap: u64,
    pub master_seed: u64,
    pub generator_id: String,
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "se_T")]
    pub se_t: f64,
    pub asymptote: f64,
    pub ratio: f64,
    pub pics_hat: f64,
    pub fwer1_hat: f64,
    pub fwer2_hat: f64,
    pub fdr_hat: f64,
    pub fnr_hat: f64,
    pub pfdr_hat: Option<f64>,
    pub pfnr_hat: Option<f64>,
    pub pfdr_defined: bool,
    pub truncation_count: u64,
    pub reliable: bool,
}

pub const REPORT_COLUMNS: [&str; 30] = [
    "experiment_id",
    "rule",
    "variant",
    "K",
    "m",
    "l",
    "u",
    "rho",
    "mu",
    "alpha",
    "beta",
    "c1_adjust",
    "replications",
    "horizon_cap",
    "master_seed",
    "generator_id",
    "mean_T",
    "se_T",
    "asymptote",
    "ratio",
    "pics_hat",
    "fwer1_hat",
    "fwer2_hat",
    "fdr_hat",
    "fnr_hat",
    "pfdr_hat",
    "pfnr_hat",
    "pfdr_defined",
    "truncation_count",
    "reliable",
];

impl ReportRow {
    pub fn new(experiment_id: &str, spec: &ExperimentSpec, s: &ExperimentSummary) -> Self {
        let p = &spec.params;
        let (variant, l, u) = match spec.rule {
            RuleKind::Gap { .. } => (None, None, None),
            RuleKind::MaxGap { l, u, variant } => {
                (Some(variant.as_str().to_string()), Some(l), Some(u))
            }
            RuleKind::GapIntersection { l, u } => (None, Some(l), Some(u)),
        };
        let m = &s.metrics;
        Self {
            experiment_id: experiment_id.to_string(),
            rule: spec.rule.name().to_string(),
            variant,
            k: p.k(),
            m: p.num_signals(),
            l,
            u,
            rho: p.rho(),
            mu: p.mu(),
            alpha: spec.alpha,
            beta: spec.beta,
            c1_adjust: spec.c1_adjust,
            replications: s.replications,
            horizon_cap: s.horizon_cap,
            master_seed: s.master_seed,
            generator_id: s.generator_id.to_string(),
            mean_t: s.mean_t,
            se_t: s.se_t,
            asymptote: s.asymptote,
            ratio: s.ratio,
            pics_hat: m.pics.value,
            fwer1_hat: m.fwer1.value,
            fwer2_hat: m.fwer2.value,
            fdr_hat: m.fdr.value,
            fnr_hat: m.fnr.value,
            pfdr_hat: m.pfdr.value,
            pfnr_hat: m.pfnr.value,
            pfdr_defined: m.pfdr.is_defined(),
            truncation_count: s.truncation_count,
            reliable: s.reliable(),
        }
    }
}

/// One line of the per-trial dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial_index: u64,
    pub stopping_time: u64,
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "W")]
    pub w: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub truncated: u8,
}

pub fn trial_rows(spec: &ExperimentSpec, trials: &[TrialResult]) -> Vec<TrialRow> {
    trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let c = t.counts(&spec.params);
            TrialRow {
                trial_index: i as u64,
                stopping_time: t.stopping_time,
                v: c.v,
                w: c.w,
                r: c.r,
                truncated: u8::from(t.truncated),
            }
        })
        .collect()
}

/// Provenance written at the head of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub generator_id: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(rc: &RunConfig) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            generator_id: GENERATOR_ID.to_string(),
            master_seed: rc.spec.master_seed,
            config: serde_json::to_value(rc.to_file())?,
        })
    }

    fn write_comments<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# tool: {} {}", self.tool, self.version)?;
        writeln!(out, "# generator_id: {}", self.generator_id)?;
        writeln!(out, "# master_seed: {}", self.master_seed)?;
        writeln!(out, "# config: {}", self.config)
    }
}

#[derive(Serialize)]
struct JsonDocument<'a, T> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    rows: &'a [T],
}

/// Writes `rows` in the requested format with the provenance header.
pub fn write_rows<W: Write, T: Serialize>(
    out: &mut W,
    format: Format,
    provenance: &Provenance,
    rows: &[T],
) -> Result<()> {
    match format {
        Format::Csv => {
            provenance
                .write_comments(out)
                .map_err(|e| crate::error::CliError::io("cannot write report", e))?;
            let mut w = csv::Writer::from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()
                .map_err(|e| crate::error::CliError::io("cannot write report", e))?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &JsonDocument { provenance, rows })?;
            writeln!(out).map_err(|e| crate::error::CliError::io("cannot write report", e))?;
        }
    }
    Ok(())
}

/// [`write_rows`] into a string.
pub fn write_rows_to_string<T: Serialize>(
    format: Format,
    provenance: &Provenance,
    rows: &[T],
) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, format, provenance, rows)?;
    Ok(String::from_utf8(buf).expect("reports are UTF-8"))
}

/// Parses rows back from a CSV report, skipping the comment header.
pub fn read_csv_rows<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?)
}

/// Parses rows back from a JSON report.
pub fn read_json_rows<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    #[derive(Deserialize)]
    struct Doc<T> {
        rows: Vec<T>,
    }
    Ok(serde_json::from_str::<Doc<T>>(text)?.rows)
}
