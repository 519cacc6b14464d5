//! The four subcommands as library functions.

use std::fmt::Write as _;

use seqmt::montecarlo::{ratio_sweep, rho_sweep, run_experiment_with_trials, Execution};
use seqmt::rules::calibrate_maxgap;
use seqmt::sprt::{asn_asymptotic, asn_wald, boundaries, Hypothesis, SprtConfig};
use seqmt::{MaxGapVariant, Rule};
use serde::Serialize;

use crate::config::{RunConfig, Sweep};
use crate::error::{CliError, Result};
use crate::report::{trial_rows, ReportRow, TrialRow};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub experiment_id: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c1_adjust: f64,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum Thresholds {
    Gap {
        m: usize,
        c: f64,
        #[serde(rename = "G")]
        g: f64,
        pics_bound: f64,
    },
    /// `e(n) = base + slope * n` for both variants.
    Maxgap {
        l: usize,
        u: usize,
        inner: f64,
        configured: String,
        variants: Vec<MaxGapLine>,
    },
    Gi {
        l: usize,
        u: usize,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxGapLine {
    pub variant: String,
    pub base: f64,
    pub slope: f64,
}

pub fn cmd_calibrate(rc: &RunConfig) -> Result<CalibrationReport> {
    let spec = &rc.spec;
    let p = &spec.params;
    let thresholds = match spec.calibrate()? {
        Rule::Gap(cfg) => Thresholds::Gap {
            m: cfg.m,
            c: cfg.c,
            g: cfg.threshold,
            pics_bound: cfg.pics_bound(),
        },
        Rule::MaxGap(cfg) => {
            let variants = [
                MaxGapVariant::PaperLiteral,
                MaxGapVariant::DerivationConsistent,
            ]
            .into_iter()
            .map(|v| {
                let c = calibrate_maxgap(
                    cfg.l,
                    cfg.u,
                    cfg.k,
                    cfg.alpha,
                    cfg.beta,
                    p.rho(),
                    p.mu(),
                    cfg.c1_adjust,
                    v,
                )?;
                Ok(MaxGapLine {
                    variant: v.as_str().to_string(),
                    base: c.base,
                    slope: c.slope,
                })
            })
            .collect::<Result<Vec<_>>>()?;
            Thresholds::Maxgap {
                l: cfg.l,
                u: cfg.u,
                inner: cfg.inner,
                configured: cfg.variant.as_str().to_string(),
                variants,
            }
        }
        Rule::GapIntersection(cfg) => Thresholds::Gi {
            l: cfg.l,
            u: cfg.u,
            a: cfg.a,
            b: cfg.b,
            c: cfg.c,
            d: cfg.d,
        },
    };
    Ok(CalibrationReport {
        experiment_id: rc.experiment_id.clone(),
        k: p.k(),
        alpha: spec.alpha,
        beta: spec.beta,
        c1_adjust: spec.c1_adjust,
        thresholds,
    })
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment_id: {}", self.experiment_id);
        let _ = writeln!(
            s,
            "K = {}, alpha = {}, beta = {}, c1_adjust = {}",
            self.k, self.alpha, self.beta, self.c1_adjust
        );
        match &self.thresholds {
            Thresholds::Gap {
                m,
                c,
                g,
                pics_bound,
            } => {
                let _ = writeln!(s, "rule: gap (m = {m})");
                let _ = writeln!(s, "c = {c:.6}");
                let _ = writeln!(s, "G = {g:.6}");
                let _ = writeln!(s, "pics_bound = {pics_bound:.6e}");
            }
            Thresholds::Maxgap {
                l,
                u,
                inner,
                configured,
                variants,
            } => {
                let _ = writeln!(s, "rule: maxgap (l = {l}, u = {u})");
                let _ = writeln!(s, "inner = {inner:.6}");
                for v in variants {
                    let mark = if &v.variant == configured {
                        " (configured)"
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        s,
                        "{}: e(n) = {:.6} + {:.6} n{mark}",
                        v.variant, v.base, v.slope
                    );
                }
            }
            Thresholds::Gi { l, u, a, b, c, d } => {
                let _ = writeln!(s, "rule: gi (l = {l}, u = {u})");
                let _ = writeln!(s, "a = {a:.6}");
                let _ = writeln!(s, "b = {b:.6}");
                let _ = writeln!(s, "c = {c:.6}");
                let _ = writeln!(s, "d = {d:.6}");
            }
        }
        s
    }
}

/// Summary row and per-trial rows of one experiment.
pub fn cmd_simulate(rc: &RunConfig) -> Result<(ReportRow, Vec<TrialRow>)> {
    let (summary, trials) = run_experiment_with_trials(&rc.spec, Execution::Parallel)?;
    Ok((
        ReportRow::new(&rc.experiment_id, &rc.spec, &summary),
        trial_rows(&rc.spec, &trials),
    ))
}

/// One row per grid point, with ids `<experiment_id>/<index>`.
pub fn cmd_sweep(rc: &RunConfig) -> Result<Vec<ReportRow>> {
    let rows = match &rc.sweep {
        Some(Sweep::Alpha(grid)) => ratio_sweep(&rc.spec, grid)?,
        Some(Sweep::Rho(grid)) => rho_sweep(&rc.spec, grid)?,
        None => return Err(CliError::Config("config has no sweep section".into())),
    };
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut spec = rc.spec.clone();
            spec.alpha = row.alpha;
            spec.beta = row.beta;
            spec.params = spec
                .params
                .with_rho(row.rho)
                .expect("sweep point already validated");
            ReportRow::new(&format!("{}/{i}", rc.experiment_id), &spec, &row.summary)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SprtAsnReport {
    pub theta0: f64,
    pub theta1: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Upper boundary of the log-likelihood ratio.
    pub a: f64,
    /// Lower boundary; absent for the one-sided test.
    pub b: Option<f64>,
    /// Wald approximation under `H0`; absent for the one-sided test.
    pub wald_asn_h0: Option<f64>,
    pub wald_asn_h1: f64,
    pub asymptotic_asn: f64,
}

pub fn cmd_sprt_asn(
    theta0: f64,
    theta1: f64,
    sigma2: f64,
    gamma: f64,
    delta: f64,
) -> Result<SprtAsnReport> {
    let cfg = SprtConfig::new(theta0, theta1, sigma2, gamma, delta)?;
    let bounds = boundaries(&cfg)?;
    Ok(SprtAsnReport {
        theta0,
        theta1,
        sigma2,
        gamma,
        delta,
        a: bounds.a,
        b: bounds.b.is_finite().then_some(bounds.b),
        wald_asn_h0: if cfg.is_one_sided() {
            None
        } else {
            Some(asn_wald(&cfg, Hypothesis::H0)?)
        },
        wald_asn_h1: asn_wald(&cfg, Hypothesis::H1)?,
        asymptotic_asn: asn_asymptotic(&cfg)?,
    })
}

impl SprtAsnReport {
    pub fn to_text(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "N/A".to_string(), |v| format!("{v:.6}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "SPRT theta0 = {}, theta1 = {}, sigma2 = {}, gamma = {}, delta = {}",
            self.theta0, self.theta1, self.sigma2, self.gamma, self.delta
        );
        let _ = writeln!(s, "a = {:.6}", self.a);
        let _ = writeln!(
            s,
            "b = {}",
            self.b
                .map_or_else(|| "-inf".to_string(), |v| format!("{v:.6}"))
        );
        let _ = writeln!(s, "wald_asn_h0 = {}", opt(self.wald_asn_h0));
        let _ = writeln!(s, "wald_asn_h1 = {:.6}", self.wald_asn_h1);
        let _ = writeln!(s, "asymptotic_asn = {:.6}", self.asymptotic_asn);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigFile;
    use std::path::Path;

    fn rc(text: &str) -> RunConfig {
        ConfigFile::from_json(text, Path::new("t.json"))
            .unwrap()
            .resolve("t")
            .unwrap()
    }

    #[test]
    fn calibrate_gap_report() {
        let r = cmd_calibrate(&rc(r#"{
            "model": { "K": 4, "rho": 0.5, "mu": 1.0 },
            "rule": { "kind": "gap", "m": 2 },
            "targets": { "alpha": 0.01, "beta": 0.01 }
        }"#))
        .unwrap();
        let text = r.to_text();
        assert!(text.contains("c = 5.991465"), "{text}");
        assert!(text.contains("G = 2.995732"), "{text}");
    }

    #[test]
    fn calibrate_maxgap_reports_both_variants() {
        let r = cmd_calibrate(&rc(r#"{
            "model": { "K": 5, "rho": 0.5, "mu": 1.0 },
            "rule": { "kind": "maxgap", "l": 1, "u": 3 },
            "targets": { "alpha": 0.01, "beta": 0.01 }
        }"#))
        .unwrap();
        let Thresholds::Maxgap {
            variants,
            configured,
            inner,
            ..
        } = &r.thresholds
        else {
            panic!("expected max-gap thresholds")
        };
        assert_eq!(configured, "derivation_consistent");
        assert!((inner - 7.783224).abs() < 1e-6);
        let lit = &variants[0];
        let dc = &variants[1];
        assert!((lit.base + 10.0 * lit.slope - 8.891612).abs() < 1e-6);
        assert_eq!(lit.slope, 0.5);
        assert!((dc.base + 10.0 * dc.slope - 12.574638).abs() < 1e-6);
        assert!(r
            .to_text()
            .contains("paper_literal: e(n) = 3.891612 + 0.500000 n"));
    }

    #[test]
    fn calibrate_gi_report() {
        let r = cmd_calibrate(&rc(r#"{
            "model": { "K": 5, "rho": 0.0, "mu": 1.0 },
            "rule": { "kind": "gi", "l": 1, "u": 3 },
            "targets": { "alpha": 0.01, "beta": 0.01 }
        }"#))
        .unwrap();
        let Thresholds::Gi { a, b, c, d, .. } = r.thresholds else {
            panic!("expected gap-intersection thresholds")
        };
        for (got, want) in [(a, 6.214608), (b, 6.214608), (c, 7.600902), (d, 7.313221)] {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn sprt_asn_examples() {
        let r = cmd_sprt_asn(0.0, 1.0, 1.0, 0.01, 0.01).unwrap();
        assert!((r.wald_asn_h0.unwrap() - 9.006435).abs() < 1e-6);
        assert!((r.wald_asn_h1 - 9.006435).abs() < 1e-6);
        assert!((r.asymptotic_asn - 9.210340).abs() < 1e-6);

        let one = cmd_sprt_asn(0.0, 1.0, 1.0, 0.001, 0.0).unwrap();
        assert_eq!(one.wald_asn_h0, None);
        assert_eq!(one.b, None);
        assert!((one.asymptotic_asn - 13.815511).abs() < 1e-6);
        assert!(one.to_text().contains("wald_asn_h0 = N/A"));

        let scaled = cmd_sprt_asn(0.0, 2.0, 4.0, 0.01, 0.01).unwrap();
        assert_eq!(
            (
                scaled.wald_asn_h0,
                scaled.wald_asn_h1,
                scaled.asymptotic_asn
            ),
            (r.wald_asn_h0, r.wald_asn_h1, r.asymptotic_asn)
        );
        assert!(cmd_sprt_asn(0.0, 1.0, 1.0, 0.6, 0.5).is_err());
    }

    #[test]
    fn sweep_without_grid_is_a_config_error() {
        let err = cmd_sweep(&rc(r#"{
            "model": { "K": 4, "rho": 0.5, "mu": 1.0 },
            "rule": { "kind": "gap", "m": 2 },
            "targets": { "alpha": 0.01, "beta": 0.01 }
        }"#))
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let err = cmd_sweep(&rc(r#"{
            "model": { "K": 4, "rho": 0.5, "mu": 1.0 },
            "rule": { "kind": "gap", "m": 2 },
            "targets": { "alpha": 0.01, "beta": 0.01 },
            "sweep": { "alpha": [] }
        }"#))
        .unwrap_err();
        assert!(err.to_string().contains("grid must be nonempty"));
    }
}
