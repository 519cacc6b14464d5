//! Browser bindings for the `seqmt` rules.
//!
//! Each export takes a JSON request and returns a JSON response, so the page
//! needs no generated type bindings. Stream indices in requests and
//! responses are one-based.

use seqmt::montecarlo::{ratio_sweep, rho_sweep, Experiment};
use seqmt::{ExperimentSpec, MaxGapVariant, ModelParams, Rule, RuleKind};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoRequest {
    pub rule: String,
    #[serde(rename = "K")]
    pub k: usize,
    /// Number of leading signal streams.
    pub signals: usize,
    pub rho: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub u: Option<usize>,
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trial: u64,
    #[serde(default = "default_reps")]
    pub reps: u64,
    /// `"rho"` or `"alpha"` for [`mean_t_curve`].
    #[serde(default)]
    pub sweep: Option<String>,
    #[serde(default)]
    pub grid: Vec<f64>,
}

fn default_reps() -> u64 {
    1000
}

fn need(v: Option<usize>, name: &str) -> Result<usize, String> {
    v.ok_or_else(|| format!("missing {name}"))
}

impl DemoRequest {
    fn spec(&self) -> Result<ExperimentSpec, String> {
        let rule = match self.rule.as_str() {
            "gap" => RuleKind::Gap {
                m: need(self.m, "m")?,
            },
            "maxgap" => RuleKind::MaxGap {
                l: need(self.l, "l")?,
                u: need(self.u, "u")?,
                variant: match &self.variant {
                    Some(v) => v.parse().map_err(|e: seqmt::Error| e.to_string())?,
                    None => MaxGapVariant::default(),
                },
            },
            "gi" => RuleKind::GapIntersection {
                l: need(self.l, "l")?,
                u: need(self.u, "u")?,
            },
            other => return Err(format!("unknown rule {other:?}")),
        };
        let params = ModelParams::with_leading_signals(self.k, self.rho, self.mu, self.signals)
            .map_err(|e| e.to_string())?;
        let mut spec = ExperimentSpec::new(params, rule, self.alpha, self.beta);
        spec.master_seed = self.seed;
        spec.replications = self.reps;
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[derive(Debug, Serialize)]
struct Calibration {
    rule: &'static str,
    /// Name and value of each threshold quantity.
    values: Vec<(String, f64)>,
    asymptote: f64,
}

#[derive(Debug, Serialize)]
struct Path {
    sums: Vec<Vec<f64>>,
    statistic: Vec<f64>,
    threshold: Vec<f64>,
    stopping_time: u64,
    rejected: Vec<usize>,
    signals: Vec<usize>,
    truncated: bool,
}

#[derive(Debug, Serialize)]
struct CurvePoint {
    x: f64,
    mean_t: f64,
    se_t: f64,
    asymptote: f64,
    pics: f64,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn parse(request: &str) -> Result<DemoRequest, String> {
    serde_json::from_str(request).map_err(|e| e.to_string())
}

/// Calibrated thresholds and first-order expected sample size.
pub fn calibrate_json(request: &str) -> Result<String, String> {
    let spec = parse(request)?.spec()?;
    let rule = spec.calibrate().map_err(|e| e.to_string())?;
    let values = match &rule {
        Rule::Gap(c) => vec![
            ("c".into(), c.c),
            ("G".into(), c.threshold),
            ("pics_bound".into(), c.pics_bound()),
        ],
        Rule::MaxGap(c) => vec![
            ("inner".into(), c.inner),
            ("base".into(), c.base),
            ("slope".into(), c.slope),
        ],
        Rule::GapIntersection(c) => vec![
            ("a".into(), c.a),
            ("b".into(), c.b),
            ("c".into(), c.c),
            ("d".into(), c.d),
        ],
    };
    to_json(&Calibration {
        rule: spec.rule.name(),
        values,
        asymptote: seqmt::montecarlo::theoretical_asymptote(&spec),
    })
}

/// One simulated trial with the cumulative sums, the monitored statistic
/// and the threshold at every step.
pub fn simulate_path_json(request: &str) -> Result<String, String> {
    let req = parse(request)?;
    let spec = req.spec()?;
    let signals = spec.params.signal_set().iter().map(|i| i + 1).collect();
    let exp = Experiment::new(spec).map_err(|e| e.to_string())?;
    let trace = exp.trace_trial(req.trial);
    to_json(&Path {
        sums: trace.sums,
        statistic: trace.statistic,
        threshold: trace.threshold,
        stopping_time: trace.result.stopping_time,
        rejected: trace.result.rejected.iter().map(|i| i + 1).collect(),
        signals,
        truncated: trace.result.truncated,
    })
}

/// Mean stopping time against the asymptote across a `rho` or `alpha = beta` grid.
pub fn mean_t_curve_json(request: &str) -> Result<String, String> {
    let req = parse(request)?;
    let spec = req.spec()?;
    let (rows, by_rho) = match req.sweep.as_deref() {
        Some("rho") => (rho_sweep(&spec, &req.grid), true),
        Some("alpha") => (ratio_sweep(&spec, &req.grid), false),
        other => return Err(format!("sweep must be \"rho\" or \"alpha\", got {other:?}")),
    };
    let points: Vec<CurvePoint> = rows
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| CurvePoint {
            x: if by_rho { r.rho } else { r.alpha },
            mean_t: r.summary.mean_t,
            se_t: r.summary.se_t,
            asymptote: r.summary.asymptote,
            pics: r.summary.metrics.pics.value,
        })
        .collect();
    to_json(&points)
}

#[wasm_bindgen]
pub fn calibrate(request: &str) -> Result<String, JsValue> {
    calibrate_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate_path(request: &str) -> Result<String, JsValue> {
    simulate_path_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn mean_t_curve(request: &str) -> Result<String, JsValue> {
    mean_t_curve_json(request).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAP: &str =
        r#"{"rule":"gap","K":4,"signals":2,"m":2,"rho":0.5,"mu":1.0,"alpha":0.01,"beta":0.01}"#;

    #[test]
    fn calibrate_gap() {
        let v: serde_json::Value = serde_json::from_str(&calibrate_json(GAP).unwrap()).unwrap();
        assert_eq!(v["rule"], "gap");
        assert!((v["values"][0][1].as_f64().unwrap() - 5.991465).abs() < 1e-6);
        assert!((v["values"][1][1].as_f64().unwrap() - 2.995732).abs() < 1e-6);
    }

    #[test]
    fn path_ends_at_first_crossing() {
        let v: serde_json::Value = serde_json::from_str(&simulate_path_json(GAP).unwrap()).unwrap();
        let stat = v["statistic"].as_array().unwrap();
        let thr = v["threshold"].as_array().unwrap();
        let t = v["stopping_time"].as_u64().unwrap() as usize;
        assert_eq!(stat.len(), t);
        assert_eq!(v["sums"].as_array().unwrap().len(), t);
        assert!(stat[t - 1].as_f64().unwrap() >= thr[t - 1].as_f64().unwrap());
        assert!(stat[..t - 1]
            .iter()
            .zip(thr)
            .all(|(s, h)| s.as_f64().unwrap() < h.as_f64().unwrap()));
        assert_eq!(v["rejected"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn rho_curve_decreases() {
        let req = GAP.replace('}', r#","reps":2000,"sweep":"rho","grid":[0.0,0.5,0.75]}"#);
        let v: Vec<serde_json::Value> =
            serde_json::from_str(&mean_t_curve_json(&req).unwrap()).unwrap();
        assert_eq!(v.len(), 3);
        let means: Vec<f64> = v.iter().map(|p| p["mean_t"].as_f64().unwrap()).collect();
        assert!(means[0] > means[1] && means[1] > means[2]);
    }

    #[test]
    fn bad_requests_are_errors() {
        assert!(calibrate_json("{}").is_err());
        assert!(calibrate_json(&GAP.replace("\"gap\"", "\"other\"")).is_err());
        assert!(calibrate_json(&GAP.replace("0.5", "1.5")).is_err());
        assert!(mean_t_curve_json(GAP).is_err());
    }
}
