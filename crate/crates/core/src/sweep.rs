//! Grid specifications, summaries and rate fits for simulation sweeps.

use serde::{Deserialize, Serialize};

use crate::embedding::Method;
use crate::error::{Error, Result};
use crate::metrics::fit_loglog_slope;
use crate::simgen::{run_experiment, ExperimentOptions, RunRecord, Scenario, SimConfig};

fn default_reps() -> usize {
    1
}

fn default_workers() -> usize {
    1
}

/// `{"configs": [...], "methods": [...], "reps": int, "base_seed": int, "workers": int}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub configs: Vec<SimConfig>,
    pub methods: Vec<Method>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GridSpec = serde_json::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::Config("grid has no configs".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("grid has no methods".into()));
        }
        if self.reps == 0 || self.workers == 0 {
            return Err(Error::Config("reps and workers must be at least 1".into()));
        }
        for (k, cfg) in self.configs.iter().enumerate() {
            cfg.validate()
                .map_err(|e| Error::Config(format!("config {}: {e}", k + 1)))?;
        }
        Ok(())
    }

    pub fn run(&self, timing: bool) -> Result<Vec<RunRecord>> {
        self.check()?;
        run_experiment(
            &self.configs,
            &self.methods,
            &ExperimentOptions {
                reps: self.reps,
                base_seed: self.base_seed,
                workers: self.workers,
                timing,
            },
        )
    }
}

/// Mean and sample standard deviation of successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub scenario: Scenario,
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub p: usize,
    pub count: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Rows keyed by (method, scenario, alpha, beta, n, p) in order of first
/// appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, Scenario, u64, u64, usize, usize)> = Vec::new();
    let mut values: Vec<(Vec<f64>, usize)> = Vec::new();
    for rec in records {
        let key = (rec.method, rec.scenario, rec.alpha.to_bits(), rec.beta.to_bits(), rec.n, rec.p);
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                values.push((Vec::new(), 0));
                keys.len() - 1
            }
        };
        match rec.normalized_error {
            Some(e) if rec.is_ok() => values[idx].0.push(e),
            _ => values[idx].1 += 1,
        }
    }
    keys.into_iter()
        .zip(values)
        .map(|((method, scenario, a, b, n, p), (errs, failed))| {
            let k = errs.len();
            let mean = (k > 0).then(|| errs.iter().sum::<f64>() / k as f64);
            let sd = mean.map(|m| {
                if k < 2 {
                    0.0
                } else {
                    (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
                }
            });
            SummaryRow {
                method,
                scenario,
                alpha: f64::from_bits(a),
                beta: f64::from_bits(b),
                n,
                p,
                count: k,
                failed,
                mean,
                sd,
            }
        })
        .collect()
}

/// Log-log slope of mean error for one method and setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub method: Method,
    pub scenario: Scenario,
    pub alpha: f64,
    pub beta: f64,
    /// `p` when it varies across the points, else `n`.
    pub axis: String,
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
}

/// Fits a slope for every (method, scenario, alpha, beta) with at least three
/// distinct scales. The scale is `p` when it varies, otherwise `n`.
pub fn slopes(summary: &[SummaryRow]) -> Vec<SlopeRow> {
    let mut groups: Vec<((Method, Scenario, u64, u64), Vec<&SummaryRow>)> = Vec::new();
    for row in summary.iter().filter(|r| r.mean.is_some_and(|m| m > 0.0)) {
        let key = (row.method, row.scenario, row.alpha.to_bits(), row.beta.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .filter_map(|((method, scenario, a, b), rows)| {
            let p_varies = rows.iter().any(|r| r.p != rows[0].p);
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (if p_varies { r.p } else { r.n } as f64, r.mean.unwrap()))
                .collect();
            let fit = fit_loglog_slope(&pts).ok()?;
            Some(SlopeRow {
                method,
                scenario,
                alpha: f64::from_bits(a),
                beta: f64::from_bits(b),
                axis: if p_varies { "p" } else { "n" }.to_string(),
                points: pts.len(),
                slope: fit.slope,
                intercept: fit.intercept,
            })
        })
        .collect()
}

/// One JSON object per line, in the given order.
pub fn to_jsonl(records: &[RunRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<RunRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    rows_to_csv(rows)
}

pub fn slopes_csv(rows: &[SlopeRow]) -> Result<String> {
    rows_to_csv(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: Method, n: usize, p: usize, err: Option<f64>) -> RunRecord {
        RunRecord {
            method,
            scenario: Scenario::TwoByThree,
            n,
            p,
            alpha: 0.5,
            beta: 0.5,
            seed: 0,
            normalized_error: err,
            wall_time: None,
            error: err.is_none().then(|| "failed".to_string()),
        }
    }

    #[test]
    fn summary_mean_sd_and_failures() {
        let recs = vec![
            rec(Method::Appca, 10, 10, Some(1.0)),
            rec(Method::Appca, 10, 10, Some(3.0)),
            rec(Method::Appca, 10, 10, None),
            rec(Method::Oracle, 10, 10, Some(0.5)),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].count, s[0].failed, s[0].mean), (2, 1, Some(2.0)));
        assert!((s[0].sd.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[1].sd, Some(0.0));
        let csv = summary_csv(&s).unwrap();
        assert!(csv.starts_with("method,scenario,alpha,beta,n,p,count,failed,mean,sd\n"));
    }

    #[test]
    fn slopes_pick_axis() {
        let mut recs = Vec::new();
        for &p in &[100usize, 200, 400, 800] {
            recs.push(rec(Method::Oracle, p, p, Some(2.0 / (p as f64).sqrt())));
            recs.push(rec(Method::Appca, 50, p, Some(1.0 / (p as f64).powf(0.25))));
        }
        let sl = slopes(&summarize(&recs));
        assert_eq!(sl.len(), 2);
        assert!((sl[0].slope + 0.5).abs() < 1e-12);
        assert_eq!(sl[1].axis, "p");
        assert!((sl[1].slope + 0.25).abs() < 1e-12);
    }

    #[test]
    fn jsonl_round_trip_and_field_names() {
        let recs = vec![rec(Method::TwoStep, 5, 6, Some(0.25)), rec(Method::SharedPca, 5, 6, None)];
        let text = to_jsonl(&recs).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let mut keys: Vec<&str> = first.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["alpha", "beta", "method", "n", "normalized_error", "p", "scenario", "seed"]);
        assert!(text.starts_with(r#"{"method":"two_step","scenario":"two_by_three","n":5"#));
        assert_eq!(from_jsonl(&text).unwrap(), recs);
    }

    #[test]
    fn grid_spec_parsing() {
        let text = r#"{"configs":[{"scenario":"2x3","n":20,"p":20,"alpha":0.5,"beta":0.5}],
                       "methods":["appca","shared-pca"],"reps":2,"base_seed":3,"workers":2}"#;
        let g = GridSpec::from_json(text).unwrap();
        assert_eq!(g.methods, vec![Method::Appca, Method::SharedPca]);
        let recs = g.run(false).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[2].seed, 4);
        let bad = text.replace("\"alpha\":0.5", "\"alpha\":2.0");
        assert!(GridSpec::from_json(&bad).is_err());
    }
}
