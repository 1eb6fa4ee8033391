//! Aggregation and CSV output for experiment results.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Method;
use super::experiment::TrialRecord;
use crate::error::{Error, Result};
use crate::model::LossReport;

pub const RAW_FILE: &str = "raw_trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Mean and standard error of one method at one budget, over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub budget: f64,
    pub trials: usize,
    pub failures: usize,
    pub loss_mean: f64,
    pub loss_se: f64,
    pub avg_eer_mean: f64,
    pub avg_eer_se: f64,
    pub max_eer_mean: f64,
    pub max_eer_se: f64,
    pub iterations_mean: f64,
    pub acquired_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub name: String,
    pub slice_ids: Vec<String>,
    pub trials: Vec<TrialRecord>,
    pub summaries: Vec<MethodSummary>,
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

impl ComparisonReport {
    pub fn new(name: String, slice_ids: Vec<String>, trials: Vec<TrialRecord>) -> Self {
        let mut keys: Vec<(f64, Method)> = Vec::new();
        for t in &trials {
            if !keys.iter().any(|&(b, m)| b == t.budget && m == t.method) {
                keys.push((t.budget, t.method));
            }
        }
        let summaries = keys
            .into_iter()
            .map(|(budget, method)| {
                let group: Vec<&TrialRecord> =
                    trials.iter().filter(|t| t.budget == budget && t.method == method).collect();
                let ok: Vec<(&TrialRecord, &LossReport)> =
                    group.iter().filter_map(|t| t.report.as_ref().map(|r| (*t, r))).collect();
                let stat = |f: &dyn Fn(&LossReport) -> f64| mean_se(&ok.iter().map(|(_, r)| f(r)).collect::<Vec<_>>());
                let (loss_mean, loss_se) = stat(&|r| r.overall_loss);
                let (avg_eer_mean, avg_eer_se) = stat(&|r| r.avg_eer);
                let (max_eer_mean, max_eer_se) = stat(&|r| r.max_eer);
                let k = ok.len().max(1) as f64;
                let acquired_mean = (0..slice_ids.len())
                    .map(|j| ok.iter().map(|(t, _)| t.acquired[j] as f64).sum::<f64>() / k)
                    .collect();
                MethodSummary {
                    method,
                    budget,
                    trials: ok.len(),
                    failures: group.len() - ok.len(),
                    loss_mean,
                    loss_se,
                    avg_eer_mean,
                    avg_eer_se,
                    max_eer_mean,
                    max_eer_se,
                    iterations_mean: ok.iter().map(|(t, _)| t.iterations as f64).sum::<f64>() / k,
                    acquired_mean,
                }
            })
            .collect();
        Self { name, slice_ids, trials, summaries }
    }

    pub fn summary(&self, method: Method, budget: f64) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method && s.budget == budget)
    }

    /// Successful records of one method at one budget, in trial order.
    pub fn records(&self, method: Method, budget: f64) -> Vec<&TrialRecord> {
        let mut v: Vec<&TrialRecord> =
            self.trials.iter().filter(|t| t.method == method && t.budget == budget && t.report.is_some()).collect();
        v.sort_by_key(|t| t.trial);
        v
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

/// Writes `raw_trials.csv` and `summary.csv` into `dir`.
pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let raw = dir.join(RAW_FILE);
    let mut w = csv::Writer::from_path(&raw).map_err(|e| Error::csv(&raw, e))?;
    let mut header: Vec<String> = [
        "method",
        "budget",
        "trial",
        "seed",
        "world_digest",
        "status",
        "loss",
        "avg_eer",
        "max_eer",
        "spent",
        "iterations",
        "stop_reason",
        "unreliable_curves",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.slice_ids.iter().map(|id| format!("acquired_{id}")));
    header.extend(report.slice_ids.iter().map(|id| format!("loss_{id}")));
    w.write_record(&header).map_err(|e| Error::csv(&raw, e))?;
    for t in &report.trials {
        let r = t.report.as_ref();
        let mut row = vec![
            t.method.to_string(),
            t.budget.to_string(),
            t.trial.to_string(),
            t.seed.to_string(),
            t.world_digest.clone(),
            if r.is_some() { "ok" } else { "failed" }.to_string(),
            opt(r.map(|r| r.overall_loss)),
            opt(r.map(|r| r.avg_eer)),
            opt(r.map(|r| r.max_eer)),
            t.spent.to_string(),
            t.iterations.to_string(),
            t.stop_reason.clone(),
            t.unreliable_curves.to_string(),
            t.error.clone().unwrap_or_default(),
        ];
        row.extend(t.acquired.iter().map(|a| a.to_string()));
        for j in 0..report.slice_ids.len() {
            row.push(opt(r.map(|r| r.per_slice_loss[j])));
        }
        w.write_record(&row).map_err(|e| Error::csv(&raw, e))?;
    }
    w.flush().map_err(|e| Error::io(&raw, e))?;

    let path = dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let mut header: Vec<String> = [
        "method",
        "budget",
        "trials",
        "failures",
        "loss_mean",
        "loss_se",
        "avg_eer_mean",
        "avg_eer_se",
        "max_eer_mean",
        "max_eer_se",
        "iterations_mean",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(report.slice_ids.iter().map(|id| format!("acquired_mean_{id}")));
    w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
    for s in &report.summaries {
        let mut row = vec![
            s.method.to_string(),
            s.budget.to_string(),
            s.trials.to_string(),
            s.failures.to_string(),
            s.loss_mean.to_string(),
            s.loss_se.to_string(),
            s.avg_eer_mean.to_string(),
            s.avg_eer_se.to_string(),
            s.max_eer_mean.to_string(),
            s.max_eer_se.to_string(),
            s.iterations_mean.to_string(),
        ];
        row.extend(s.acquired_mean.iter().map(|a| a.to_string()));
        w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Reads a report back from a directory holding `raw_trials.csv`, or from
/// the file itself.
pub fn read_raw_csv(path: &Path) -> Result<ComparisonReport> {
    let file = if path.is_dir() { path.join(RAW_FILE) } else { path.to_path_buf() };
    let mut r = csv::Reader::from_path(&file).map_err(|e| Error::csv(&file, e))?;
    let headers = r.headers().map_err(|e| Error::csv(&file, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", file.display())))
    };
    let slice_ids: Vec<String> =
        headers.iter().filter_map(|h| h.strip_prefix("acquired_")).map(str::to_string).collect();
    let acquired_cols = slice_ids.iter().map(|id| col(&format!("acquired_{id}"))).collect::<Result<Vec<_>>>()?;
    let loss_cols = slice_ids.iter().map(|id| col(&format!("loss_{id}"))).collect::<Result<Vec<_>>>()?;
    let [c_method, c_budget, c_trial, c_seed, c_digest, c_status, c_spent, c_iter, c_stop, c_unrel, c_err] = [
        "method",
        "budget",
        "trial",
        "seed",
        "world_digest",
        "status",
        "spent",
        "iterations",
        "stop_reason",
        "unreliable_curves",
        "error",
    ]
    .map(col);
    let (c_method, c_budget, c_trial, c_seed, c_digest, c_status) =
        (c_method?, c_budget?, c_trial?, c_seed?, c_digest?, c_status?);
    let (c_spent, c_iter, c_stop, c_unrel, c_err) = (c_spent?, c_iter?, c_stop?, c_unrel?, c_err?);

    let mut trials = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(&file, e))?;
        let bad = |what: &str| Error::Config(format!("{}: row {}: bad {what}", file.display(), line + 2));
        let num = |c: usize, what: &str| rec[c].parse::<f64>().map_err(|_| bad(what));
        let int = |c: usize, what: &str| rec[c].parse::<u64>().map_err(|_| bad(what));
        let method = Method::parse(&rec[c_method]).ok_or_else(|| bad("method"))?;
        let report = if &rec[c_status] == "ok" {
            let per_slice = loss_cols.iter().map(|&c| num(c, "slice loss")).collect::<Result<Vec<_>>>()?;
            Some(LossReport {
                per_slice_loss: per_slice,
                overall_loss: num(col("loss")?, "loss")?,
                avg_eer: num(col("avg_eer")?, "avg_eer")?,
                max_eer: num(col("max_eer")?, "max_eer")?,
            })
        } else {
            None
        };
        trials.push(TrialRecord {
            method,
            budget: num(c_budget, "budget")?,
            trial: int(c_trial, "trial")? as usize,
            seed: int(c_seed, "seed")?,
            world_digest: rec[c_digest].to_string(),
            report,
            error: Some(rec[c_err].to_string()).filter(|s| !s.is_empty()),
            acquired: acquired_cols.iter().map(|&c| int(c, "acquired")).collect::<Result<Vec<_>>>()?,
            spent: num(c_spent, "spent")?,
            iterations: int(c_iter, "iterations")? as usize,
            stop_reason: rec[c_stop].to_string(),
            unreliable_curves: int(c_unrel, "unreliable_curves")? as usize,
            elapsed_secs: 0.0,
        });
    }
    let name = file.parent().and_then(|p| p.file_name()).map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    Ok(ComparisonReport::new(name, slice_ids, trials))
}

/// Long-format rows for plotting: one per successful method run.
pub fn emit_plot_data(report: &ComparisonReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["method", "budget", "trial", "loss", "avg_eer", "max_eer"]).map_err(|e| Error::csv(path, e))?;
    for t in &report.trials {
        if let Some(r) = &t.report {
            w.write_record([
                t.method.to_string(),
                t.budget.to_string(),
                t.trial.to_string(),
                r.overall_loss.to_string(),
                r.avg_eer.to_string(),
                r.max_eer.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, divided by 4
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
        assert!(mean_se(&[]).0.is_nan());
    }
}
