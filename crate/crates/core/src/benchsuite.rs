//! Design-pattern workload catalogue and the predicted-versus-actual
//! evaluation harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ClusterProfile, DesignPattern, Phase, WorkloadSpec};
use crate::error::{Error, Result};
use crate::predictor::{error_pct, predict_job, CustomTimes, JobPrediction, PhaseModelSet};
use crate::simcluster::simulate_job;
use crate::units::Millis;

const DEFAULT_SUITE_JSON: &str = include_str!("../fixtures/suite_v1.json");

pub const SUITE_PATTERNS: [DesignPattern; 4] = [
    DesignPattern::Summarisation,
    DesignPattern::Filtering,
    DesignPattern::DataOrganisation,
    DesignPattern::Join,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub notes: String,
}

impl SuiteEntry {
    pub fn pattern(&self) -> DesignPattern {
        self.workload.design_pattern
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub version: u32,
    pub entries: Vec<SuiteEntry>,
}

impl Suite {
    pub fn from_json(text: &str) -> Result<Suite> {
        let suite: Suite = serde_json::from_str(text)?;
        suite.validate()?;
        Ok(suite)
    }

    pub fn read(path: &Path) -> Result<Suite> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Every workload must be valid; names must be unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            e.workload.validate()?;
            if !seen.insert(e.workload.name.as_str()) {
                return Err(Error::InvalidWorkload(format!(
                    "duplicate suite entry `{}`",
                    e.workload.name
                )));
            }
        }
        Ok(())
    }

    pub fn count_by_pattern(&self) -> BTreeMap<DesignPattern, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.pattern()).or_insert(0) += 1;
        }
        out
    }
}

/// The fourteen-workload catalogue shipped with the crate.
pub fn default_suite() -> Vec<SuiteEntry> {
    Suite::from_json(DEFAULT_SUITE_JSON)
        .expect("bundled suite fixture is valid")
        .entries
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub algorithm: String,
    pub pattern: DesignPattern,
    pub input_mb: f64,
    pub predicted_ms: Millis,
    /// Mean simulated total over the seeds.
    pub actual_ms: Millis,
    pub error_pct: f64,
    /// Largest per-seed |error %|.
    pub max_run_abs_error_pct: f64,
    pub prediction: JobPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub pattern: DesignPattern,
    pub entries: usize,
    pub mean_abs_error_pct: f64,
    pub max_abs_error_pct: f64,
    /// Coefficient of variation of actual totals among the largest group of
    /// same-size entries; `None` when no two entries share an input size.
    pub equal_size_cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<SuiteRow>,
    pub patterns: Vec<PatternSummary>,
    pub mean_abs_error_pct: f64,
    pub max_abs_error_pct: f64,
}

fn secs(ms: Millis) -> i64 {
    (ms.get() / 1000.0).round() as i64
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    var.sqrt() / m
}

fn summarise(pattern: DesignPattern, rows: &[&SuiteRow]) -> PatternSummary {
    let abs: Vec<f64> = rows.iter().map(|r| r.error_pct.abs()).collect();
    let mut by_size: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_size.entry(r.input_mb.to_bits()).or_default().push(r.actual_ms.get());
    }
    let equal_size_cv = by_size
        .values()
        .filter(|g| g.len() >= 2)
        .max_by_key(|g| g.len())
        .map(|g| coefficient_of_variation(g));
    PatternSummary {
        pattern,
        entries: rows.len(),
        mean_abs_error_pct: mean(&abs),
        max_abs_error_pct: abs.iter().copied().fold(0.0, f64::max),
        equal_size_cv,
    }
}

/// Predict each entry from its per-record rates and compare with the mean
/// simulated total over `seeds`.
pub fn run_suite(
    models: &PhaseModelSet,
    cluster: &ClusterProfile,
    suite: &[SuiteEntry],
    seeds: &[u64],
) -> Result<SuiteReport> {
    if seeds.is_empty() {
        return Err(Error::Contract("run_suite needs at least one seed".into()));
    }
    cluster.validate()?;
    let rows = suite
        .par_iter()
        .map(|entry| {
            let w = &entry.workload;
            let prediction = predict_job(models, w, cluster, CustomTimes::Rates)?;
            let actuals = seeds
                .iter()
                .map(|&s| simulate_job(cluster, w, s).map(|t| t.total_ms))
                .collect::<Result<Vec<Millis>>>()?;
            let actual_ms = actuals.iter().copied().sum::<Millis>() / actuals.len() as f64;
            let max_run = actuals
                .iter()
                .map(|&a| error_pct(a, prediction.total_ms).abs())
                .fold(0.0, f64::max);
            Ok(SuiteRow {
                algorithm: w.name.clone(),
                pattern: entry.pattern(),
                input_mb: w.input_mb.get(),
                predicted_ms: prediction.total_ms,
                actual_ms,
                error_pct: error_pct(actual_ms, prediction.total_ms),
                max_run_abs_error_pct: max_run,
                prediction,
            })
        })
        .collect::<Result<Vec<SuiteRow>>>()?;

    let mut patterns = Vec::new();
    let mut seen: Vec<DesignPattern> = Vec::new();
    for r in &rows {
        if !seen.contains(&r.pattern) {
            seen.push(r.pattern);
        }
    }
    seen.sort();
    for p in seen {
        let group: Vec<&SuiteRow> = rows.iter().filter(|r| r.pattern == p).collect();
        patterns.push(summarise(p, &group));
    }
    let abs: Vec<f64> = rows.iter().map(|r| r.error_pct.abs()).collect();
    Ok(SuiteReport {
        seeds: seeds.to_vec(),
        mean_abs_error_pct: mean(&abs),
        max_abs_error_pct: abs.iter().copied().fold(0.0, f64::max),
        rows,
        patterns,
    })
}

impl SuiteReport {
    /// `Algorithm,Predicted,Actual,Error%,Pattern`, seconds rounded to
    /// whole numbers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Algorithm,Predicted,Actual,Error%,Pattern\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.2},{}",
                csv_field(&r.algorithm),
                secs(r.predicted_ms),
                secs(r.actual_ms),
                r.error_pct,
                r.pattern
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for p in &self.patterns {
            let _ = writeln!(out, "### {}\n", p.pattern);
            out.push_str("| Algorithm | Predicted (sec) | Actual (sec) | Error% |\n");
            out.push_str("|---|---:|---:|---:|\n");
            for r in self.rows.iter().filter(|r| r.pattern == p.pattern) {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.2} |",
                    r.algorithm,
                    secs(r.predicted_ms),
                    secs(r.actual_ms),
                    r.error_pct
                );
            }
            let _ = write!(
                out,
                "\nmean |Error%| {:.2}, max {:.2}",
                p.mean_abs_error_pct, p.max_abs_error_pct
            );
            if let Some(cv) = p.equal_size_cv {
                let _ = write!(out, ", equal-size CV {cv:.3}");
            }
            out.push_str("\n\n");
        }
        let _ = writeln!(
            out,
            "Overall mean |Error%| {:.2}, max {:.2} over seeds {:?}",
            self.mean_abs_error_pct, self.max_abs_error_pct, self.seeds
        );
        out
    }

    /// Long-format per-phase contributions for plotting.
    pub fn breakdown_csv(&self) -> String {
        let mut out = String::from("Algorithm,Pattern,Phase,TaskMs,Waves,ContributionMs\n");
        for r in &self.rows {
            for (phase, per_task) in &r.prediction.phase_task_ms {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    csv_field(&r.algorithm),
                    r.pattern,
                    phase.as_str(),
                    per_task.get(),
                    r.prediction.waves_of(*phase),
                    r.prediction.breakdown[phase].get()
                );
            }
        }
        out
    }

    pub fn row(&self, algorithm: &str) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }

    pub fn pattern(&self, pattern: DesignPattern) -> Option<&PatternSummary> {
        self.patterns.iter().find(|p| p.pattern == pattern)
    }
}

/// Per-phase share of each entry's predicted total, in phase order.
pub fn phase_shares(row: &SuiteRow) -> BTreeMap<Phase, f64> {
    let total = row.prediction.total_ms.get();
    row.prediction
        .breakdown
        .iter()
        .map(|(&p, ms)| (p, if total > 0.0 { ms.get() / total } else { 0.0 }))
        .collect()
}
