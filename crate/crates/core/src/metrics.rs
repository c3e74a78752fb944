//! Aggregate metrics over run records and their derived efficiency ratios.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RunRecord;

/// Minimum task score counted as a success.
pub const DEFAULT_TAU: f64 = 0.99;

/// Ratios that are undefined for the report (a zero denominator) are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// TSR / CRR.
    pub alignment: Option<f64>,
    /// CRR - TSR, in percentage points.
    pub contract_gap: f64,
    /// TSR / ADI.
    pub debug_efficiency: Option<f64>,
    /// Average tokens / (TSR / 100).
    pub tokens_per_success: Option<f64>,
}

/// Derived metrics from the headline numbers.
pub fn derived(tsr: f64, crr: f64, adi: f64, avg_tokens: f64) -> Derived {
    Derived {
        alignment: (crr > 0.0).then(|| tsr / crr),
        contract_gap: crr - tsr,
        debug_efficiency: (adi > 0.0).then(|| tsr / adi),
        tokens_per_success: (tsr > 0.0).then(|| avg_tokens / (tsr / 100.0)),
    }
}

/// Mean of ATS, TSR and CRR.
pub fn avg_score(ats: f64, tsr: f64, crr: f64) -> f64 {
    (ats + tsr + crr) / 3.0
}

/// Percentages are on a 0-100 scale and unrounded; times and cost are totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub n_tasks: usize,
    pub ats: f64,
    pub tsr: f64,
    pub crr: f64,
    pub avg_score: f64,
    pub adi: f64,
    pub avg_tokens: f64,
    pub total_cost: f64,
    pub gen_time_s: f64,
    pub exec_time_s: f64,
    pub alignment: Option<f64>,
    pub contract_gap: f64,
    pub debug_efficiency: Option<f64>,
    pub tokens_per_success: Option<f64>,
}

impl ScoreReport {
    pub fn derived(&self) -> Derived {
        Derived {
            alignment: self.alignment,
            contract_gap: self.contract_gap,
            debug_efficiency: self.debug_efficiency,
            tokens_per_success: self.tokens_per_success,
        }
    }
}

/// Folds run records into a report. A task succeeds when its score is at
/// least `tau`; each record is one generated solution for CRR.
pub fn aggregate(records: &[RunRecord], tau: f64) -> Result<ScoreReport> {
    if records.is_empty() {
        return Err(Error::Evaluation("no run records to aggregate".into()));
    }
    let n = records.len() as f64;
    let pct = |count: usize| 100.0 * count as f64 / n;
    let ats = 100.0 * records.iter().map(|r| r.score).sum::<f64>() / n;
    let tsr = pct(records.iter().filter(|r| r.score >= tau).count());
    let crr = pct(records.iter().filter(|r| r.runnable).count());
    let adi = records
        .iter()
        .map(|r| f64::from(r.debug_iterations))
        .sum::<f64>()
        / n;
    let avg_tokens = records.iter().map(|r| r.tokens as f64).sum::<f64>() / n;
    let d = derived(tsr, crr, adi, avg_tokens);
    Ok(ScoreReport {
        n_tasks: records.len(),
        ats,
        tsr,
        crr,
        avg_score: avg_score(ats, tsr, crr),
        adi,
        avg_tokens,
        total_cost: records.iter().map(|r| r.cost).sum(),
        gen_time_s: records.iter().map(|r| r.gen_time_s).sum(),
        exec_time_s: records.iter().map(|r| r.exec_time_s).sum(),
        alignment: d.alignment,
        contract_gap: d.contract_gap,
        debug_efficiency: d.debug_efficiency,
        tokens_per_success: d.tokens_per_success,
    })
}

/// Reads a JSONL run log.
pub fn load_run_log(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(line)
            .map_err(|e| Error::data(path, format!("line {}: {e}", i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn run_log_jsonl(records: &[RunRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("RunRecord serializes") + "\n")
        .collect()
}

pub fn render_json(report: &ScoreReport) -> String {
    serde_json::to_string_pretty(report).expect("ScoreReport serializes") + "\n"
}

fn fixed(v: f64) -> String {
    format!("{v:.2}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), fixed)
}

fn rows(r: &ScoreReport) -> Vec<(&'static str, String)> {
    vec![
        ("Tasks", r.n_tasks.to_string()),
        ("ATS", fixed(r.ats)),
        ("TSR", fixed(r.tsr)),
        ("CRR", fixed(r.crr)),
        ("Avg. Score", fixed(r.avg_score)),
        ("ADI", fixed(r.adi)),
        ("Avg. Tokens", fixed(r.avg_tokens)),
        ("Total Cost", format!("{:.4}", r.total_cost)),
        ("Gen. Time (s)", fixed(r.gen_time_s)),
        ("Exec. Time (s)", fixed(r.exec_time_s)),
        ("A (TSR/CRR)", opt(r.alignment)),
        ("Δrc (CRR-TSR)", fixed(r.contract_gap)),
        ("E (TSR/ADI)", opt(r.debug_efficiency)),
        (
            "T* (tokens/success)",
            r.tokens_per_success
                .map_or_else(|| "n/a".into(), |t| format!("{t:.0}")),
        ),
    ]
}

/// Markdown table with one metric per row and one column per report.
pub fn render_markdown(reports: &[(&str, &ScoreReport)]) -> String {
    let mut out = String::from("| Metric |");
    for (label, _) in reports {
        let _ = write!(out, " {label} |");
    }
    out.push_str("\n|---|");
    for _ in reports {
        out.push_str("---:|");
    }
    out.push('\n');
    let columns: Vec<Vec<(&str, String)>> = reports.iter().map(|(_, r)| rows(r)).collect();
    if let Some(first) = columns.first() {
        for (i, (name, _)) in first.iter().enumerate() {
            let _ = write!(out, "| {name} |");
            for col in &columns {
                let _ = write!(out, " {} |", col[i].1);
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(score: f64, runnable: bool, d: u32, tokens: u64) -> RunRecord {
        RunRecord {
            task_id: "t".into(),
            debug_iterations: d,
            tokens,
            gen_time_s: 1.0,
            exec_time_s: 0.5,
            cost: 0.25,
            score,
            runnable,
            success: score >= DEFAULT_TAU,
        }
    }

    #[test]
    fn perfect_run() {
        let r = aggregate(&[rec(1.0, true, 1, 10), rec(1.0, true, 1, 30)], DEFAULT_TAU).unwrap();
        assert_eq!((r.ats, r.tsr, r.crr, r.adi), (100.0, 100.0, 100.0, 1.0));
        assert_eq!(r.avg_tokens, 20.0);
        assert_eq!(r.total_cost, 0.5);
        assert_eq!(r.alignment, Some(1.0));
    }

    #[test]
    fn empty_is_error() {
        assert!(aggregate(&[], DEFAULT_TAU).is_err());
    }

    #[test]
    fn undefined_ratios_are_absent() {
        let r = aggregate(&[rec(0.0, false, 3, 10)], DEFAULT_TAU).unwrap();
        assert_eq!(r.alignment, None);
        assert_eq!(r.tokens_per_success, None);
        assert_eq!(r.debug_efficiency, Some(0.0));
        assert_eq!(r.contract_gap, 0.0);
    }

    #[test]
    fn avg_score_table_rows() {
        assert!((avg_score(40.98, 49.0, 81.0) - 56.99).abs() < 0.01);
        assert!((avg_score(35.68, 47.0, 74.0) - 52.23).abs() < 0.01);
    }

    #[test]
    fn markdown_has_one_column_per_report() {
        let r = aggregate(&[rec(1.0, true, 1, 10)], DEFAULT_TAU).unwrap();
        let md = render_markdown(&[("a", &r), ("b", &r)]);
        assert!(md.starts_with("| Metric | a | b |\n|---|---:|---:|\n"));
        assert!(md.contains("| TSR | 100.00 | 100.00 |"));
    }
}
