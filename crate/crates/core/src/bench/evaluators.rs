//! Native per-category evaluators. Each mirrors the reference evaluation
//! script of its category: same counting, same edge-case conventions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde_json::Value;

use crate::table::{cell_f64, cell_text, is_missing, Row, Table};

/// Default absolute tolerance for imputed values.
pub const DEFAULT_ATOL: f64 = 1e-6;

/// Outcome of one evaluation: a score in `[0, 1]` and, for partial or zero
/// scores, a human-readable reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub score: f64,
    pub reason: Option<String>,
}

impl Verdict {
    pub fn perfect() -> Self {
        Verdict {
            score: 1.0,
            reason: None,
        }
    }

    pub fn zero(reason: impl Into<String>) -> Self {
        Verdict {
            score: 0.0,
            reason: Some(reason.into()),
        }
    }

    fn scored(score: f64, reason: impl FnOnce() -> String) -> Self {
        Verdict {
            score,
            reason: (score < 1.0).then(reason),
        }
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Hashable identity of an id cell. Integral numbers compare equal whatever
/// their JSON spelling (`1` and `1.0`), strings never equal numbers.
pub fn id_key(value: &Value) -> String {
    match value {
        Value::String(s) => format!("s:{s}"),
        Value::Number(n) => match n.as_f64() {
            Some(f) if f.fract() == 0.0 && f.abs() < 1e15 => format!("n:{}", f as i64),
            _ => format!("n:{n}"),
        },
        other => format!("j:{other}"),
    }
}

fn id_set(rows: &[Row], id_field: &str, side: &str) -> Result<BTreeSet<String>, Verdict> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.get(id_field)
                .map(id_key)
                .ok_or_else(|| Verdict::zero(format!("{side} row {} lacks `{id_field}`", i + 1)))
        })
        .collect()
}

/// F1 between the id sets of the expected and processed rows.
pub fn eval_filtering(expected: &[Row], processed: &[Row], id_field: &str) -> Verdict {
    let (e, p) = match (
        id_set(expected, id_field, "expected"),
        id_set(processed, id_field, "processed"),
    ) {
        (Ok(e), Ok(p)) => (e, p),
        (Err(v), _) | (_, Err(v)) => return v,
    };
    let tp = e.intersection(&p).count() as f64;
    let precision = if p.is_empty() {
        0.0
    } else {
        tp / p.len() as f64
    };
    let recall = if e.is_empty() {
        0.0
    } else {
        tp / e.len() as f64
    };
    let score = f1(precision, recall);
    Verdict::scored(score, || {
        format!(
            "precision {precision:.4}, recall {recall:.4} ({} kept, {} expected, {} shared)",
            p.len(),
            e.len(),
            tp
        )
    })
}

/// Collapses runs of whitespace to one space and trims the ends.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Last text per id, as the reference loader builds a dict.
fn text_map(rows: &[Row], id_field: &str, text_field: &str) -> BTreeMap<String, String> {
    rows.iter()
        .filter_map(|r| {
            let id = r.get(id_field)?;
            Some((id_key(id), cell_text(r.get(text_field))))
        })
        .collect()
}

/// Share of expected ids whose processed text matches after normalization.
pub fn eval_refinement(
    expected: &[Row],
    processed: &[Row],
    id_field: &str,
    text_field: &str,
    normalize: bool,
) -> Verdict {
    let exp = text_map(expected, id_field, text_field);
    let proc = text_map(processed, id_field, text_field);
    let norm = |s: &str| {
        if normalize {
            normalize_text(s)
        } else {
            s.to_string()
        }
    };
    let mut missing = 0usize;
    let mut mismatched = Vec::new();
    for (id, text) in &exp {
        match proc.get(id) {
            None => missing += 1,
            Some(p) if norm(p) == norm(text) => {}
            Some(_) => mismatched.push(id.clone()),
        }
    }
    let total = exp.len();
    let matched = total - missing - mismatched.len();
    let score = if total > 0 {
        matched as f64 / total as f64
    } else {
        0.0
    };
    Verdict::scored(score, || {
        let shown: Vec<&str> = mismatched.iter().take(3).map(|s| &s[2..]).collect();
        format!(
            "{matched}/{total} texts match; {missing} missing, {} differ (e.g. {shown:?})",
            mismatched.len()
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputationFailure {
    Shape,
    ColumnOrder,
    Unfilled,
    ValueMismatch,
    OriginalModified,
}

impl fmt::Display for ImputationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImputationFailure::Shape => "shape mismatch",
            ImputationFailure::ColumnOrder => "column names or order differ",
            ImputationFailure::Unfilled => "missing values left unfilled",
            ImputationFailure::ValueMismatch => "value mismatch",
            ImputationFailure::OriginalModified => "original data modified",
        })
    }
}

/// Why a candidate imputation fails, or `None` when it is exact.
///
/// `raw` must share the ground truth's shape; it is the task input whose
/// missing cells define the mask.
pub fn imputation_failure(
    candidate: &Table,
    gt: &Table,
    raw: &Table,
    atol: f64,
) -> Option<(ImputationFailure, String)> {
    let shape = |t: &Table| (t.rows.len(), t.columns.len());
    if shape(candidate) != shape(gt) {
        return Some((
            ImputationFailure::Shape,
            format!("expected {:?}, found {:?}", shape(gt), shape(candidate)),
        ));
    }
    if candidate.columns != gt.columns {
        return Some((
            ImputationFailure::ColumnOrder,
            format!("expected {:?}, found {:?}", gt.columns, candidate.columns),
        ));
    }
    let cells = || {
        gt.columns
            .iter()
            .enumerate()
            .flat_map(move |(j, col)| (0..gt.rows.len()).map(move |i| (i, j, col.as_str())))
    };
    let raw_cell = |i: usize, j: usize| {
        raw.rows
            .get(i)
            .and_then(|r| raw.columns.get(j).and_then(|c| r.get(c)))
    };
    let cand = |i: usize, col: &str| candidate.rows[i].get(col);
    let missing_mask = |i, j| is_missing(raw_cell(i, j));

    if let Some((i, _, col)) =
        cells().find(|&(i, j, col)| missing_mask(i, j) && is_missing(cand(i, col)))
    {
        return Some((
            ImputationFailure::Unfilled,
            format!("row {}, column `{col}` is still missing", i + 1),
        ));
    }
    for (i, _, col) in cells().filter(|&(i, j, _)| missing_mask(i, j)) {
        let want = gt.rows[i].get(col);
        if is_missing(want) {
            continue;
        }
        let close = match (cell_f64(cand(i, col)), cell_f64(want)) {
            (Some(c), Some(g)) => (c - g).abs() <= atol,
            _ => false,
        };
        if !close {
            return Some((
                ImputationFailure::ValueMismatch,
                format!(
                    "row {}, column `{col}`: filled {:?}, expected {:?}",
                    i + 1,
                    cell_text(cand(i, col)),
                    cell_text(want)
                ),
            ));
        }
    }
    for (i, j, col) in cells().filter(|&(i, j, _)| !missing_mask(i, j)) {
        let before = raw_cell(i, j);
        let after = cand(i, col);
        let same = match (cell_f64(before), cell_f64(after)) {
            (Some(a), Some(b)) => a == b,
            (None, None) => cell_text(before) == cell_text(after),
            _ => false,
        };
        if !same {
            return Some((
                ImputationFailure::OriginalModified,
                format!(
                    "row {}, column `{col}`: {:?} became {:?}",
                    i + 1,
                    cell_text(before),
                    cell_text(after)
                ),
            ));
        }
    }
    None
}

/// 1.0 for an exact imputation, else 0.0 with the categorized failure.
pub fn eval_imputation(candidate: &Table, gt: &Table, raw: &Table, atol: f64) -> Verdict {
    match imputation_failure(candidate, gt, raw, atol) {
        None => Verdict::perfect(),
        Some((kind, detail)) => Verdict::zero(format!("{kind}: {detail}")),
    }
}

/// Python's `str()` of an id cell; absent and null ids read as empty.
fn id_text(value: Option<&Value>) -> String {
    match value {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Bool(true)) => "True".into(),
        Some(Value::Bool(false)) => "False".into(),
        Some(other) => other.to_string(),
    }
}

/// Structural equality with numbers compared by value.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(a, b)| values_equal(a, b))
        }
        (Value::Object(x), Value::Object(y)) => rows_equal(x, y),
        _ => a == b,
    }
}

pub fn rows_equal(a: &Row, b: &Row) -> bool {
    a.len() == b.len()
        && a.iter()
            .all(|(k, v)| b.get(k).is_some_and(|w| values_equal(v, w)))
}

/// F1 where a prediction counts only the first time its id appears, when
/// the id exists in the ground truth and every field matches.
pub fn eval_dedup(gt: &[Row], predicted: &[Row], id_field: &str) -> Verdict {
    if predicted.is_empty() {
        return Verdict::zero("no predicted rows");
    }
    let gt_map: BTreeMap<String, &Row> = gt.iter().map(|r| (id_text(r.get(id_field)), r)).collect();
    let mut tp: HashSet<String> = HashSet::new();
    let (mut duplicates, mut unknown, mut differing, mut blank) = (0usize, 0usize, 0usize, 0usize);
    for row in predicted {
        let rid = id_text(row.get(id_field));
        if rid.is_empty() {
            blank += 1;
        } else if tp.contains(&rid) {
            duplicates += 1;
        } else {
            match gt_map.get(&rid) {
                None => unknown += 1,
                Some(g) if rows_equal(row, g) => {
                    tp.insert(rid);
                }
                Some(_) => differing += 1,
            }
        }
    }
    let fp = (duplicates + unknown + differing + blank) as f64;
    let tpn = tp.len() as f64;
    let fn_ = (gt_map.len() - tp.len()) as f64;
    let precision = if tpn + fp > 0.0 {
        tpn / (tpn + fp)
    } else {
        0.0
    };
    let recall = if tpn + fn_ > 0.0 {
        tpn / (tpn + fn_)
    } else {
        0.0
    };
    let score = f1(precision, recall);
    Verdict::scored(score, || {
        format!(
            "{} true positives; false positives: {duplicates} duplicate, {unknown} unknown id, {differing} field mismatch, {blank} blank id; {fn_} missed",
            tp.len()
        )
    })
}

type Projection = Vec<String>;

fn counter(rows: &[Row], header: &[String]) -> Option<BTreeMap<Projection, usize>> {
    let mut counts = BTreeMap::new();
    for row in rows {
        let key = header
            .iter()
            .map(|c| row.get(c).map(|v| cell_text(Some(v))))
            .collect::<Option<Projection>>()?;
        *counts.entry(key).or_insert(0) += 1;
    }
    Some(counts)
}

fn excess(a: &BTreeMap<Projection, usize>, b: &BTreeMap<Projection, usize>) -> Vec<Projection> {
    let mut out = Vec::new();
    for (k, &n) in a {
        let m = b.get(k).copied().unwrap_or(0);
        for _ in m..n {
            out.push(k.clone());
        }
    }
    out
}

/// 1.0 iff the predicted rows, projected onto the ground-truth header, form
/// the same multiset as the ground truth.
pub fn eval_integration(gt_header: &[String], gt_rows: &[Row], predicted: &[Row]) -> Verdict {
    let Some(first) = predicted.first() else {
        return Verdict::zero("output is empty");
    };
    let missing: Vec<&String> = gt_header
        .iter()
        .filter(|c| !first.contains_key(*c))
        .collect();
    if !missing.is_empty() {
        return Verdict::zero(format!("missing columns: {missing:?}"));
    }
    let Some(pred) = counter(predicted, gt_header) else {
        return Verdict::zero("a predicted row lacks a ground-truth column");
    };
    let gt = counter(gt_rows, gt_header).unwrap_or_default();
    if gt == pred {
        return Verdict::perfect();
    }
    let lack = excess(&gt, &pred);
    let extra = excess(&pred, &gt);
    let mut reason = String::from("row multisets differ");
    if !lack.is_empty() {
        reason.push_str(&format!(
            "; missing rows e.g. {:?}",
            &lack[..lack.len().min(3)]
        ));
    }
    if !extra.is_empty() {
        reason.push_str(&format!(
            "; extra rows e.g. {:?}",
            &extra[..extra.len().min(3)]
        ));
    }
    Verdict::zero(reason)
}

fn label_norm(value: Option<&Value>) -> String {
    id_text(value).trim().to_string()
}

/// Share of ground-truth ids whose predicted label matches after trimming.
/// Case matters; a missing prediction is wrong.
pub fn eval_classification(
    gt: &[Row],
    predicted: &[Row],
    id_field: &str,
    label_field: &str,
) -> Verdict {
    let gt_map: BTreeMap<String, String> = gt
        .iter()
        .map(|r| (label_norm(r.get(id_field)), label_norm(r.get(label_field))))
        .collect();
    let pred_map: BTreeMap<String, String> = predicted
        .iter()
        .map(|r| (label_norm(r.get(id_field)), label_norm(r.get(label_field))))
        .collect();
    let total = gt_map.len();
    let correct = gt_map
        .iter()
        .filter(|(k, v)| pred_map.get(*k) == Some(*v))
        .count();
    let score = if total > 0 {
        correct as f64 / total as f64
    } else {
        0.0
    };
    Verdict::scored(score, || {
        if total == 0 {
            "ground truth is empty".into()
        } else {
            format!("{correct}/{total} labels correct")
        }
    })
}
