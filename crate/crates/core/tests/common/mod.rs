//! Brute-force oracles for the builtin evaluators and random instance
//! generators shared by the property tests and the acceptance suite.
//!
//! Each oracle is written straight from the evaluator's definition with
//! plain loops over lists, never sharing code with the implementation.
#![allow(dead_code)]

pub mod chains;
pub mod reference;

use govdag_core::table::{DataFormat, Row, Table};
use proptest::prelude::*;
use serde_json::{json, Value};

pub const MAX_ROWS: usize = 100;

pub fn row(v: Value) -> Row {
    v.as_object().expect("object literal").clone()
}

fn text(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn distinct(values: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

// ---- filtering: F1 over id sets ----

pub fn oracle_filtering(expected: &[Row], processed: &[Row], id: &str) -> f64 {
    let e = distinct(expected.iter().map(|r| text(r.get(id))));
    let p = distinct(processed.iter().map(|r| text(r.get(id))));
    let mut tp = 0;
    let mut fp = 0;
    for x in &p {
        if e.contains(x) {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let fn_ = e.iter().filter(|x| !p.contains(x)).count();
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

// ---- refinement: accuracy of normalized texts over expected ids ----

fn collapse(s: &str) -> String {
    let mut out = String::new();
    let mut pending = false;
    for c in s.chars() {
        if c == ' ' || c == '\t' || c == '\n' || c == '\r' {
            pending = true;
        } else {
            if pending && !out.is_empty() {
                out.push(' ');
            }
            pending = false;
            out.push(c);
        }
    }
    out
}

/// Text of the last row carrying `key`, as a dict built row by row keeps it.
fn last_text(rows: &[Row], id: &str, key: &str, field: &str) -> Option<String> {
    rows.iter()
        .rev()
        .find(|r| r.get(id).map(|v| text(Some(v))).as_deref() == Some(key))
        .map(|r| text(r.get(field)))
}

pub fn oracle_refinement(expected: &[Row], processed: &[Row], id: &str, field: &str) -> f64 {
    let keys = distinct(
        expected
            .iter()
            .filter(|r| r.contains_key(id))
            .map(|r| text(r.get(id))),
    );
    if keys.is_empty() {
        return 0.0;
    }
    let mut matched = 0;
    for k in &keys {
        let want = last_text(expected, id, k, field).expect("key came from expected");
        if let Some(got) = last_text(processed, id, k, field) {
            if collapse(&got) == collapse(&want) {
                matched += 1;
            }
        }
    }
    matched as f64 / keys.len() as f64
}

// ---- imputation: exact reconstruction of the masked cells ----

fn num(v: Option<&Value>) -> Option<f64> {
    v.and_then(Value::as_f64)
}

pub fn oracle_imputation(candidate: &Table, gt: &Table, raw: &Table, atol: f64) -> f64 {
    if candidate.rows.len() != gt.rows.len() || candidate.columns.len() != gt.columns.len() {
        return 0.0;
    }
    if candidate.columns != gt.columns {
        return 0.0;
    }
    for i in 0..gt.rows.len() {
        for (j, col) in gt.columns.iter().enumerate() {
            let before = raw.rows[i].get(&raw.columns[j]);
            let after = candidate.rows[i].get(col);
            let was_missing = matches!(before, None | Some(Value::Null));
            if was_missing {
                match (num(after), num(gt.rows[i].get(col))) {
                    (Some(a), Some(g)) if (a - g).abs() <= atol => {}
                    _ => return 0.0,
                }
            } else if num(before) != num(after) {
                return 0.0;
            }
        }
    }
    1.0
}

// ---- dedup: first-occurrence F1 against gt keyed by id ----

fn same_fields(a: &Row, b: &Row) -> bool {
    a.len() == b.len()
        && a.iter().all(|(k, v)| match (v, b.get(k)) {
            (Value::Number(x), Some(Value::Number(y))) => x.as_f64() == y.as_f64(),
            (x, Some(y)) => x == y,
            (_, None) => false,
        })
}

pub fn oracle_dedup(gt: &[Row], predicted: &[Row], id: &str) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let gt_ids = distinct(gt.iter().map(|r| text(r.get(id))));
    let gt_row = |k: &str| gt.iter().rev().find(|r| text(r.get(id)) == k);
    let mut seen: Vec<String> = Vec::new();
    let mut fp = 0;
    for p in predicted {
        let k = text(p.get(id));
        if k.is_empty() || seen.contains(&k) {
            fp += 1;
            continue;
        }
        match gt_row(&k) {
            Some(g) if same_fields(p, g) => seen.push(k),
            _ => fp += 1,
        }
    }
    f1(seen.len(), fp, gt_ids.len() - seen.len())
}

// ---- integration: multiset equality of projections ----

pub fn oracle_integration(header: &[String], gt: &[Row], predicted: &[Row]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let project = |rows: &[Row]| -> Option<Vec<Vec<String>>> {
        let mut out = Vec::new();
        for r in rows {
            let mut cells = Vec::new();
            for c in header {
                cells.push(text(Some(r.get(c)?)));
            }
            out.push(cells);
        }
        out.sort();
        Some(out)
    };
    match (project(gt), project(predicted)) {
        (Some(a), Some(b)) if a == b => 1.0,
        _ => 0.0,
    }
}

// ---- classification: trimmed, case-sensitive label accuracy ----

pub fn oracle_classification(gt: &[Row], predicted: &[Row], id: &str, label: &str) -> f64 {
    let keys = distinct(gt.iter().map(|r| text(r.get(id)).trim().to_string()));
    if keys.is_empty() {
        return 0.0;
    }
    let lookup = |rows: &[Row], k: &str| {
        rows.iter()
            .rev()
            .find(|r| text(r.get(id)).trim() == k)
            .map(|r| text(r.get(label)).trim().to_string())
    };
    let correct = keys
        .iter()
        .filter(|k| lookup(predicted, k).is_some() && lookup(predicted, k) == lookup(gt, k))
        .count();
    correct as f64 / keys.len() as f64
}

// ---- generators ----

fn id_rows(ids: Vec<u8>) -> Vec<Row> {
    ids.into_iter().map(|i| row(json!({ "id": i }))).collect()
}

/// (expected, processed) id lists drawn from a small universe so that the
/// sets overlap often.
pub fn filtering_case() -> impl Strategy<Value = (Vec<Row>, Vec<Row>)> {
    (
        prop::collection::vec(0u8..40, 0..=MAX_ROWS),
        prop::collection::vec(0u8..40, 0..=MAX_ROWS),
    )
        .prop_map(|(e, p)| (id_rows(e), id_rows(p)))
}

fn phrase() -> impl Strategy<Value = String> {
    prop::string::string_regex("[ \t\n]{0,2}(ab|cd|<b>|x)([ \t]{1,2}(ab|cd|y)){0,2}[ \n]{0,2}")
        .unwrap()
}

pub fn refinement_case() -> impl Strategy<Value = (Vec<Row>, Vec<Row>)> {
    let rows = |n| prop::collection::vec((0u8..30, phrase()), n);
    (rows(1..=MAX_ROWS), rows(0..=MAX_ROWS)).prop_map(|(e, p)| {
        let make = |v: Vec<(u8, String)>| {
            v.into_iter()
                .map(|(i, t)| row(json!({ "id": i, "text": t })))
                .collect::<Vec<_>>()
        };
        (make(e), make(p))
    })
}

/// (candidate, gt, raw) over columns `id, a, b`. The raw table masks random
/// gt cells and the candidate fills them within tolerance. Half the cases
/// then get one defect: an unfilled, off-by-too-much or altered cell, a
/// dropped row or swapped columns.
pub fn imputation_case() -> impl Strategy<Value = (Table, Table, Table)> {
    let cell = (0i32..5, prop::bool::weighted(0.3), prop::bool::ANY);
    prop::collection::vec((cell.clone(), cell), 1..=MAX_ROWS)
        .prop_flat_map(|cells| {
            let n = cells.len();
            (Just(cells), prop::option::of((0..n, 1usize..3, 0u8..5)))
        })
        .prop_map(|(cells, defect)| {
            let columns: Vec<String> = ["id", "a", "b"].iter().map(|s| s.to_string()).collect();
            let (mut gt, mut raw, mut cand) = (Vec::new(), Vec::new(), Vec::new());
            for (i, cs) in cells.iter().enumerate() {
                let mut g = row(json!({ "id": i }));
                let mut r = g.clone();
                let mut c = g.clone();
                for (name, (v, masked, jitter)) in [("a", cs.0), ("b", cs.1)] {
                    let value = f64::from(v) / 2.0;
                    g.insert(name.into(), json!(value));
                    r.insert(name.into(), if masked { Value::Null } else { json!(value) });
                    let filled = if masked && jitter {
                        value + 5e-7
                    } else {
                        value
                    };
                    c.insert(name.into(), json!(filled));
                }
                gt.push(g);
                raw.push(r);
                cand.push(c);
            }
            let mut cand_cols = columns.clone();
            if let Some((i, j, kind)) = defect {
                let col = columns[j].clone();
                let value = gt[i][&col].as_f64().unwrap();
                match kind {
                    0 => {
                        cand[i].insert(col, Value::Null);
                    }
                    1 => {
                        cand[i].insert(col, json!(value + 3e-6));
                    }
                    2 => {
                        cand[i].insert(col, json!(value + 1.0));
                    }
                    3 => {
                        cand.pop();
                    }
                    _ => cand_cols.swap(1, 2),
                }
            }
            let t = |cols: Vec<String>, rows| Table::new(DataFormat::Jsonl, cols, rows);
            (t(cand_cols, cand), t(columns.clone(), gt), t(columns, raw))
        })
}

/// (gt, predicted) rows `{id, v}`. Predictions are either the gt in
/// reverse or a random stream that repeats, drops, alters or invents rows.
pub fn dedup_case() -> impl Strategy<Value = (Vec<Row>, Vec<Row>)> {
    let gt = prop::collection::vec(0u8..4, 1..=40).prop_map(|vs| {
        vs.into_iter()
            .enumerate()
            .map(|(i, v)| row(json!({ "id": i, "v": v })))
            .collect::<Vec<_>>()
    });
    gt.prop_flat_map(|gt| {
        let n = gt.len();
        let pick = prop::collection::vec((0..n + 5, 0u8..6), 0..=MAX_ROWS);
        (Just(gt), pick, prop::bool::weighted(0.2))
    })
    .prop_map(|(gt, picks, clean)| {
        if clean {
            let mut predicted = gt.clone();
            predicted.reverse();
            return (gt, predicted);
        }
        let predicted = picks
            .into_iter()
            .map(|(i, action)| match gt.get(i) {
                None => row(json!({ "id": i, "v": 0 })),
                Some(g) => match action {
                    0 => row(json!({ "id": i, "v": 9 })),
                    1 => row(json!({ "id": i, "v": g["v"].as_u64().unwrap() as f64 })),
                    2 => row(json!({ "id": null, "v": g["v"] })),
                    3 => row(json!({ "id": i, "v": g["v"], "extra": 1 })),
                    _ => g.clone(),
                },
            })
            .collect();
        (gt, predicted)
    })
}

/// (header, gt, predicted) where the prediction is a shuffled,
/// sometimes edited copy of the ground truth.
pub fn integration_case() -> impl Strategy<Value = (Vec<String>, Vec<Row>, Vec<Row>)> {
    let gt = prop::collection::vec((0u8..3, 0u8..3), 1..=MAX_ROWS).prop_map(|vs| {
        vs.into_iter()
            .map(|(a, b)| row(json!({ "a": format!("x{a}"), "b": b })))
            .collect::<Vec<_>>()
    });
    (gt, any::<u64>(), 0u8..8).prop_map(|(gt, seed, action)| {
        let mut pred = gt.clone();
        let n = pred.len();
        // Deterministic shuffle from the seed.
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            pred.swap(i, (s % (i as u64 + 1)) as usize);
        }
        match action {
            0 => {
                pred.pop();
            }
            1 => pred.push(gt[0].clone()),
            2 => {
                pred[0].insert("b".into(), json!(7));
            }
            3 => {
                pred[n - 1].remove("a");
            }
            4 => {
                for r in &mut pred {
                    r.insert("extra".into(), json!(true));
                }
            }
            5 => pred.clear(),
            _ => {}
        }
        (vec!["a".to_string(), "b".to_string()], gt, pred)
    })
}

/// (gt, predicted) `{id, label}` records with case flips, padding and gaps.
pub fn classification_case() -> impl Strategy<Value = (Vec<Row>, Vec<Row>)> {
    const LABELS: [&str; 6] = ["pos", "neg", " pos", "Pos", "neg  ", "neu"];
    let recs = |n| prop::collection::vec((0u8..50, 0usize..LABELS.len()), n);
    (recs(0..=MAX_ROWS), recs(0..=MAX_ROWS)).prop_map(|(g, p)| {
        let make = |v: Vec<(u8, usize)>| {
            v.into_iter()
                .map(|(i, l)| row(json!({ "id": i, "label": LABELS[l] })))
                .collect::<Vec<_>>()
        };
        (make(g), make(p))
    })
}

/// The bundled sample pack.
pub fn sample_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../packs/sample")
}
