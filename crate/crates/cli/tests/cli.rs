use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use govdag_core::gateway::{MockGateway, RecordingGateway};
use govdag_core::pack::TaskPack;
use govdag_core::pipeline::{plan_task, transcript_path, RunConfig};
use serde_json::{json, Value};

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../packs/sample")
}

fn govdag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_govdag"))
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("GOVDAG_LLM_BASE_URL")
        .env_remove("GOVDAG_LLM_API_KEY")
        .output()
        .expect("govdag runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const REFINE_DATE_PLAN: &str = "\
goal: Rewrite every `date` value in the YYYY-MM-DD format.
columns: date
nodes:
  standardize-date-format-1: Standardize Date Format
    param column = \"date\"
    param format = \"YYYY-MM-DD\"
    pre  column_exists(date)
    post value_format(date, YYYY-MM-DD)
edges:
violations before repair: 0
repairs inserted: 0
";

#[test]
fn plan_replays_to_a_stable_dag() {
    let pack = sample();
    let o = govdag(&["plan", "--pack", s(&pack), "--task", "refine-date"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), REFINE_DATE_PLAN);
}

#[test]
fn dag_plan_output_is_deterministic() {
    let pack = sample();
    let o = govdag(&["plan", "--pack", s(&pack), "--task", "dag-clean-posts"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.contains("strip-html-tags-2 -> filter-blocked-words-3"),
        "{out}"
    );
    let again = stdout(&govdag(&[
        "plan",
        "--pack",
        s(&pack),
        "--task",
        "dag-clean-posts",
    ]));
    assert_eq!(out, again);
}

#[test]
fn infeasible_plan_exits_two() {
    let pack_root = sample();
    let pack = TaskPack::open(&pack_root).unwrap();
    let task = pack.task("refine-date").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let reply = r#"{"normalized_goal": "Translate dates to Klingon", "feasible": false, "reason": "no column holds the target language", "referenced_columns": []}"#;
    let recorder = RecordingGateway::new(MockGateway::scripted(move |_, _| reply.to_string()));
    let plan = plan_task(&pack, task, &RunConfig::default(), &recorder).unwrap();
    assert!(!plan.intent.feasible);
    recorder
        .transcript()
        .save(&transcript_path(dir.path(), "full", &task.id))
        .unwrap();

    let o = govdag(&[
        "plan",
        "--pack",
        s(&pack_root),
        "--task",
        "refine-date",
        "--transcript",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("Translate dates to Klingon"));
}

#[test]
fn plan_refuses_the_no_planner_ablation() {
    let pack = sample();
    let o = govdag(&[
        "plan",
        "--pack",
        s(&pack),
        "--task",
        "refine-date",
        "--ablate",
        "no_planner",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_planner"));
}

#[test]
fn unknown_task_and_bad_flags_are_usage_errors() {
    let pack = sample();
    let o = govdag(&["plan", "--pack", s(&pack), "--task", "no-such-task"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(govdag(&["run", "--pack", s(&pack)]).status.code(), Some(2));
    assert_eq!(govdag(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(govdag(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_replay_succeeds_and_writes_artifacts() {
    let pack = sample();
    let out = tempfile::tempdir().unwrap();
    let o = govdag(&[
        "run",
        "--pack",
        s(&pack),
        "--out",
        s(out.path()),
        "--parallel",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("| TSR | 100.00 |"), "{table}");
    assert!(table.contains("| Tasks | 15 |"), "{table}");
    for f in ["run.jsonl", "details.jsonl", "report.json", "report.md"] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
    assert!(out.path().join("outputs").is_dir());
}

#[test]
fn run_selected_task_only() {
    let pack = sample();
    let out = tempfile::tempdir().unwrap();
    let o = govdag(&[
        "run",
        "--pack",
        s(&pack),
        "--out",
        s(out.path()),
        "--task",
        "impute-mean",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = fs::read_to_string(out.path().join("run.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(log.contains("\"impute-mean\""));
}

#[test]
fn live_backend_without_endpoint_is_a_configuration_error() {
    let pack = sample();
    let out = tempfile::tempdir().unwrap();
    let o = govdag(&[
        "run",
        "--pack",
        s(&pack),
        "--out",
        s(out.path()),
        "--backend",
        "live",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_transcript_is_a_configuration_error() {
    let pack = sample();
    let empty = tempfile::tempdir().unwrap();
    let o = govdag(&[
        "plan",
        "--pack",
        s(&pack),
        "--task",
        "refine-date",
        "--transcript",
        s(empty.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

fn record(id: usize, score: f64, runnable: bool, d: u32, tokens: u64) -> Value {
    json!({
        "task_id": format!("t{id:03}"),
        "debug_iterations": d,
        "tokens": tokens,
        "gen_time_s": 1.0,
        "exec_time_s": 0.5,
        "cost": 0.01,
        "score": score,
        "runnable": runnable,
        "success": score >= 0.99,
    })
}

/// 60 successes, 14 runnable failures and 26 crashes; 71 tasks took three
/// iterations and 29 took four; one task used 28 fewer tokens.
fn crafted_log(path: &Path) {
    let mut lines = String::new();
    for i in 0..100 {
        let (score, runnable) = match i {
            0..=59 => (1.0, true),
            60..=73 => (0.5, true),
            _ => (0.0, false),
        };
        let d = if i < 71 { 3 } else { 4 };
        let tokens = if i == 0 { 34276 } else { 34304 };
        lines.push_str(&record(i, score, runnable, d, tokens).to_string());
        lines.push('\n');
    }
    fs::write(path, lines).unwrap();
}

#[test]
fn report_reproduces_reference_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    crafted_log(&log);
    let o = govdag(&["report", "--json", s(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let close = |k: &str, want: f64, tol: f64| {
        let got = r[k].as_f64().unwrap();
        assert!((got - want).abs() <= tol, "{k}: {got} vs {want}");
    };
    close("tsr", 60.0, 1e-9);
    close("crr", 74.0, 1e-9);
    close("adi", 3.29, 1e-9);
    close("avg_tokens", 34303.72, 1e-6);
    close("alignment", 0.81, 0.01);
    close("debug_efficiency", 18.24, 0.01);
    close("tokens_per_success", 57173.0, 1.0);
    close("contract_gap", 14.0, 1e-9);
    assert_eq!(r["n_tasks"], 100);
}

#[test]
fn report_compares_two_logs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    crafted_log(&a);
    fs::write(&b, format!("{}\n", record(0, 1.0, true, 1, 100))).unwrap();
    let o = govdag(&["report", s(&a), s(&b)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("| TSR | 60.00 | 100.00 |"), "{out}");
    assert_eq!(
        govdag(&["report", "--json", s(&a), s(&b)]).status.code(),
        Some(2)
    );
}

#[test]
fn report_rejects_an_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    fs::write(&log, "").unwrap();
    let o = govdag(&["report", s(&log)]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("error"));
}

#[test]
fn bench_eval_scores_ground_truth_and_noise() {
    let pack = sample();
    let task = pack.join("tasks/filter-profanity/data");
    let o = govdag(&[
        "bench",
        "eval",
        "--pack",
        s(&pack),
        "--task",
        "filter-profanity",
        s(&task.join("gt/comments.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("filter-profanity: 1.0000"));
    let o = govdag(&[
        "bench",
        "eval",
        "--pack",
        s(&pack),
        "--task",
        "filter-profanity",
        s(&task.join("noisy/comments.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn bench_build_refuses_a_non_empty_output() {
    let pack = sample();
    let out = tempfile::tempdir().unwrap();
    fs::write(out.path().join("keep.txt"), "x").unwrap();
    let o = govdag(&["bench", "build", "--pack", s(&pack), "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(out.path().join("keep.txt").is_file());
}

#[test]
fn lib_check_passes_the_bundled_library() {
    let pack = sample();
    let o = govdag(&["lib", "check", "--pack", s(&pack)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(
        out.lines().filter(|l| l.starts_with("pass")).count(),
        11,
        "{out}"
    );
    assert!(out.contains("skip  cast-column-type"));
}
