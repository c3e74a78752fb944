//! Regenerates the sample pack's derived assets from its hand-written
//! fixtures: DAG manifests, noisy inputs and noise recipes, and the replay
//! transcripts for the benchmark build and every run variant.
//!
//! A scripted model answers each prompt from `fixtures/<task>/`:
//! `plan.json` for planning, `code/<node>.py` for code generation (with an
//! optional `code/<node>.buggy.py` served first), `reversed.txt` and
//! `noise.py` for the benchmark build.
//!
//! Usage: cargo run -p govdag-core --example author_fixtures [pack-dir]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use govdag_core::bench::compose_dag_task;
use govdag_core::error::{Error, Result};
use govdag_core::executor::load_library;
use govdag_core::gateway::{LlmGateway, MockGateway};
use govdag_core::model::{Level, TaskSpec};
use govdag_core::pack::{write_manifest, TaskPack, TASKS_DIR};
use govdag_core::pipeline::{
    bench_build_with, run_pack_with, Ablation, Backend, RunConfig, RunContext,
};
use serde_json::Value;

const DAGS: &[(&str, &[&str])] = &[
    (
        "dag-clean-posts",
        &["filter-symbols", "refine-html", "filter-profanity"],
    ),
    (
        "dag-triage-tickets",
        &["dedup-exact", "refine-date", "classify-priority"],
    ),
    (
        "dag-moderate-feedback",
        &[
            "filter-profanity",
            "refine-html",
            "dedup-exact",
            "classify-sentiment",
        ],
    ),
];

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn fenced(code: &str) -> String {
    format!("```python\n{code}```\n")
}

/// Answers the benchmark-build prompts of one task.
fn bench_model(fixtures: PathBuf) -> MockGateway {
    MockGateway::scripted(move |prompt, _| {
        if prompt.contains("## Disruption") {
            fenced(&read(&fixtures.join("noise.py")))
        } else if prompt.contains("## Task objective") && prompt.contains("disrupted") {
            read(&fixtures.join("reversed.txt"))
        } else {
            panic!("unexpected benchmark prompt:\n{prompt}")
        }
    })
}

/// Answers the planning, code-generation and feedback prompts of one task.
fn run_model(fixtures: PathBuf) -> MockGateway {
    let plan: Value = serde_json::from_str(&read(&fixtures.join("plan.json"))).expect("plan.json");
    let node = Mutex::new(String::new());
    let served_buggy = Mutex::new(Vec::<String>::new());
    MockGateway::scripted(move |prompt, _| {
        let code_dir = fixtures.join("code");
        let fixed = |id: &str| {
            let path = code_dir.join(format!("{id}.py"));
            if path.is_file() || id != "task-1" {
                return read(&path);
            }
            // A single-operator task reuses its planned script when the
            // planner is switched off.
            let op = plan["operators"][0]["op"].as_str().expect("op name");
            read(&code_dir.join(format!("{}-1.py", govdag_core::planner::slug(op))))
        };
        if prompt.contains("## Revision advice") {
            let id = node.lock().unwrap().clone();
            return fenced(&fixed(&id));
        }
        if prompt.contains("## Predicate vocabulary") {
            return serde_json::json!({ "operators": plan["operators"] }).to_string();
        }
        if let Some(rest) = prompt.split("Node id: ").nth(1) {
            let id = rest.lines().next().unwrap_or_default().trim().to_string();
            *node.lock().unwrap() = id.clone();
            let buggy = code_dir.join(format!("{id}.buggy.py"));
            let mut served = served_buggy.lock().unwrap();
            if buggy.is_file() && !served.contains(&id) {
                served.push(id);
                return fenced(&read(&buggy));
            }
            return fenced(&fixed(&id));
        }
        if prompt.contains("\"normalized_goal\"") {
            return plan["intent"].to_string();
        }
        panic!("unexpected run prompt:\n{prompt}")
    })
}

fn copy_dir(from: &Path, to: &Path) -> Result<()> {
    fs::create_dir_all(to).map_err(|e| Error::Config(format!("{}: {e}", to.display())))?;
    for entry in
        fs::read_dir(from).map_err(|e| Error::Config(format!("{}: {e}", from.display())))?
    {
        let entry = entry.map_err(|e| Error::Config(e.to_string()))?;
        let dest = to.join(entry.file_name());
        fs::copy(entry.path(), &dest)
            .map_err(|e| Error::Config(format!("{}: {e}", dest.display())))?;
    }
    Ok(())
}

fn remove(path: &Path) {
    if path.exists() {
        fs::remove_dir_all(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

fn main() -> Result<()> {
    let root: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../packs/sample"));
    let root = root
        .canonicalize()
        .map_err(|e| Error::Config(format!("{}: {e}", root.display())))?;
    let fixtures = root.join("fixtures");
    let transcripts = root.join("transcripts");

    let ops = TaskPack::open(&root)?;
    for (id, seeds) in DAGS {
        let composed = compose_dag_task(id, seeds, &ops)?;
        for w in &composed.warnings {
            println!("{id}: {w}");
        }
        write_manifest(&root.join(TASKS_DIR).join(id), &composed.spec)?;
    }

    let pack = TaskPack::open(&root)?;
    for task in &pack.tasks {
        remove(&pack.task_dir(&task.id).join("data/noisy"));
        remove(&pack.task_dir(&task.id).join("noise"));
    }
    remove(&transcripts);

    let scratch = tempfile::tempdir().map_err(|e| Error::Config(e.to_string()))?;
    let built = scratch.path().join("built");
    let cfg = RunConfig {
        backend: Backend::Mock,
        record: Some(transcripts.clone()),
        ..RunConfig::default()
    };
    let report = bench_build_with(&root, &built, &cfg, &|task: &TaskSpec| {
        Ok(Box::new(bench_model(fixtures.join(&task.id))) as Box<dyn LlmGateway>)
    })?;
    println!(
        "bench build: {} built, {} quarantined",
        report.built.len(),
        report.quarantined.len()
    );
    for q in &report.quarantined {
        println!("  quarantined {}: {}", q.task_id, q.reason);
    }
    if !report.quarantined.is_empty() {
        return Err(Error::Config(
            "fixtures must pass the consistency gate".into(),
        ));
    }
    for task in &pack.tasks {
        let from = built.join(TASKS_DIR).join(&task.id);
        let to = pack.task_dir(&task.id);
        copy_dir(&from.join("data/noisy"), &to.join("data/noisy"))?;
        copy_dir(&from.join("noise"), &to.join("noise"))?;
    }

    let pack = TaskPack::open(&root)?;
    let library = load_library(&root.join("library"))?;
    for ablation in [Ablation::None, Ablation::NoRag, Ablation::NoPlanner] {
        let cfg = RunConfig {
            backend: Backend::Mock,
            ablation,
            record: Some(transcripts.clone()),
            ..RunConfig::default()
        };
        let ctx = RunContext::new(&pack, &library, &cfg, None);
        let out = scratch.path().join(ablation.variant());
        let run = run_pack_with(&ctx, &[], &out, &|task: &TaskSpec| {
            Ok(Box::new(run_model(fixtures.join(&task.id))) as Box<dyn LlmGateway>)
        })?;
        let dag = pack.tasks.iter().filter(|t| t.level == Level::Dag).count();
        println!(
            "{}: TSR {:.2}, ADI {:.2} over {} tasks ({dag} DAG-level)",
            ablation.variant(),
            run.report.tsr,
            run.report.adi,
            run.report.n_tasks
        );
        for o in run.outcomes.iter().filter(|o| !o.record.success) {
            println!(
                "  {} failed: {}",
                o.record.task_id,
                o.note.as_deref().unwrap_or("?")
            );
        }
        if !run.all_succeeded() {
            return Err(Error::Config(format!(
                "{} fixtures must succeed",
                ablation.variant()
            )));
        }
    }
    Ok(())
}
