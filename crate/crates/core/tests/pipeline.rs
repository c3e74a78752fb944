mod common;

use std::fs;
use std::path::Path;

use common::sample_root;
use govdag_core::executor::{load_library, CodeArtifact, EXEMPLAR_HEADER};
use govdag_core::gateway::{LlmGateway, MockGateway};
use govdag_core::model::{Level, TaskSpec};
use govdag_core::pack::TaskPack;
use govdag_core::pipeline::{
    asset_selftest, bench_build, bench_build_with, run_pack, Ablation, Backend, PackRun, RunConfig,
    RunContext, SelftestStatus, QUARANTINE_INDEX,
};
use govdag_core::sandbox::{ExecStatus, Sandbox, SandboxLimits, StagedFile};

fn replay(ablation: Ablation, record: Option<&Path>) -> RunConfig {
    RunConfig {
        backend: Backend::Replay,
        transcripts: Some(sample_root().join("transcripts")),
        ablation,
        record: record.map(Path::to_path_buf),
        ..RunConfig::default()
    }
}

fn run(cfg: &RunConfig, out: &Path) -> PackRun {
    let pack = TaskPack::open(&sample_root()).unwrap();
    let library = load_library(&sample_root().join("library")).unwrap();
    let ctx = RunContext::new(&pack, &library, cfg, None);
    run_pack(&ctx, &[], out).unwrap()
}

#[test]
fn replay_completes_every_task() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = replay(Ablation::None, None);
    let first = run(&cfg, &dir.path().join("a"));
    assert!(first.all_succeeded());
    assert_eq!(first.report.n_tasks, 15);
    assert_eq!(first.report.tsr, 100.0);
    assert_eq!(first.report.crr, 100.0);
    assert!(first.report.adi <= 3.0, "ADI {}", first.report.adi);

    let pack = TaskPack::open(&sample_root()).unwrap();
    let retried: Vec<&str> = first
        .outcomes
        .iter()
        .filter(|o| {
            o.record.debug_iterations == 2
                && pack.task(&o.record.task_id).unwrap().level == Level::Operator
        })
        .map(|o| o.record.task_id.as_str())
        .collect();
    assert_eq!(retried, ["impute-mean", "refine-date"]);

    let second = run(&cfg, &dir.path().join("b"));
    let log = |d: &str| fs::read(dir.path().join(d).join("run.jsonl")).unwrap();
    assert_eq!(log("a"), log("b"));
    assert_eq!(first.records(), second.records());
}

#[test]
fn run_writes_reports_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run(&replay(Ablation::None, None), dir.path());
    for f in ["run.jsonl", "details.jsonl", "report.json", "report.md"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let gt = sample_root().join("tasks/impute-mean/data/gt/readings.csv");
    let out = dir.path().join("outputs/impute-mean/readings.csv");
    assert_eq!(fs::read(out).unwrap(), fs::read(gt).unwrap());
}

#[test]
fn no_planner_issues_one_codegen_prompt_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&replay(Ablation::NoPlanner, None), dir.path());
    assert!(r.all_succeeded());
    assert!(r.outcomes.iter().all(|o| o.codegen_prompts == 1));
}

#[test]
fn no_rag_prompts_carry_no_exemplars() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec");
    let r = run(
        &replay(Ablation::NoRag, Some(&rec)),
        &dir.path().join("out"),
    );
    assert!(r.all_succeeded());
    let mut full = 0;
    for entry in fs::read_dir(rec.join("no_rag")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert_eq!(text.matches(EXEMPLAR_HEADER).count(), 0);
    }
    let r = run(
        &replay(Ablation::None, Some(&rec)),
        &dir.path().join("out2"),
    );
    assert!(r.all_succeeded());
    for entry in fs::read_dir(rec.join("full")).unwrap() {
        full += fs::read_to_string(entry.unwrap().path())
            .unwrap()
            .matches(EXEMPLAR_HEADER)
            .count();
    }
    assert!(full > 0);
}

#[test]
fn bench_build_replay_reproduces_the_pack() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("built");
    let cfg = RunConfig {
        transcripts: Some(sample_root().join("transcripts")),
        ..RunConfig::default()
    };
    let report = bench_build(&sample_root(), &out, &cfg).unwrap();
    assert_eq!(report.built.len(), 15);
    assert!(report.quarantined.is_empty());
    assert_eq!(
        fs::read_to_string(out.join(QUARANTINE_INDEX))
            .unwrap()
            .trim(),
        "[]"
    );
    let pack = TaskPack::open(&sample_root()).unwrap();
    for task in &pack.tasks {
        for input in &task.inputs {
            let a = fs::read(pack.resolve(task, input)).unwrap();
            let b = fs::read(out.join("tasks").join(&task.id).join(input)).unwrap();
            assert_eq!(a, b, "{} {input}", task.id);
        }
    }
    // The output directory must start empty.
    assert!(bench_build(&sample_root(), &out, &cfg)
        .unwrap_err()
        .is_configuration());
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &dest);
        } else {
            fs::copy(entry.path(), dest).unwrap();
        }
    }
}

#[test]
fn identity_noise_is_quarantined_with_its_dag() {
    let dir = tempfile::tempdir().unwrap();
    let seed = dir.path().join("seed");
    fs::create_dir_all(&seed).unwrap();
    fs::copy(sample_root().join("pack.toml"), seed.join("pack.toml")).unwrap();
    for id in [
        "filter-symbols",
        "refine-html",
        "filter-profanity",
        "dag-clean-posts",
    ] {
        copy_tree(
            &sample_root().join("tasks").join(id),
            &seed.join("tasks").join(id),
        );
    }
    let fixtures = sample_root().join("fixtures");
    let opener = |task: &TaskSpec| {
        let noise = if task.id == "filter-profanity" {
            "import shutil\nshutil.copy('inputs/comments.jsonl', 'out/comments.jsonl')\n"
                .to_string()
        } else {
            fs::read_to_string(fixtures.join(&task.id).join("noise.py")).unwrap()
        };
        let reversed = fs::read_to_string(fixtures.join(&task.id).join("reversed.txt")).unwrap();
        let gw = MockGateway::scripted(move |prompt, _| {
            if prompt.contains("## Disruption") {
                format!("```python\n{noise}```\n")
            } else {
                reversed.clone()
            }
        });
        Ok(Box::new(gw) as Box<dyn LlmGateway>)
    };
    let out = dir.path().join("out");
    let cfg = RunConfig {
        backend: Backend::Mock,
        ..RunConfig::default()
    };
    let report = bench_build_with(&seed, &out, &cfg, &opener).unwrap();
    assert_eq!(report.built, ["filter-symbols", "refine-html"]);
    let ids: Vec<&str> = report
        .quarantined
        .iter()
        .map(|q| q.task_id.as_str())
        .collect();
    assert_eq!(ids, ["filter-profanity", "dag-clean-posts"]);
    assert_eq!(report.quarantined[0].noisy_score, Some(1.0));
    assert!(report.quarantined[1].reason.contains("filter-profanity"));
    assert!(out
        .join("quarantine/filter-profanity/manifest.json")
        .is_file());
    assert!(!out.join("tasks/filter-profanity").exists());
    let index = fs::read_to_string(out.join(QUARANTINE_INDEX)).unwrap();
    assert!(index.contains("consistency gate failed"));
    assert_eq!(TaskPack::open(&out).unwrap().tasks.len(), 2);
}

#[test]
fn library_selftest() {
    let pack = TaskPack::open(&sample_root()).unwrap();
    let library = load_library(&sample_root().join("library")).unwrap();
    let results = asset_selftest(&pack, &library, &Sandbox::new(SandboxLimits::default())).unwrap();
    assert_eq!(results.len(), 12);
    for r in &results {
        let want = if r.card == "cast-column-type" {
            SelftestStatus::Skipped
        } else {
            SelftestStatus::Passed
        };
        assert_eq!(r.status, want, "{}", r.card);
    }
}

#[test]
fn cast_column_type_snippet() {
    let library = load_library(&sample_root().join("library")).unwrap();
    let card = library
        .iter()
        .find(|c| c.name == "cast-column-type")
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("table.csv");
    fs::write(&input, "id,qty\n1,3.0\n2,\n3, 7 \n").unwrap();
    let sandbox = Sandbox::new(SandboxLimits::default());
    let run = sandbox
        .run(
            &CodeArtifact::python(&card.name, &card.snippet),
            &[StagedFile::from_path(&input)],
        )
        .unwrap();
    assert_eq!(run.outcome.status, ExecStatus::Ok);
    assert_eq!(run.outputs["table.csv"], b"id,qty\n1,3\n2,\n3,7\n");
}

#[test]
fn consistency_gate_holds_for_every_task() {
    let pack = TaskPack::open(&sample_root()).unwrap();
    let sandbox = Sandbox::new(SandboxLimits::default());
    for task in &pack.tasks {
        let c = govdag_core::bench::consistency_check(&pack, task, &sandbox).unwrap();
        assert!(
            c.pass,
            "{}: gt {} noisy {}",
            task.id, c.gt_score, c.noisy_score
        );
        assert_eq!(c.gt_score, 1.0, "{}", task.id);
    }
}

#[test]
fn bundled_dag_manifests_match_composition() {
    let pack = TaskPack::open(&sample_root()).unwrap();
    let dags: Vec<&TaskSpec> = pack
        .tasks
        .iter()
        .filter(|t| t.level == Level::Dag)
        .collect();
    assert_eq!(dags.len(), 3);
    for dag in dags {
        let steps = dag.dag_composition.as_ref().unwrap();
        assert!((3..=4).contains(&steps.len()));
        let seeds: Vec<&str> = steps.iter().map(|s| s.subtask.as_str()).collect();
        let composed = govdag_core::bench::compose_dag_task(&dag.id, &seeds, &pack).unwrap();
        assert_eq!(&composed.spec, dag);
        for s in steps {
            assert_eq!(
                Some(&s.frozen_score),
                pack.config.frozen_scores.get(&s.subtask)
            );
        }
    }
}
