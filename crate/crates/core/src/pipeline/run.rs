use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::Serialize;

use super::{is_task_failure, open_gateway, Ablation, Backend, GatewayOpener, RunConfig};
use crate::bench::evaluate_task;
use crate::dag::topo_order;
use crate::error::{Error, Result};
use crate::executor::{
    build_codegen_prompt, generate_code, retrieve_ops, IoSpec, OperatorCard, Provenance,
    PROMPT_SAMPLE_ROWS,
};
use crate::gateway::{cost_of, LlmGateway, MeteredGateway, Pricing, RecordingGateway};
use crate::metrics::{aggregate, render_json, render_markdown, run_log_jsonl, ScoreReport};
use crate::model::{GovDag, OperatorNode, RunRecord, TaskSpec};
use crate::pack::TaskPack;
use crate::planner::{plan, Plan};
use crate::prompt::Llm;
use crate::sandbox::{debug_loop, ExecStatus, Sandbox, Stage, StagedFile};
use crate::table::{file_name, DataFormat, SchemaDescriptor, Table};

/// Read-only state shared by every task of a run.
pub struct RunContext<'a> {
    pub pack: &'a TaskPack,
    pub library: &'a [OperatorCard],
    pub cfg: &'a RunConfig,
    pub pricing: Option<&'a Pricing>,
    pub sandbox: Sandbox,
}

impl<'a> RunContext<'a> {
    pub fn new(
        pack: &'a TaskPack,
        library: &'a [OperatorCard],
        cfg: &'a RunConfig,
        pricing: Option<&'a Pricing>,
    ) -> Self {
        RunContext {
            pack,
            library,
            cfg,
            pricing,
            sandbox: Sandbox::new(cfg.limits.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub record: RunRecord,
    /// Measured sandbox time, kept even when the log omits it.
    pub measured_exec_time_s: f64,
    /// Why the task did not succeed, when known.
    pub note: Option<String>,
    /// Initial code-generation prompts issued (debug revisions excluded).
    pub codegen_prompts: usize,
    /// Final output file, by name.
    pub output: Option<(String, Vec<u8>)>,
}

struct Attempt {
    iterations: u32,
    runnable: bool,
    exec_time_s: f64,
    output: Option<Vec<u8>>,
    note: Option<String>,
    codegen_prompts: usize,
}

impl Attempt {
    fn failed(note: String) -> Self {
        Attempt {
            iterations: 1,
            runnable: false,
            exec_time_s: 0.0,
            output: None,
            note: Some(note),
            codegen_prompts: 0,
        }
    }
}

fn single_node_dag(task: &TaskSpec) -> GovDag {
    GovDag {
        nodes: vec![OperatorNode {
            id: "task-1".into(),
            abstract_op: task.objective.trim().to_string(),
            params: BTreeMap::new(),
            contract: Default::default(),
            repair: false,
        }],
        edges: Vec::new(),
    }
}

/// Plans one task from its inputs exactly as a full run does, so a run's
/// transcript also replays the planning stage on its own.
pub fn plan_task(
    pack: &TaskPack,
    task: &TaskSpec,
    cfg: &RunConfig,
    gateway: &dyn LlmGateway,
) -> Result<Plan> {
    if cfg.ablation == Ablation::NoPlanner {
        return Err(Error::Config(
            "planning is disabled by the no_planner ablation".into(),
        ));
    }
    let (schema, tables) = SchemaDescriptor::load(&pack.input_paths(task))?;
    let samples = tables[0].sample_lines(PROMPT_SAMPLE_ROWS);
    let params = cfg.params();
    plan(task, &schema, &samples, &Llm::new(gateway, &params))
}

fn attempt(ctx: &RunContext<'_>, task: &TaskSpec, llm: &Llm<'_>) -> Result<Attempt> {
    let paths = ctx.pack.input_paths(task);
    let (mut schema, tables) = SchemaDescriptor::load(&paths)?;
    let mut samples = tables[0].sample_lines(PROMPT_SAMPLE_ROWS);
    let out_name = file_name(Path::new(&task.ground_truth));

    let dag = if ctx.cfg.ablation == Ablation::NoPlanner {
        single_node_dag(task)
    } else {
        match plan(task, &schema, &samples, llm) {
            Ok(p) => match p.dag {
                Some(dag) => dag,
                None => {
                    let reason = p.intent.infeasibility_reason.unwrap_or_default();
                    return Ok(Attempt::failed(format!("infeasible: {reason}")));
                }
            },
            Err(e) if is_task_failure(&e) => return Ok(Attempt::failed(format!("planning: {e}"))),
            Err(e) => return Err(e),
        }
    };
    let order = topo_order(&dag)
        .map_err(|errs| Error::Planning(format!("planner produced an invalid DAG: {errs:?}")))?;

    let scratch = tempfile::Builder::new()
        .prefix("govdag-run-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let mut inputs: Vec<StagedFile> = paths.iter().map(|p| StagedFile::from_path(p)).collect();
    let mut result = Attempt {
        iterations: 0,
        runnable: false,
        exec_time_s: 0.0,
        output: None,
        note: None,
        codegen_prompts: 0,
    };
    for (i, id) in order.iter().enumerate() {
        let last = i + 1 == order.len();
        let node = dag.node(id).expect("topo ids are nodes");
        let exemplars = retrieve_ops(&node.goal(), ctx.library, ctx.cfg.effective_k());
        let io = IoSpec {
            inputs: inputs.iter().map(|f| f.name.clone()).collect(),
            output: out_name.clone(),
        };
        let prompt = build_codegen_prompt(node, &exemplars, &schema, &samples, &io);
        let provenance = if exemplars.is_empty() {
            Provenance::Free
        } else {
            Provenance::Rag
        };
        result.codegen_prompts += 1;
        let artifact = match generate_code(&node.id, &prompt, llm, provenance) {
            Ok(a) => a,
            Err(e) if is_task_failure(&e) => {
                result.iterations += 1;
                result.runnable = false;
                result.note = Some(format!("{}: {e}", node.id));
                break;
            }
            Err(e) => return Err(e),
        };
        let stage = Stage {
            sandbox: &ctx.sandbox,
            inputs: inputs.clone(),
            output: out_name.clone(),
            task_context: task.objective.trim().to_string(),
        };
        let report = debug_loop(node, artifact, &stage, ctx.cfg.max_iter, llm)?;
        result.iterations += report.iterations;
        result.exec_time_s += report.exec_time_s;
        result.runnable = report.outcome.status == ExecStatus::Ok;
        if !report.passed() {
            let why = report
                .aborted
                .clone()
                .or_else(|| report.problem.clone())
                .unwrap_or_else(|| {
                    if report.outcome.status != ExecStatus::Ok {
                        format!("ended with {:?}", report.outcome.status)
                    } else {
                        format!("{} post-condition(s) still violated", report.violated.len())
                    }
                });
            result.note = Some(format!(
                "{}: {why} after {} cycle(s)",
                node.id, report.iterations
            ));
            if last {
                result.output = report.output;
            }
            break;
        }
        let bytes = report.output.expect("a passed report has output");
        if last {
            result.output = Some(bytes);
            break;
        }
        let dir = scratch.path().join(format!("step-{}", i + 1));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(&out_name);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        let format = DataFormat::from_path(&path).unwrap_or(DataFormat::Csv);
        let table = Table::parse(&String::from_utf8_lossy(&bytes), format)
            .map_err(|m| Error::data(&path, m))?;
        schema = SchemaDescriptor::from_tables([(out_name.as_str(), &table)]);
        samples = table.sample_lines(PROMPT_SAMPLE_ROWS);
        inputs = vec![StagedFile::named(&out_name, &path)];
    }
    result.iterations = result.iterations.max(1);
    Ok(result)
}

/// Runs one task end to end and scores its final output.
pub fn run_task(
    ctx: &RunContext<'_>,
    task: &TaskSpec,
    gateway: &dyn LlmGateway,
) -> Result<TaskOutcome> {
    let metered = MeteredGateway::new(gateway);
    let params = ctx.cfg.params();
    let llm = Llm::new(&metered, &params);
    let attempt = attempt(ctx, task, &llm)?;

    let out_name = file_name(Path::new(&task.ground_truth));
    let (score, mut note) = match &attempt.output {
        Some(bytes) => {
            let dir = tempfile::Builder::new()
                .prefix("govdag-score-")
                .tempdir()
                .map_err(|e| Error::io(std::env::temp_dir(), e))?;
            let path = dir.path().join(&out_name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            let verdict = evaluate_task(ctx.pack, task, &path, &ctx.sandbox)?;
            (verdict.score, verdict.reason)
        }
        None => (0.0, None),
    };
    if attempt.note.is_some() {
        note = attempt.note.clone();
    }

    let completions = metered.completions();
    let tokens = completions.iter().map(|c| c.total_tokens()).sum();
    let cost = match ctx.pricing {
        Some(p) => cost_of(&completions, p)?,
        None => 0.0,
    };
    let gen_time_s = completions.iter().map(|c| c.latency_s).sum();
    // Sandbox timings vary between runs; replayed logs leave them out so
    // that identical transcripts give identical logs.
    let exec_time_s = if ctx.cfg.backend == Backend::Replay {
        0.0
    } else {
        attempt.exec_time_s
    };
    let success = score >= ctx.cfg.tau && attempt.runnable;
    Ok(TaskOutcome {
        record: RunRecord {
            task_id: task.id.clone(),
            debug_iterations: attempt.iterations,
            tokens,
            gen_time_s,
            exec_time_s,
            cost,
            score,
            runnable: attempt.runnable,
            success,
        },
        measured_exec_time_s: attempt.exec_time_s,
        note,
        codegen_prompts: attempt.codegen_prompts,
        output: attempt.output.map(|b| (out_name, b)),
    })
}

#[derive(Debug, Clone)]
pub struct PackRun {
    pub outcomes: Vec<TaskOutcome>,
    pub report: ScoreReport,
}

impl PackRun {
    pub fn records(&self) -> Vec<RunRecord> {
        self.outcomes.iter().map(|o| o.record.clone()).collect()
    }

    pub fn all_succeeded(&self) -> bool {
        self.outcomes.iter().all(|o| o.record.success)
    }
}

#[derive(Serialize)]
struct Detail<'a> {
    task_id: &'a str,
    exec_time_s: f64,
    codegen_prompts: usize,
    note: Option<&'a str>,
}

fn run_one(ctx: &RunContext<'_>, task: &TaskSpec, open: &GatewayOpener<'_>) -> Result<TaskOutcome> {
    let cfg = ctx.cfg;
    let gateway = open(task)?;
    tracing::info!(task = %task.id, "running");
    let Some(root) = &cfg.record else {
        return run_task(ctx, task, gateway.as_ref());
    };
    let recorder = RecordingGateway::new(gateway);
    let outcome = run_task(ctx, task, &recorder);
    let path = super::transcript_path(root, cfg.ablation.variant(), &task.id);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    recorder.transcript().save(&path)?;
    outcome
}

/// Runs the selected tasks (all when `only` is empty) with at most
/// `parallelism` concurrent pipelines and writes `run.jsonl`,
/// `details.jsonl`, `report.json`, `report.md` and final outputs to `out`.
/// Records are always in pack order.
pub fn run_pack(ctx: &RunContext<'_>, only: &[String], out: &Path) -> Result<PackRun> {
    let cfg = ctx.cfg;
    run_pack_with(ctx, only, out, &|task: &TaskSpec| {
        open_gateway(cfg, cfg.ablation.variant(), &task.id)
    })
}

/// [`run_pack`] with a caller-supplied backend per task.
pub fn run_pack_with(
    ctx: &RunContext<'_>,
    only: &[String],
    out: &Path,
    open: &GatewayOpener<'_>,
) -> Result<PackRun> {
    ctx.cfg.validate()?;
    for id in only {
        if ctx.pack.task(id).is_none() {
            return Err(Error::Config(format!("no task `{id}` in the pack")));
        }
    }
    let tasks: Vec<&TaskSpec> = ctx
        .pack
        .tasks
        .iter()
        .filter(|t| only.is_empty() || only.contains(&t.id))
        .collect();
    if tasks.is_empty() {
        return Err(Error::Config("the pack has no tasks to run".into()));
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<TaskOutcome>>>> =
        Mutex::new((0..tasks.len()).map(|_| None).collect());
    let workers = ctx.cfg.parallelism.min(tasks.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let outcome = run_one(ctx, task, open);
                slots.lock().expect("result lock")[i] = Some(outcome);
            });
        }
    });
    let outcomes = slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|o| o.expect("every task ran"))
        .collect::<Result<Vec<_>>>()?;

    let records: Vec<RunRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let report = aggregate(&records, ctx.cfg.tau)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let write = |name: &str, text: &str| {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("run.jsonl", &run_log_jsonl(&records))?;
    let details: String = outcomes
        .iter()
        .map(|o| {
            serde_json::to_string(&Detail {
                task_id: &o.record.task_id,
                exec_time_s: o.measured_exec_time_s,
                codegen_prompts: o.codegen_prompts,
                note: o.note.as_deref(),
            })
            .expect("detail serializes")
                + "\n"
        })
        .collect();
    write("details.jsonl", &details)?;
    write("report.json", &render_json(&report))?;
    write("report.md", &render_markdown(&[("run", &report)]))?;
    for o in &outcomes {
        if let Some((name, bytes)) = &o.output {
            let dir = out.join("outputs").join(&o.record.task_id);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            fs::write(dir.join(name), bytes).map_err(|e| Error::io(dir.join(name), e))?;
        }
    }
    Ok(PackRun { outcomes, report })
}
