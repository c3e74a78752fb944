use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use govdag_core::bench::evaluate_task;
use govdag_core::executor::load_library;
use govdag_core::gateway::{Pricing, RecordingGateway};
use govdag_core::metrics::{aggregate, load_run_log, render_json, render_markdown, DEFAULT_TAU};
use govdag_core::pack::TaskPack;
use govdag_core::pipeline::{
    asset_selftest, bench_build, open_gateway, plan_task, transcript_path, Backend, RunConfig,
    RunContext, SelftestStatus,
};
use govdag_core::planner::render_plan;
use govdag_core::sandbox::{Sandbox, SandboxLimits};

use crate::{
    BackendArgs, BenchCommand, BuildArgs, Command, EvalArgs, LibCheckArgs, LibCommand, PlanArgs,
    ReportArgs, RunArgs,
};

pub const EXIT_FAILURES: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Configuration problems exit with 2, anything else that stops a command
/// with 1.
pub fn exit_code_for(e: &anyhow::Error) -> ExitCode {
    let config = e.chain().any(|cause| {
        cause
            .downcast_ref::<govdag_core::Error>()
            .is_some_and(govdag_core::Error::is_configuration)
            || cause.downcast_ref::<UsageError>().is_some()
    });
    ExitCode::from(if config { EXIT_CONFIG } else { EXIT_FAILURES })
}

/// A flag combination the command cannot honour.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Plan(a) => plan(a),
        Command::Run(a) => run(a),
        Command::Bench(BenchCommand::Build(a)) => build(a),
        Command::Bench(BenchCommand::Eval(a)) => eval(a),
        Command::Report(a) => report(a),
        Command::Lib(LibCommand::Check(a)) => lib_check(a),
    }
}

fn open_pack(root: &Path) -> Result<TaskPack> {
    TaskPack::open(root).with_context(|| format!("opening pack {}", root.display()))
}

fn base_config(pack: &Path, b: &BackendArgs) -> RunConfig {
    let mut cfg = RunConfig {
        backend: b.backend,
        record: b.record.clone(),
        ..RunConfig::default()
    };
    if let Some(m) = &b.model {
        cfg.model_id = m.clone();
    }
    cfg.transcripts = match (&b.transcript, b.backend) {
        (Some(t), _) => Some(t.clone()),
        (None, Backend::Replay) => Some(pack.join("transcripts")),
        (None, _) => None,
    };
    cfg
}

fn plan(a: PlanArgs) -> Result<ExitCode> {
    let pack = open_pack(&a.pack)?;
    let mut cfg = base_config(&a.pack, &a.backend);
    cfg.ablation = a.ablate;
    if cfg.ablation == govdag_core::pipeline::Ablation::NoPlanner {
        return Err(usage(
            "`plan` is unavailable with --ablate no_planner: planning is disabled",
        ));
    }
    cfg.validate()?;
    let task = pack
        .task(&a.task)
        .ok_or_else(|| usage(format!("no task `{}` in {}", a.task, a.pack.display())))?;
    let variant = cfg.ablation.variant();
    let gateway = open_gateway(&cfg, variant, &task.id)?;
    let result = match &cfg.record {
        None => plan_task(&pack, task, &cfg, gateway.as_ref()),
        Some(root) => {
            let recorder = RecordingGateway::new(gateway);
            let result = plan_task(&pack, task, &cfg, &recorder);
            recorder
                .transcript()
                .save(&transcript_path(root, variant, &task.id))?;
            result
        }
    };
    let plan = match result {
        Ok(p) => p,
        Err(e @ govdag_core::Error::Planning(_)) => {
            eprintln!("planning failed for `{}`: {e}", task.id);
            return Ok(ExitCode::from(EXIT_FAILURES));
        }
        Err(e) => return Err(e.into()),
    };
    print!("{}", render_plan(&plan));
    if !plan.intent.feasible {
        return Ok(ExitCode::from(EXIT_CONFIG));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let pack = open_pack(&a.pack)?;
    let library = load_library(&a.pack.join("library"))?;
    let mut cfg = base_config(&a.pack, &a.backend);
    cfg.ablation = a.ablate;
    cfg.parallelism = a.parallel;
    if let Some(m) = a.max_iter {
        cfg.max_iter = m;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(t) = a.timeout {
        cfg.limits = SandboxLimits {
            wall_clock_s: t,
            ..SandboxLimits::default()
        };
    }
    cfg.validate()?;
    for id in &a.tasks {
        if pack.task(id).is_none() {
            return Err(usage(format!("no task `{id}` in {}", a.pack.display())));
        }
    }
    let pricing_path: Option<PathBuf> = a
        .pricing
        .clone()
        .or_else(|| Some(a.pack.join("pricing.toml")).filter(|p| p.is_file()));
    let pricing = pricing_path.as_deref().map(Pricing::load).transpose()?;
    let ctx = RunContext::new(&pack, &library, &cfg, pricing.as_ref());
    let result = govdag_core::pipeline::run_pack(&ctx, &a.tasks, &a.out)?;
    print!(
        "{}",
        render_markdown(&[(cfg.ablation.variant(), &result.report)])
    );
    let failed: Vec<_> = result
        .outcomes
        .iter()
        .filter(|o| !o.record.success)
        .collect();
    for o in &failed {
        eprintln!(
            "task `{}` failed (score {:.4}): {}",
            o.record.task_id,
            o.record.score,
            o.note.as_deref().unwrap_or("below the success threshold")
        );
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURES)
    })
}

fn build(a: BuildArgs) -> Result<ExitCode> {
    let cfg = base_config(&a.pack, &a.backend);
    let report = bench_build(&a.pack, &a.out, &cfg)?;
    println!(
        "built {} task(s) into {}",
        report.built.len(),
        a.out.display()
    );
    for id in &report.built {
        println!("  {id}");
    }
    if !report.quarantined.is_empty() {
        println!(
            "quarantined {} task(s) for manual repair:",
            report.quarantined.len()
        );
        for q in &report.quarantined {
            println!("  {}: {}", q.task_id, q.reason);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let pack = open_pack(&a.pack)?;
    let task = pack
        .task(&a.task)
        .ok_or_else(|| usage(format!("no task `{}` in {}", a.task, a.pack.display())))?;
    let verdict = evaluate_task(
        &pack,
        task,
        &a.prediction,
        &Sandbox::new(SandboxLimits::default()),
    )?;
    println!("{}: {:.4}", task.id, verdict.score);
    if let Some(reason) = &verdict.reason {
        println!("  {reason}");
    }
    Ok(if verdict.score >= DEFAULT_TAU {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURES)
    })
}

fn report(a: ReportArgs) -> Result<ExitCode> {
    if a.json && a.logs.len() > 1 {
        bail!(usage("--json takes a single run log"));
    }
    let mut reports = Vec::new();
    for path in &a.logs {
        let records = load_run_log(path)?;
        let report = aggregate(&records, DEFAULT_TAU)
            .with_context(|| format!("aggregating {}", path.display()))?;
        reports.push((path.display().to_string(), report));
    }
    if a.json {
        print!("{}", render_json(&reports[0].1));
    } else {
        let refs: Vec<(&str, _)> = reports.iter().map(|(l, r)| (l.as_str(), r)).collect();
        print!("{}", render_markdown(&refs));
    }
    Ok(ExitCode::SUCCESS)
}

fn lib_check(a: LibCheckArgs) -> Result<ExitCode> {
    let pack = open_pack(&a.pack)?;
    let dir = a.library.unwrap_or_else(|| a.pack.join("library"));
    let library = load_library(&dir)?;
    let results = asset_selftest(&pack, &library, &Sandbox::new(SandboxLimits::default()))?;
    let mut failed = 0;
    for r in &results {
        match &r.status {
            SelftestStatus::Passed => println!("pass  {}", r.card),
            SelftestStatus::Skipped => println!("skip  {} (no sample task)", r.card),
            SelftestStatus::Failed(why) => {
                failed += 1;
                println!("FAIL  {}: {why}", r.card);
            }
        }
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURES)
    })
}
