//! Evaluator side of the assembly line: isolated script execution, contract
//! checks on produced data, structured feedback, and the debug loop.

mod feedback;
mod process;
mod trace;

pub use feedback::{build_feedback, check_post, debug_loop, DebugReport, Diagnostic, Stage};
pub use process::{
    run_sandboxed, ExecStatus, ExecutionOutcome, Interpreter, InterpreterTable, Network, Sandbox,
    SandboxLimits, SandboxRun, StagedFile, STREAM_CAP,
};
pub use trace::parse_traceback;

/// Default cap on generate, execute, evaluate cycles per operator.
pub const DEFAULT_MAX_ITER: u32 = 20;
