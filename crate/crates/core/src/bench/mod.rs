//! Benchmark harness: native evaluators, DAG-level scoring, the consistency
//! gate and benchmark construction from ground truth.

mod build;
mod evaluators;
mod scoring;

pub use build::{
    compose_dag_task, generate_eval_script, generate_noise_recipe, reverse_objective,
    synthesize_noise, ComposedDag, NoiseRecipe, NoiseRun,
};
pub use evaluators::{
    eval_classification, eval_dedup, eval_filtering, eval_imputation, eval_integration,
    eval_refinement, id_key, imputation_failure, normalize_text, rows_equal, values_equal,
    ImputationFailure, Verdict, DEFAULT_ATOL,
};
pub use scoring::{
    consistency_check, dag_score, dag_weights, evaluate_binding, evaluate_task, parse_eval_score,
    run_eval_script, ConsistencyResult, EvalFiles, GT_FLOOR, NOISY_CEILING, WEIGHT_SUM_TOL,
};
