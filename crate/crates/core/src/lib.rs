//! Natural-language data governance: planning, code generation, sandboxed
//! execution and benchmark evaluation.

pub mod bench;
pub mod contract;
pub mod dag;
pub mod error;
pub mod executor;
pub mod gateway;
pub mod metrics;
pub mod model;
pub mod pack;
pub mod pipeline;
pub mod planner;
pub mod prompt;
pub mod sandbox;
pub mod table;

pub use error::{Error, Result};
