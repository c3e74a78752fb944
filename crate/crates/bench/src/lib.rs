//! Criterion benchmarks for `govdag-core`; see `benches/core.rs`.
