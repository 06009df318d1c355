//! Criterion benchmarks for the profiling and prediction pipeline; see `benches/`.
