//! Criterion benchmarks for the capgrowth pipeline; see `benches/`.
