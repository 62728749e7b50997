//! Criterion benchmarks for `vortexred-core`; see `benches/`.
