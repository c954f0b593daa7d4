//! Criterion benchmarks for `corsrbf`; see `benches/`.
