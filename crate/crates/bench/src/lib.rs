//! Criterion benchmarks for lclt-core; see `benches/`.
