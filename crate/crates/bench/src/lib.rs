//! Criterion benchmarks for ltvid-core; see `benches/`.
