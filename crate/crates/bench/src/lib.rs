//! Criterion benchmarks for lojax-core live under `benches/`.
