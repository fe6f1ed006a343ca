//! Criterion benchmarks for the hot paths of `cagetool`; see `benches/`.
