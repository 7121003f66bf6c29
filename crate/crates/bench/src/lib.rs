//! Criterion benchmarks for `overindep`; see `benches/`.
