//! Criterion benchmarks for the pairing and allocation pipeline; see `benches/`.
