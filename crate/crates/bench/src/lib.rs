//! Criterion benchmarks for the hot paths live in `benches/hot_paths.rs`.
