//! Criterion benchmarks for the codec live in benches/.
