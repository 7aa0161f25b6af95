//! Benchmarks only; run `cargo bench -p cemrl-bench`.
