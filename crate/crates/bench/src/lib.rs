//! Criterion benchmarks of the hot kernels; run with `cargo bench -p intrinsic-bench`.
