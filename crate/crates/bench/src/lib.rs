//! Benchmarks for the solver crate; see `benches/solver.rs`.
