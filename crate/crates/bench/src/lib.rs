//! Criterion benchmarks for posterior quadrature, predictive evaluation and
//! single risk replications; see `benches/`.
