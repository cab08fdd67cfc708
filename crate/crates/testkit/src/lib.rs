//! Test fixtures: synthetic FNC-style corpora, a dense LP solver and
//! brute-force references for the numeric kernels.

pub mod lp;
pub mod oracle;
pub mod synth;
