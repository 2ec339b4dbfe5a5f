//! Fixtures shared by the benchmarks in `benches/`.

use sns_core::objectives::{synth_least_squares, synth_logistic};
use sns_core::SparseProblem;

/// Planted logistic problem with `4n` samples and 10% label noise.
pub fn logistic(n: usize, s: usize, seed: u64) -> SparseProblem {
    let inst = synth_logistic(n, s, 4 * n, 0.1, seed).expect("valid sizes");
    SparseProblem::new(inst.objective, s).expect("s <= n")
}

/// Noiseless planted least squares with `2n + 4` rows.
pub fn least_squares(n: usize, s: usize, seed: u64) -> SparseProblem {
    let inst = synth_least_squares(n, s, 2 * n + 4, 0.0, seed).expect("valid sizes");
    SparseProblem::new(inst.objective, s).expect("s <= n")
}
