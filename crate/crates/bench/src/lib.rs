//! Shared fixtures for the benchmarks.

use kolmo_core::{build, Rational, RefinementState};

/// The `n = 2`, `ε = 1/5` system refined to `levels`.
pub fn fixture(levels: usize) -> RefinementState {
    let epsilon = Rational::new(1.into(), 5.into());
    build(2, epsilon, levels).expect("fixture builds").pop().expect("root level present")
}
