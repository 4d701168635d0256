//! Inputs shared by the benchmarks.

use cdrum_core::{random_mixture, Rational, RandomJointChoiceRule, Universe};

/// A seeded three-component mixture on `n` letters.
pub fn mixture(n: usize, periods: usize, seed: u64) -> RandomJointChoiceRule<Rational> {
    random_mixture(&Universe::letters(n), periods, 3, seed).expect("valid mixture").rule
}
