//! Fixtures shared by the benchmarks.

use mmv_core::{DiscreteRv, ModelConfig};

pub fn reference() -> ModelConfig {
    ModelConfig::baseline()
}

/// `10 + U(0, 12)` on `n` midpoint atoms.
pub fn shifted_uniform(n: usize) -> DiscreteRv {
    DiscreteRv::uniform_midpoint(0.0, 12.0, n).expect("valid grid").shift(10.0)
}
