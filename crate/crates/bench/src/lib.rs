//! Shared fixtures for the benchmarks.

use chbl_core::harness::{initial_balls, initial_bins};
use chbl_core::{
    rebuild_from_scratch, recommended_k, CapacityMode, HashMode, LevelScheme, SchemeKind,
    SystemConfig, SystemState,
};

pub const SEED: u64 = 0x5eed;

pub fn hash_modes() -> [HashMode; 2] {
    [HashMode::random(SEED), HashMode::mixed_tabulation(SEED)]
}

/// A system with `m` bins of capacity `capacity`, filled to `n = C·m/(1+ε)` balls.
pub fn steady_state(
    kind: SchemeKind,
    hash: HashMode,
    epsilon: f64,
    capacity: u64,
    m: u64,
) -> SystemState {
    let k = recommended_k(kind, epsilon, chbl_core::levels::DEFAULT_UNIFORM_K_CONST).unwrap();
    let scheme = LevelScheme::new(kind, k).unwrap();
    let config = SystemConfig::new(hash, scheme, CapacityMode::fixed(capacity).unwrap());
    let n = ((capacity * m) as f64 / (1.0 + epsilon)).round() as u64;
    let balls: Vec<u64> = initial_balls(n).collect();
    rebuild_from_scratch(config, &balls, &initial_bins(m)).unwrap()
}
