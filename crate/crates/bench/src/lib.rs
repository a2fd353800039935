//! Shared fixtures for the criterion benches.

use mht_assoc::{gate_matrix, gen_random_dense, SparseCostMatrix, Version};

/// Matrix handed to `version`: the dense instance, or its gated copy.
pub fn instance(size: usize, seed: u64, version: Version, gate: usize) -> SparseCostMatrix {
    let m = gen_random_dense(size, seed);
    if version.gated() {
        gate_matrix(&m, gate)
    } else {
        m
    }
}
