//! Shared helpers for integration tests: randomized small instances and
//! feasible placements, all seed-deterministic.

// Each integration test binary compiles its own copy; not all use every
// helper.
#![allow(dead_code)]

use cocp::model::{gen_instance, GenConfig, Instance, Placement};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Random instance with dimensions bounded by the arguments; contact rates
/// come from a Gamma whose mean scales like the benchmark setups.
pub fn random_instance(
    seed: u64,
    max_users: usize,
    max_files: usize,
    max_cache: u32,
    max_s_star: u32,
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig {
        num_users: rng.gen_range(2..=max_users.max(2)),
        num_files: rng.gen_range(1..=max_files),
        cache: rng.gen_range(1..=max_cache),
        batch: rng.gen_range(1..=2),
        gamma: rng.gen_range(0.2..1.2),
        s_star: rng.gen_range(1..=max_s_star),
        alpha: rng.gen_range(2..=3),
        beta: rng.gen_range(2.0..6.0),
        ..GenConfig::default()
    };
    gen_instance(&cfg, seed ^ 0xD1CE).unwrap()
}

/// Uniform-ish random feasible placement: random files gain one segment at a
/// time under all three constraint families, with random early stopping so
/// sparse and dense placements both occur.
pub fn random_feasible_placement(inst: &Instance, seed: u64) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Placement::zeros(inst);
    let mut s_rem = inst.s_max.clone();
    for i in 0..inst.num_users {
        let mut budget = inst.cache_size[i];
        while budget > 0 {
            let candidates: Vec<usize> = (0..inst.num_files)
                .filter(|&f| s_rem[f] > 0 && x.x[f][i] < inst.s_rec[f])
                .collect();
            if candidates.is_empty() || rng.gen_bool(0.2) {
                break;
            }
            let f = candidates[rng.gen_range(0..candidates.len())];
            x.x[f][i] += 1;
            s_rem[f] -= 1;
            budget -= 1;
        }
    }
    assert!(inst.validate_placement(&x).unwrap().is_empty());
    x
}
