//! Conventional caching policies used as comparators.
//!
//! Both process users one by one, respect the global per-file segment budget
//! (so collected segments stay distinct system-wide), and allocate in
//! recovery-threshold-sized blocks: a file is useful to its cacher only up
//! to its threshold, and the random policy descends from whole-file
//! probabilistic caching. Popularity caching picks files by descending
//! request probability; random caching samples them proportionally to it.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::model::{Instance, Placement};
use crate::Result;

/// Each user caches its most-requested files first, taking
/// `min(s_rec, remaining cache, remaining segments)` of each. Deterministic.
pub fn popular_caching(inst: &Instance) -> Result<Placement> {
    let mut x = Placement::zeros(inst);
    let mut s_rem = inst.s_max.clone();
    for i in 0..inst.num_users {
        let mut files: Vec<usize> = (0..inst.num_files).collect();
        files.sort_by(|&a, &b| {
            inst.req_prob[b][i]
                .total_cmp(&inst.req_prob[a][i])
                .then(a.cmp(&b))
        });
        let mut budget = inst.cache_size[i];
        for f in files {
            if budget == 0 {
                break;
            }
            let take = inst.s_rec[f].min(budget).min(s_rem[f]);
            if take > 0 {
                x.x[f][i] = take;
                s_rem[f] -= take;
                budget -= take;
            }
        }
    }
    debug_assert!(inst.validate_placement(&x).is_ok_and(|v| v.is_empty()));
    Ok(x)
}

/// Each user repeatedly samples a file with probability proportional to its
/// request probability, among not-yet-picked files that still have uncached
/// segments, and caches a `min(s_rec, remaining cache, remaining segments)`
/// block of it. Deterministic given the seed.
pub fn random_caching(inst: &Instance, seed: u64) -> Result<Placement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Placement::zeros(inst);
    let mut s_rem = inst.s_max.clone();
    for i in 0..inst.num_users {
        let mut budget = inst.cache_size[i];
        while budget > 0 {
            // Zero-probability files can never be drawn; if nothing with
            // positive weight remains the user stops (possibly unfilled).
            let candidates: Vec<usize> = (0..inst.num_files)
                .filter(|&f| s_rem[f] > 0 && x.x[f][i] == 0 && inst.req_prob[f][i] > 0.0)
                .collect();
            let total: f64 = candidates.iter().map(|&f| inst.req_prob[f][i]).sum();
            if candidates.is_empty() || total <= 0.0 {
                break;
            }
            let mut draw = rng.gen_range(0.0..total);
            let mut picked = candidates[candidates.len() - 1];
            for &f in &candidates {
                draw -= inst.req_prob[f][i];
                if draw < 0.0 {
                    picked = f;
                    break;
                }
            }
            let take = inst.s_rec[picked].min(budget).min(s_rem[picked]);
            x.x[picked][i] = take;
            s_rem[picked] -= take;
            budget -= take;
        }
    }
    debug_assert!(inst.validate_placement(&x).is_ok_and(|v| v.is_empty()));
    Ok(x)
}
