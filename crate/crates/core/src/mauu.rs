//! User-by-user placement: each user's cache content is chosen exactly
//! (given everyone else's) by a dynamic program over files, then frozen.
//!
//! For the user under consideration, `V[f][k]` is the system expected cost
//! if that user caches `k` segments of file `f` and nothing else changes.
//! Only the terms of file `f` move when `x[f][i]` changes, so `V` is built
//! from per-term deltas against the baseline cost instead of full
//! re-evaluations; equality with naive evaluation is a test. The knapsack
//! recursion over files then picks the exact best allocation of the user's
//! cache, and the per-file remaining-segment counts are decremented before
//! the next user.

use crate::cost::expected_cost;
use crate::model::{Instance, Placement};
use crate::prob::{expected_min, min_count_dist, segment_count_dist, CountDistribution};
use crate::{Error, KahanSum, Result};

fn check_preconditions(
    inst: &Instance,
    x_fixed: &Placement,
    user: usize,
    s_rem: &[u32],
) -> Result<()> {
    let violations = inst.validate_placement(x_fixed)?;
    if let Some(v) = violations.first() {
        return Err(Error::InvalidPlacement(v.to_string()));
    }
    if user >= inst.num_users {
        return Err(Error::DimensionMismatch(format!("user {user} out of range")));
    }
    if (0..inst.num_files).any(|f| x_fixed.x[f][user] != 0) {
        return Err(Error::InvalidParameter(format!(
            "column {user} of the fixed placement must be zero"
        )));
    }
    if s_rem.len() != inst.num_files {
        return Err(Error::DimensionMismatch("s_rem length".into()));
    }
    for f in 0..inst.num_files {
        let used = x_fixed.file_used(f);
        if s_rem[f] as u64 != inst.s_max[f] as u64 - used {
            return Err(Error::InvalidParameter(format!(
                "s_rem[{f}] = {} inconsistent with placement (expected {})",
                s_rem[f],
                inst.s_max[f] as u64 - used
            )));
        }
    }
    Ok(())
}

/// Expected shortfall of `others + shift` below `s_rec`, where `others` is a
/// capped count law.
fn shortfall(others: &CountDistribution, shift: u32, s_rec: u32) -> f64 {
    let mut acc = KahanSum::new();
    for (t, &p) in others.pmf.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let collected = t as u64 + shift as u64;
        if (collected as u32) < s_rec {
            acc.add((s_rec as u64 - collected) as f64 * p);
        }
    }
    acc.value()
}

/// Cost matrix for one user: entry `(f, k)` is the system expected cost if
/// the user caches `k` segments of file `f` on top of `x_fixed`. Entries
/// beyond `min(C_i, s_rec_f, s_rem_f)` are unset (+inf).
pub fn build_cost_matrix(
    inst: &Instance,
    x_fixed: &Placement,
    user: usize,
    s_rem: &[u32],
) -> Result<Vec<Vec<f64>>> {
    check_preconditions(inst, x_fixed, user, s_rem)?;
    let base = expected_cost(inst, x_fixed)?.total;
    let uf = inst.num_users as f64;
    let budget = inst.cache_size[user];
    let mut v = vec![vec![f64::INFINITY; budget as usize + 1]; inst.num_files];
    for f in 0..inst.num_files {
        let cap = budget.min(inst.s_rec[f]).min(s_rem[f]);
        let s_rec = inst.s_rec[f];
        // Law of what this user collects from everyone else (its own column
        // is zero, so the distribution is exactly the others' contribution).
        let own_others = segment_count_dist(inst, x_fixed, f, user)?;
        let own_short0 = shortfall(&own_others, 0, s_rec);
        // For every other user j, the law of j's collected count before this
        // user caches anything.
        let others: Vec<(usize, CountDistribution, f64)> = (0..inst.num_users)
            .filter(|&j| j != user)
            .map(|j| {
                let d = segment_count_dist(inst, x_fixed, f, j)?;
                let short0 = shortfall(&d, 0, s_rec);
                Ok((j, d, short0))
            })
            .collect::<Result<_>>()?;
        for k in 0..=cap {
            if k == 0 {
                v[f][0] = base;
                continue;
            }
            let mut delta = KahanSum::new();
            // This user's own network term improves with k.
            delta.add(
                inst.req_prob[f][user]
                    * inst.delta_n
                    * (shortfall(&own_others, k, s_rec) - own_short0),
            );
            // Every other user now also collects from this user.
            for (j, base_dist, short0) in &others {
                let p = inst.req_prob[f][*j];
                if p == 0.0 {
                    continue;
                }
                let gain = min_count_dist(
                    inst.contact_rate[*j][user],
                    inst.deadline,
                    inst.batch,
                    (k as usize).min(s_rec as usize),
                );
                let mut combined = vec![0.0; s_rec as usize + 1];
                for (a, &pa) in base_dist.pmf.iter().enumerate() {
                    if pa == 0.0 {
                        continue;
                    }
                    for (b, &pb) in gain.pmf.iter().enumerate() {
                        if pb == 0.0 {
                            continue;
                        }
                        combined[(a + b).min(s_rec as usize)] += pa * pb;
                    }
                }
                let mut short_k = KahanSum::new();
                for (t, &pt) in combined.iter().enumerate() {
                    if pt > 0.0 && (t as u32) < s_rec {
                        short_k.add((s_rec as usize - t) as f64 * pt);
                    }
                }
                let d2d_gain = inst.delta_d
                    * expected_min(inst.contact_rate[*j][user], inst.deadline, inst.batch, k);
                delta.add(p * (d2d_gain + inst.delta_n * (short_k.value() - short0)));
            }
            v[f][k as usize] = base + delta.value() / uf;
        }
    }
    Ok(v)
}

/// Knapsack recursion over files; only the full-budget entry of the last
/// file is needed, so that row is computed alone.
fn run_dp(inst: &Instance, user: usize, s_rem: &[u32], v: &[Vec<f64>]) -> Vec<u32> {
    let budget = inst.cache_size[user] as usize;
    let files = inst.num_files;
    let mut w = vec![vec![f64::INFINITY; budget + 1]; files];
    let mut choice = vec![vec![0u32; budget + 1]; files];
    for q in 0..files {
        let cap = (budget as u32).min(inst.s_rec[q]).min(s_rem[q]) as usize;
        let k_range = if q + 1 == files {
            budget..=budget
        } else {
            0..=budget
        };
        for k_prime in k_range {
            let mut best = f64::INFINITY;
            let mut best_r = 0u32;
            for r in 0..=cap.min(k_prime) {
                let rest = if q == 0 { 0.0 } else { w[q - 1][k_prime - r] };
                let value = v[q][r] + rest;
                // Ties break toward caching less.
                if value < best {
                    best = value;
                    best_r = r as u32;
                }
            }
            w[q][k_prime] = best;
            choice[q][k_prime] = best_r;
        }
    }
    // Backtrack from the full budget at the last file.
    let mut g = vec![0u32; files];
    let mut k_prime = budget;
    for q in (0..files).rev() {
        let r = choice[q][k_prime];
        g[q] = r;
        k_prime -= r as usize;
    }
    g
}

/// Exact best allocation of one user's cache given everyone else's placement.
pub fn optimize_user(
    inst: &Instance,
    x_fixed: &Placement,
    user: usize,
    s_rem: &[u32],
) -> Result<Vec<u32>> {
    let v = build_cost_matrix(inst, x_fixed, user, s_rem)?;
    if inst.cache_size[user] == 0 {
        return Ok(vec![0; inst.num_files]);
    }
    // v[q][0] is finite for every file, so the DP always has a feasible path.
    Ok(run_dp(inst, user, s_rem, &v))
}

/// Run the full user-by-user sweep in the given processing order and return
/// the resulting placement. The expected cost never increases across steps:
/// each step may pick the empty allocation.
pub fn run(inst: &Instance, order: &[usize]) -> Result<Placement> {
    let mut seen = vec![false; inst.num_users];
    for &u in order {
        if u >= inst.num_users || seen[u] {
            return Err(Error::InvalidParameter(
                "order must be a permutation of the users".into(),
            ));
        }
        seen[u] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::InvalidParameter(
            "order must cover every user".into(),
        ));
    }
    let mut x = Placement::zeros(inst);
    let mut s_rem = inst.s_max.clone();
    for &user in order {
        let g = optimize_user(inst, &x, user, &s_rem)?;
        for f in 0..inst.num_files {
            x.x[f][user] = g[f];
            s_rem[f] -= g[f];
        }
    }
    debug_assert!(inst.validate_placement(&x).is_ok_and(|v| v.is_empty()));
    Ok(x)
}

/// Identity processing order.
pub fn default_order(inst: &Instance) -> Vec<usize> {
    (0..inst.num_users).collect()
}
