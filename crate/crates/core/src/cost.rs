//! Expected cost of a placement, its linear lower bound, and realized cost
//! for a sampled contact matrix.
//!
//! The expected cost charges `delta_d` per segment collected over D2D (the
//! model keeps collecting past the recovery threshold; users cannot know in
//! advance which contacts will happen) and `delta_n` per segment of expected
//! shortfall at the deadline. The shortfall term needs the law of the
//! collected count, which [`crate::prob::segment_count_dist`] provides in
//! polynomial time; the D2D term only needs per-pair expectations.

use crate::model::{Instance, Placement};
use crate::prob::{expected_min, segment_count_dist};
use crate::{Error, KahanSum, Result};

/// Expected cost of a placement, with its D2D/network breakdown.
#[derive(Debug, Clone)]
pub struct CostReport {
    /// Expected average cost per user.
    pub total: f64,
    /// Expected cost per user (averaging these gives `total`).
    pub per_user: Vec<f64>,
    /// Average D2D part of `total`.
    pub d2d_component: f64,
    /// Average network part of `total`.
    pub network_component: f64,
}

fn require_feasible(inst: &Instance, x: &Placement) -> Result<()> {
    let violations = inst.validate_placement(x)?;
    if let Some(v) = violations.first() {
        return Err(Error::InvalidPlacement(v.to_string()));
    }
    Ok(())
}

/// Exact expected average cost per user.
///
/// Per (file, user): the D2D charge is
/// `delta_d * Σ_{j≠i} E(min(BM_ij, x_fj))` and the network charge is
/// `delta_n * Σ_{k=x_fi}^{s_rec-1} (s_rec - k) Pr(S_fi = k)`.
pub fn expected_cost(inst: &Instance, x: &Placement) -> Result<CostReport> {
    require_feasible(inst, x)?;
    let u = inst.num_users;
    let mut per_user = vec![0.0; u];
    let mut d2d_total = KahanSum::new();
    let mut net_total = KahanSum::new();
    for i in 0..u {
        let mut d2d_i = KahanSum::new();
        let mut net_i = KahanSum::new();
        for f in 0..inst.num_files {
            let p = inst.req_prob[f][i];
            if p == 0.0 {
                continue;
            }
            let mut collected = KahanSum::new();
            for j in 0..u {
                if j == i || x.x[f][j] == 0 {
                    continue;
                }
                collected.add(expected_min(
                    inst.contact_rate[i][j],
                    inst.deadline,
                    inst.batch,
                    x.x[f][j],
                ));
            }
            d2d_i.add(p * inst.delta_d * collected.value());

            let s_rec = inst.s_rec[f];
            if x.x[f][i] < s_rec {
                let dist = segment_count_dist(inst, x, f, i)?;
                let mut shortfall = KahanSum::new();
                for k in 0..s_rec as usize {
                    if dist.pmf[k] > 0.0 {
                        shortfall.add((s_rec as usize - k) as f64 * dist.pmf[k]);
                    }
                }
                net_i.add(p * inst.delta_n * shortfall.value());
            }
        }
        per_user[i] = d2d_i.value() + net_i.value();
        d2d_total.add(d2d_i.value());
        net_total.add(net_i.value());
    }
    let uf = u as f64;
    let d2d_component = d2d_total.value() / uf;
    let network_component = net_total.value() / uf;
    Ok(CostReport {
        total: d2d_component + network_component,
        per_user,
        d2d_component,
        network_component,
    })
}

/// Linear lower bound on the expected cost: the shortfall term is replaced
/// by `max(s_rec - E[S_fi], 0) * delta_n`, which Jensen's inequality keeps
/// at or below the exact expectation of the clamped shortfall.
pub fn expected_cost_lb(inst: &Instance, x: &Placement) -> Result<f64> {
    require_feasible(inst, x)?;
    let u = inst.num_users;
    let mut acc = KahanSum::new();
    for i in 0..u {
        for f in 0..inst.num_files {
            let p = inst.req_prob[f][i];
            if p == 0.0 {
                continue;
            }
            let mut collected = KahanSum::new();
            for j in 0..u {
                if j == i || x.x[f][j] == 0 {
                    continue;
                }
                collected.add(expected_min(
                    inst.contact_rate[i][j],
                    inst.deadline,
                    inst.batch,
                    x.x[f][j],
                ));
            }
            let d2d = inst.delta_d * collected.value();
            let net =
                inst.delta_n * (inst.s_rec[f] as f64 - collected.value() - x.x[f][i] as f64);
            acc.add(p * (d2d + net.max(0.0)));
        }
    }
    Ok(acc.value() / u as f64)
}

/// Deterministic cost for a realized contact-count matrix `m`:
/// `S_fi = Σ_{j≠i} min(B m_ij, x_fj) + x_fi`, D2D pays for the collected
/// segments, the network pays `max(s_rec - S_fi, 0)`.
pub fn realized_cost(inst: &Instance, x: &Placement, m: &[Vec<u64>]) -> Result<f64> {
    if m.len() != inst.num_users || m.iter().any(|row| row.len() != inst.num_users) {
        return Err(Error::DimensionMismatch(format!(
            "contact matrix is {}x{}, instance expects {}x{}",
            m.len(),
            m.first().map_or(0, |r| r.len()),
            inst.num_users,
            inst.num_users
        )));
    }
    for i in 0..inst.num_users {
        for j in (i + 1)..inst.num_users {
            if m[i][j] != m[j][i] {
                return Err(Error::InvalidParameter(format!(
                    "contact matrix asymmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(realized_cost_unchecked(inst, x, m))
}

/// Hot path behind [`realized_cost`]; Monte Carlo callers sample symmetric
/// matrices by construction and skip the validation.
pub(crate) fn realized_cost_unchecked(inst: &Instance, x: &Placement, m: &[Vec<u64>]) -> f64 {
    let b = inst.batch as u64;
    let mut acc = KahanSum::new();
    for i in 0..inst.num_users {
        for f in 0..inst.num_files {
            let p = inst.req_prob[f][i];
            if p == 0.0 {
                continue;
            }
            let mut from_others = 0u64;
            for j in 0..inst.num_users {
                if j == i {
                    continue;
                }
                from_others += (b * m[i][j]).min(x.x[f][j] as u64);
            }
            let s = from_others + x.x[f][i] as u64;
            let shortfall = (inst.s_rec[f] as u64).saturating_sub(s);
            acc.add(p * (from_others as f64 * inst.delta_d + shortfall as f64 * inst.delta_n));
        }
    }
    acc.value() / inst.num_users as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_instances::tiny_instance;
    use crate::model::{gen_zipf, Instance};
    use crate::prob::ln_factorial;
    use crate::sim;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_feasible_placement(inst: &Instance, seed: u64) -> Placement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Placement::zeros(inst);
        let mut s_rem: Vec<u32> = inst.s_max.clone();
        for i in 0..inst.num_users {
            let mut budget = inst.cache_size[i];
            while budget > 0 {
                let candidates: Vec<usize> = (0..inst.num_files)
                    .filter(|&f| s_rem[f] > 0 && x.x[f][i] < inst.s_rec[f])
                    .collect();
                if candidates.is_empty() || rng.gen_bool(0.25) {
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

    #[test]
    fn all_zero_placement_pays_full_network_cost() {
        let inst = tiny_instance(4, 3);
        let x = Placement::zeros(&inst);
        let report = expected_cost(&inst, &x).unwrap();
        let mut expected = 0.0;
        for i in 0..inst.num_users {
            for f in 0..inst.num_files {
                expected += inst.req_prob[f][i] * inst.s_rec[f] as f64 * inst.delta_n;
            }
        }
        expected /= inst.num_users as f64;
        assert!((report.total - expected).abs() < 1e-9);
        assert_eq!(report.d2d_component, 0.0);
    }

    #[test]
    fn single_user_closed_form() {
        let mut inst = tiny_instance(1, 3);
        inst.cache_size = vec![5];
        let mut x = Placement::zeros(&inst);
        x.x[0][0] = 2;
        x.x[2][0] = 3;
        let report = expected_cost(&inst, &x).unwrap();
        let mut expected = 0.0;
        for f in 0..inst.num_files {
            let short = inst.s_rec[f].saturating_sub(x.x[f][0]) as f64;
            expected += inst.req_prob[f][0] * short * inst.delta_n;
        }
        assert!((report.total - expected).abs() < 1e-9);
    }

    #[test]
    fn report_components_are_consistent() {
        let inst = tiny_instance(4, 4);
        let x = random_feasible_placement(&inst, 3);
        let r = expected_cost(&inst, &x).unwrap();
        assert!((r.total - (r.d2d_component + r.network_component)).abs() < 1e-9);
        let mean: f64 = r.per_user.iter().sum::<f64>() / r.per_user.len() as f64;
        assert!((r.total - mean).abs() < 1e-9);
        assert!(r.d2d_component >= 0.0 && r.network_component >= 0.0);
    }

    #[test]
    fn rejects_infeasible_placement() {
        let inst = tiny_instance(2, 2);
        let mut x = Placement::zeros(&inst);
        x.x[0][0] = inst.s_rec[0] + 1;
        assert!(expected_cost(&inst, &x).is_err());
        assert!(expected_cost_lb(&inst, &x).is_err());
    }

    #[test]
    fn lower_bound_tight_for_zero_placement() {
        let inst = tiny_instance(3, 3);
        let x = Placement::zeros(&inst);
        let lb = expected_cost_lb(&inst, &x).unwrap();
        let exact = expected_cost(&inst, &x).unwrap().total;
        assert!((lb - exact).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_tight_for_single_user() {
        let mut inst = tiny_instance(1, 4);
        inst.cache_size = vec![4];
        let mut x = Placement::zeros(&inst);
        x.x[1][0] = 2;
        let lb = expected_cost_lb(&inst, &x).unwrap();
        let exact = expected_cost(&inst, &x).unwrap().total;
        assert!((lb - exact).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_tight_without_contacts() {
        let mut inst = tiny_instance(3, 2);
        for row in &mut inst.contact_rate {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let x = random_feasible_placement(&inst, 8);
        let lb = expected_cost_lb(&inst, &x).unwrap();
        let exact = expected_cost(&inst, &x).unwrap().total;
        assert!((lb - exact).abs() < 1e-12);
    }

    #[test]
    fn realized_cost_zero_contacts_matches_closed_form() {
        let inst = tiny_instance(3, 3);
        let x = random_feasible_placement(&inst, 5);
        let m = vec![vec![0u64; 3]; 3];
        let got = realized_cost(&inst, &x, &m).unwrap();
        let mut expected = 0.0;
        for i in 0..inst.num_users {
            for f in 0..inst.num_files {
                let short = inst.s_rec[f].saturating_sub(x.x[f][i]) as f64;
                expected += inst.req_prob[f][i] * short * inst.delta_n;
            }
        }
        expected /= inst.num_users as f64;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn realized_cost_saturated_contacts_collects_everything() {
        let inst = tiny_instance(3, 2);
        let x = random_feasible_placement(&inst, 6);
        let m = vec![vec![1_000u64; 3]; 3];
        let got = realized_cost(&inst, &x, &m).unwrap();
        let mut expected = 0.0;
        for i in 0..inst.num_users {
            for f in 0..inst.num_files {
                let others: u64 = (0..inst.num_users)
                    .filter(|&j| j != i)
                    .map(|j| x.x[f][j] as u64)
                    .sum();
                let s = others + x.x[f][i] as u64;
                let short = (inst.s_rec[f] as u64).saturating_sub(s) as f64;
                expected += inst.req_prob[f][i]
                    * (others as f64 * inst.delta_d + short * inst.delta_n);
            }
        }
        expected /= inst.num_users as f64;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn realized_cost_rejects_asymmetric_matrix() {
        let inst = tiny_instance(2, 2);
        let x = Placement::zeros(&inst);
        let m = vec![vec![0, 1], vec![2, 0]];
        assert!(realized_cost(&inst, &x, &m).is_err());
    }

    /// Independent transcription of the realized-cost formulas, structured
    /// differently from the implementation (explicit S and shortfall
    /// matrices, no running sums).
    fn realized_cost_naive(inst: &Instance, x: &Placement, m: &[Vec<u64>]) -> f64 {
        let u = inst.num_users;
        let f_count = inst.num_files;
        let mut s = vec![vec![0u64; u]; f_count];
        for f in 0..f_count {
            for i in 0..u {
                let mut total = x.x[f][i] as u64;
                for j in 0..u {
                    if j != i {
                        total += (inst.batch as u64 * m[i][j]).min(x.x[f][j] as u64);
                    }
                }
                s[f][i] = total;
            }
        }
        let mut per_user = vec![0.0; u];
        for i in 0..u {
            for f in 0..f_count {
                let collected = (s[f][i] - x.x[f][i] as u64) as f64;
                let shortfall = (inst.s_rec[f] as i64 - s[f][i] as i64).max(0) as f64;
                per_user[i] += inst.req_prob[f][i]
                    * (collected * inst.delta_d + shortfall * inst.delta_n);
            }
        }
        per_user.iter().sum::<f64>() / u as f64
    }

    #[test]
    fn realized_cost_matches_independent_transcription() {
        let inst = tiny_instance(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..20 {
            let x = random_feasible_placement(&inst, seed);
            let mut m = vec![vec![0u64; 4]; 4];
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let v = rng.gen_range(0..4);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let a = realized_cost(&inst, &x, &m).unwrap();
            let b = realized_cost_naive(&inst, &x, &m);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    /// Enumerate contact matrices with their joint Poisson probabilities up
    /// to a tail below 1e-12 per pair, to evaluate the raw expectation of
    /// the realized cost.
    fn direct_expectation(inst: &Instance, x: &Placement) -> f64 {
        let u = inst.num_users;
        let pairs: Vec<(usize, usize)> = (0..u)
            .flat_map(|i| ((i + 1)..u).map(move |j| (i, j)))
            .collect();
        let supports: Vec<Vec<f64>> = pairs
            .iter()
            .map(|&(i, j)| {
                let mu = inst.mean_contacts(i, j);
                let mut probs = Vec::new();
                let mut acc = 0.0;
                let mut m = 0u64;
                while acc < 1.0 - 1e-13 {
                    let p = (m as f64 * mu.max(1e-300).ln() - mu - ln_factorial(m)).exp();
                    let p = if mu == 0.0 {
                        if m == 0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        p
                    };
                    probs.push(p);
                    acc += p;
                    m += 1;
                    if m > 200 {
                        break;
                    }
                }
                probs
            })
            .collect();
        let mut total = 0.0;
        let mut counts = vec![0usize; pairs.len()];
        'outer: loop {
            let mut prob = 1.0;
            let mut m = vec![vec![0u64; u]; u];
            for (idx, &(i, j)) in pairs.iter().enumerate() {
                prob *= supports[idx][counts[idx]];
                m[i][j] = counts[idx] as u64;
                m[j][i] = counts[idx] as u64;
            }
            if prob > 0.0 {
                total += prob * realized_cost(inst, x, &m).unwrap();
            }
            // Odometer increment over the truncated joint support.
            for idx in 0..pairs.len() {
                counts[idx] += 1;
                if counts[idx] < supports[idx].len() {
                    continue 'outer;
                }
                counts[idx] = 0;
            }
            break;
        }
        total
    }

    #[test]
    fn expected_cost_matches_direct_expectation_two_users() {
        let inst = tiny_instance(2, 2);
        for seed in 0..5 {
            let x = random_feasible_placement(&inst, seed);
            let exact = expected_cost(&inst, &x).unwrap().total;
            let direct = direct_expectation(&inst, &x);
            assert!((exact - direct).abs() < 1e-9, "{exact} vs {direct}");
        }
    }

    #[test]
    fn expected_cost_matches_direct_expectation_three_users() {
        let inst = tiny_instance(3, 2);
        for seed in 0..3 {
            let x = random_feasible_placement(&inst, seed);
            let exact = expected_cost(&inst, &x).unwrap().total;
            let direct = direct_expectation(&inst, &x);
            assert!((exact - direct).abs() < 1e-9, "{exact} vs {direct}");
        }
    }

    #[test]
    fn expected_cost_matches_monte_carlo() {
        let inst = tiny_instance(2, 2);
        let x = random_feasible_placement(&inst, 1);
        let exact = expected_cost(&inst, &x).unwrap().total;
        let (mean, stderr) = sim::monte_carlo_cost(&inst, &x, 200_000, 42).unwrap();
        assert!(
            (mean - exact).abs() <= 4.0 * stderr,
            "analytic {exact} vs empirical {mean} (stderr {stderr})"
        );
    }

    #[test]
    fn permutation_equivariance() {
        let inst = tiny_instance(4, 3);
        let x = random_feasible_placement(&inst, 12);
        let total = expected_cost(&inst, &x).unwrap().total;

        // Relabel users with a fixed permutation and files with another.
        let up = [2usize, 0, 3, 1];
        let fp = [1usize, 2, 0];
        let mut inst2 = inst.clone();
        let mut x2 = x.clone();
        for (new_f, &old_f) in fp.iter().enumerate() {
            inst2.s_rec[new_f] = inst.s_rec[old_f];
            inst2.s_max[new_f] = inst.s_max[old_f];
            for (new_u, &old_u) in up.iter().enumerate() {
                inst2.req_prob[new_f][new_u] = inst.req_prob[old_f][old_u];
                x2.x[new_f][new_u] = x.x[old_f][old_u];
            }
        }
        for (new_i, &old_i) in up.iter().enumerate() {
            inst2.cache_size[new_i] = inst.cache_size[old_i];
            for (new_j, &old_j) in up.iter().enumerate() {
                inst2.contact_rate[new_i][new_j] = inst.contact_rate[old_i][old_j];
            }
        }
        let total2 = expected_cost(&inst2, &x2).unwrap().total;
        assert!((total - total2).abs() < 1e-12);
    }

    #[test]
    fn cost_monotone_in_network_price() {
        let inst = tiny_instance(3, 3);
        let x = random_feasible_placement(&inst, 9);
        let base = expected_cost(&inst, &x).unwrap().total;
        let mut pricier = inst.clone();
        pricier.delta_n *= 2.0;
        let higher = expected_cost(&pricier, &x).unwrap().total;
        assert!(higher >= base - 1e-12);
    }

    #[test]
    fn shortfall_bound_mc_respects_termwise_inequality() {
        // For sampled (f, i): the expected clamped shortfall (Monte Carlo)
        // stays above the clamped expected shortfall, within 4 stderr.
        let inst = tiny_instance(3, 2);
        let x = random_feasible_placement(&inst, 4);
        let reps = 40_000;
        for (f, i) in [(0usize, 0usize), (1, 2)] {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for r in 0..reps {
                let m = sim::sample_contacts(&inst, 1000 + r).unwrap();
                let mut collected = x.x[f][i] as u64;
                for j in 0..inst.num_users {
                    if j != i {
                        collected +=
                            (inst.batch as u64 * m[i][j]).min(x.x[f][j] as u64);
                    }
                }
                let short =
                    (inst.s_rec[f] as u64).saturating_sub(collected) as f64 * inst.delta_n;
                sum += short;
                sumsq += short * short;
            }
            let n = reps as f64;
            let mc_n1 = sum / n;
            let stderr = ((sumsq / n - mc_n1 * mc_n1).max(0.0) / n).sqrt();
            let mut e_sum = 0.0;
            for j in 0..inst.num_users {
                if j != i {
                    e_sum += expected_min(
                        inst.contact_rate[i][j],
                        inst.deadline,
                        inst.batch,
                        x.x[f][j],
                    );
                }
            }
            let n2 = (inst.delta_n
                * (inst.s_rec[f] as f64 - e_sum - x.x[f][i] as f64))
                .max(0.0);
            assert!(
                mc_n1 >= n2 - 4.0 * stderr,
                "(f={f}, i={i}): MC {mc_n1} vs bound {n2} (stderr {stderr})"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn lower_bound_never_exceeds_exact_cost(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = rng.gen_range(2..=4);
            let f = rng.gen_range(1..=4);
            let mut inst = tiny_instance(u, f);
            // Perturb probabilities to a random column shared across users.
            let gamma = rng.gen_range(0.0..1.5);
            let column = gen_zipf(f, gamma).unwrap();
            inst.req_prob = column.iter().map(|&p| vec![p; u]).collect();
            let x = random_feasible_placement(&inst, seed.wrapping_mul(31));
            let lb = expected_cost_lb(&inst, &x).unwrap();
            let exact = expected_cost(&inst, &x).unwrap().total;
            prop_assert!(lb <= exact + 1e-9, "lb {lb} > exact {exact}");
        }
    }
}
