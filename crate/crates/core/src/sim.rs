//! Monte Carlo contact simulator: the independent statistical check on the
//! analytic cost engine.
//!
//! Contact counts are sampled with `rand_distr::Poisson` (inversion by
//! multiplication for small means, PTRS rejection for large means) from
//! ChaCha8 streams. Replication `r` of a run with seed `s` uses stream `r`
//! of seed `s`, so parallel and serial execution produce identical draws and
//! distinct replications never share a stream.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;

use crate::cost::realized_cost_unchecked;
use crate::model::{Instance, Placement};
use crate::{Error, KahanSum, Result};

/// Per-pair samplers, built once per run.
struct PairSamplers {
    pairs: Vec<(usize, usize, Option<Poisson<f64>>)>,
    num_users: usize,
}

impl PairSamplers {
    fn new(inst: &Instance) -> Result<PairSamplers> {
        let mut pairs = Vec::new();
        for i in 0..inst.num_users {
            for j in (i + 1)..inst.num_users {
                let mu = inst.mean_contacts(i, j);
                let sampler = if mu > 0.0 {
                    Some(Poisson::new(mu).map_err(|e| {
                        Error::InvalidParameter(format!("pair ({i},{j}) mean {mu}: {e}"))
                    })?)
                } else if mu == 0.0 {
                    None
                } else {
                    return Err(Error::InvalidParameter(format!(
                        "pair ({i},{j}) has negative mean contacts {mu}"
                    )));
                };
                pairs.push((i, j, sampler));
            }
        }
        Ok(PairSamplers {
            pairs,
            num_users: inst.num_users,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
        let mut m = vec![vec![0u64; self.num_users]; self.num_users];
        for &(i, j, ref sampler) in &self.pairs {
            if let Some(p) = sampler {
                let v = p.sample(rng) as u64;
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }
}

/// Sample one symmetric contact-count matrix, `M[i][j] ~ Poisson(λ_ij T_D)`
/// independently per pair, zero diagonal.
pub fn sample_contacts(inst: &Instance, seed: u64) -> Result<Vec<Vec<u64>>> {
    let samplers = PairSamplers::new(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(samplers.sample(&mut rng))
}

/// Mean and standard error of the realized cost over `reps` independent
/// contact samples. Replications run in parallel; the aggregation is a
/// sequential compensated sum over the collected values, so the result does
/// not depend on scheduling.
pub fn monte_carlo_cost(
    inst: &Instance,
    x: &Placement,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    let violations = inst.validate_placement(x)?;
    if let Some(v) = violations.first() {
        return Err(Error::InvalidPlacement(v.to_string()));
    }
    let samplers = PairSamplers::new(inst)?;
    let costs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let m = samplers.sample(&mut rng);
            realized_cost_unchecked(inst, x, &m)
        })
        .collect();
    let mut sum = KahanSum::new();
    for &c in &costs {
        sum.add(c);
    }
    let n = reps as f64;
    let mean = sum.value() / n;
    let mut sq = KahanSum::new();
    for &c in &costs {
        let d = c - mean;
        sq.add(d * d);
    }
    let var = if reps > 1 { sq.value() / (n - 1.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::expected_cost;
    use crate::model::test_instances::tiny_instance;

    #[test]
    fn zero_rates_give_zero_matrix() {
        let mut inst = tiny_instance(3, 2);
        for row in &mut inst.contact_rate {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let m = sample_contacts(&inst, 5).unwrap();
        assert!(m.iter().all(|row| row.iter().all(|&v| v == 0)));
    }

    #[test]
    fn matrices_are_symmetric_and_seeded() {
        let inst = tiny_instance(4, 2);
        let a = sample_contacts(&inst, 9).unwrap();
        let b = sample_contacts(&inst, 9).unwrap();
        let c = sample_contacts(&inst, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for i in 0..4 {
            assert_eq!(a[i][i], 0);
            for j in 0..4 {
                assert_eq!(a[i][j], a[j][i]);
            }
        }
    }

    #[test]
    fn poisson_moments_match() {
        // One pair with mean 2; 10^5 draws: sample mean within 3 stderr and
        // sample variance within 5% of the mean.
        let mut inst = tiny_instance(2, 2);
        inst.contact_rate = vec![vec![0.0, 2.0 / inst.deadline], vec![2.0 / inst.deadline, 0.0]];
        let n = 100_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for seed in 0..n {
            let m = sample_contacts(&inst, seed).unwrap();
            let v = m[0][1] as f64;
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let stderr = (2.0f64 / n as f64).sqrt();
        assert!((mean - 2.0).abs() <= 3.0 * stderr, "mean {mean}");
        assert!((var - mean).abs() / mean < 0.05, "var {var} vs mean {mean}");
    }

    #[test]
    fn zero_rate_monte_carlo_is_deterministic() {
        let mut inst = tiny_instance(3, 2);
        for row in &mut inst.contact_rate {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut x = Placement::zeros(&inst);
        x.x[0][0] = 1;
        let (mean, stderr) = monte_carlo_cost(&inst, &x, 1000, 3).unwrap();
        assert_eq!(stderr, 0.0);
        let exact = expected_cost(&inst, &x).unwrap().total;
        assert!((mean - exact).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_converges_to_expected_cost() {
        let inst = tiny_instance(3, 3);
        let mut x = Placement::zeros(&inst);
        x.x[0][0] = 2;
        x.x[1][1] = 1;
        x.x[0][2] = 1;
        let exact = expected_cost(&inst, &x).unwrap().total;
        let (mean, stderr) = monte_carlo_cost(&inst, &x, 100_000, 17).unwrap();
        assert!(
            (mean - exact).abs() <= 4.0 * stderr,
            "analytic {exact} vs empirical {mean} (stderr {stderr})"
        );
    }

    #[test]
    fn stderr_follows_sqrt_law() {
        let inst = tiny_instance(3, 2);
        let mut x = Placement::zeros(&inst);
        x.x[0][1] = 2;
        x.x[1][0] = 1;
        let (_, s1) = monte_carlo_cost(&inst, &x, 50_000, 7).unwrap();
        let (_, s2) = monte_carlo_cost(&inst, &x, 100_000, 7).unwrap();
        let ratio = s2 / s1;
        let expected = 1.0 / 2.0f64.sqrt();
        assert!(
            (ratio - expected).abs() / expected < 0.1,
            "ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn replications_reproduce_independent_of_parallelism() {
        let inst = tiny_instance(4, 3);
        let mut x = Placement::zeros(&inst);
        x.x[0][0] = 1;
        let a = monte_carlo_cost(&inst, &x, 5_000, 11).unwrap();
        let b = monte_carlo_cost(&inst, &x, 5_000, 11).unwrap();
        assert_eq!(a, b);
    }
}
