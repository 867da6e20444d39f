//! Probability kernels for contact counts and collected-segment counts.
//!
//! A user pair (i, j) meets `M` times within the deadline, `M ~ Poisson(λT)`,
//! and up to `B` segments transfer per meeting, so the transferable count is
//! `BM`. The number of segments of a file that i actually collects from j is
//! `min(BM, x)` where `x` is how many segments j caches. This module provides
//! the pmf of `BM`, the law and expectation of `min(BM, x)`, and the law of
//! the total collected count `S = Σ_j min(BM_ij, x_j) + x_i`, truncated with
//! an absorbing cap since the cost model only distinguishes counts below the
//! recovery threshold.

use crate::model::{Instance, Placement};
use crate::{Error, KahanSum, Result};

/// Truncation for an infinite series whose terms decay geometrically: once a
/// term falls below this fraction of the accumulated sum, the remainder is
/// below double rounding.
const SERIES_EPS: f64 = 1e-18;

/// Finite pmf of a count random variable, optionally with an absorbing cap.
///
/// `pmf[t]` is the probability of count `t` for `t < cap`; when
/// `tail_absorbed` is set, `pmf[cap]` carries all probability of counts
/// `>= cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pub cap: usize,
    pub pmf: Vec<f64>,
    pub tail_absorbed: bool,
}

impl CountDistribution {
    /// Unit mass at `value` (clamped to `cap`), over support `0..=cap`.
    pub fn point_mass(cap: usize, value: usize) -> Self {
        let mut pmf = vec![0.0; cap + 1];
        pmf[value.min(cap)] = 1.0;
        CountDistribution {
            cap,
            pmf,
            tail_absorbed: true,
        }
    }

    pub fn mean(&self) -> f64 {
        let mut acc = KahanSum::new();
        for (t, &p) in self.pmf.iter().enumerate() {
            acc.add(t as f64 * p);
        }
        acc.value()
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = KahanSum::new();
        for &p in &self.pmf {
            acc.add(p);
        }
        acc.value()
    }

    /// Clamp tiny negative masses produced by floating-point cancellation.
    fn clamp_negatives(&mut self) {
        for p in &mut self.pmf {
            if *p < 0.0 {
                debug_assert!(*p > -1e-12, "mass below tolerance: {p}");
                *p = 0.0;
            }
        }
    }
}

/// ln(m!) by direct accumulation; exact to ~m·ε which is far below the
/// tolerances in use (m stays small: counts are bounded by recovery
/// thresholds divided by the batch size).
pub(crate) fn ln_factorial(m: u64) -> f64 {
    let mut acc = 0.0;
    for i in 2..=m {
        acc += (i as f64).ln();
    }
    acc
}

/// Poisson pmf at `m` with mean `mu`, via log space to avoid overflow.
fn poisson_pmf(m: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    (m as f64 * mu.ln() - mu - ln_factorial(m)).exp()
}

/// Pr(M >= k) for M ~ Poisson(mu).
///
/// For k <= mu the head sum is moderate and the complement is stable; for
/// k > mu the tail is summed directly (first term in log space, then the
/// term recurrence), so tiny tails carry no cancellation error.
fn poisson_tail(mu: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mu == 0.0 {
        return 0.0;
    }
    if (k as f64) <= mu {
        let mut head = KahanSum::new();
        let mut term = (-mu).exp();
        head.add(term);
        for m in 1..k {
            term *= mu / m as f64;
            head.add(term);
        }
        (1.0 - head.value()).max(0.0)
    } else {
        let mut term = poisson_pmf(k, mu);
        let mut sum = KahanSum::new();
        sum.add(term);
        let mut m = k;
        loop {
            m += 1;
            term *= mu / m as f64;
            sum.add(term);
            if term <= sum.value() * SERIES_EPS || term < f64::MIN_POSITIVE {
                break;
            }
        }
        sum.value()
    }
}

/// Pr(BM = t) for M ~ Poisson(λT): zero unless t is a multiple of the batch
/// size B, else the Poisson pmf at t/B.
pub fn pr_count(lambda: f64, t_d: f64, batch: u32, t: u64) -> f64 {
    debug_assert!(lambda >= 0.0 && t_d >= 0.0 && batch >= 1);
    let b = batch as u64;
    if !t.is_multiple_of(b) {
        return 0.0;
    }
    poisson_pmf(t / b, lambda * t_d)
}

/// Law of min(BM, cap): multiples of B strictly below `cap` carry the Poisson
/// pmf, and `cap` itself carries Pr(BM >= cap) computed as a complemented
/// Poisson CDF rather than by truncating a series.
pub fn min_count_dist(lambda: f64, t_d: f64, batch: u32, cap: usize) -> CountDistribution {
    debug_assert!(lambda >= 0.0 && t_d >= 0.0 && batch >= 1);
    let mut pmf = vec![0.0; cap + 1];
    if cap == 0 {
        pmf[0] = 1.0;
        return CountDistribution {
            cap,
            pmf,
            tail_absorbed: true,
        };
    }
    let mu = lambda * t_d;
    let b = batch as u64;
    // Smallest m with m*B >= cap.
    let k = (cap as u64).div_ceil(b);
    for m in 0..k {
        let t = (m * b) as usize;
        pmf[t] = poisson_pmf(m, mu);
    }
    pmf[cap] = poisson_tail(mu, k);
    CountDistribution {
        cap,
        pmf,
        tail_absorbed: true,
    }
}

/// E(min(BM, k)) as the exact finite sum
/// `Σ_{t<=k} t Pr(BM=t) + k Pr(BM>k)`.
pub fn expected_min(lambda: f64, t_d: f64, batch: u32, k: u32) -> f64 {
    debug_assert!(lambda >= 0.0 && t_d >= 0.0 && batch >= 1);
    if k == 0 {
        return 0.0;
    }
    let mu = lambda * t_d;
    let b = batch as u64;
    let k = k as u64;
    let mut acc = KahanSum::new();
    // t runs over multiples of B up to k.
    for m in 1..=(k / b) {
        acc.add((m * b) as f64 * poisson_pmf(m, mu));
    }
    // BM > k iff M >= floor(k/B) + 1.
    acc.add(k as f64 * poisson_tail(mu, k / b + 1));
    acc.value()
}

/// Convolve two capped distributions, absorbing everything at or above `cap`.
fn convolve_absorb(a: &CountDistribution, b: &CountDistribution, cap: usize) -> CountDistribution {
    let mut pmf = vec![0.0; cap + 1];
    for (s, &pa) in a.pmf.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (t, &pb) in b.pmf.iter().enumerate() {
            if pb == 0.0 {
                continue;
            }
            pmf[(s + t).min(cap)] += pa * pb;
        }
    }
    CountDistribution {
        cap,
        pmf,
        tail_absorbed: true,
    }
}

/// Law of the total collected count S_fi = Σ_{j≠i} min(BM_ij, x_fj) + x_fi,
/// truncated with an absorbing cap at the file's recovery threshold. The
/// per-pair min laws are convolved sequentially, which is the polynomial-time
/// recursion behind the exact cost evaluator.
pub fn segment_count_dist(
    inst: &Instance,
    x: &Placement,
    file: usize,
    user: usize,
) -> Result<CountDistribution> {
    if x.x.len() != inst.num_files || x.x.iter().any(|row| row.len() != inst.num_users) {
        return Err(Error::DimensionMismatch(format!(
            "placement is {}x{}, instance expects {}x{}",
            x.x.len(),
            x.x.first().map_or(0, |r| r.len()),
            inst.num_files,
            inst.num_users
        )));
    }
    if file >= inst.num_files || user >= inst.num_users {
        return Err(Error::DimensionMismatch(format!(
            "index (f={file}, i={user}) out of range"
        )));
    }
    let order: Vec<usize> = (0..inst.num_users).filter(|&j| j != user).collect();
    Ok(segment_count_dist_ordered(inst, x, file, user, &order))
}

/// Same as [`segment_count_dist`] with an explicit convolution order over the
/// other users; the result is order-invariant (tested), the parameter exists
/// so that invariance is testable.
pub(crate) fn segment_count_dist_ordered(
    inst: &Instance,
    x: &Placement,
    file: usize,
    user: usize,
    order: &[usize],
) -> CountDistribution {
    let cap = inst.s_rec[file] as usize;
    let mut dist = CountDistribution::point_mass(cap, x.x[file][user] as usize);
    for &j in order {
        debug_assert_ne!(j, user);
        let x_fj = x.x[file][j] as usize;
        if x_fj == 0 {
            continue; // min(BM, 0) = 0: identity for the convolution
        }
        let part = min_count_dist(
            inst.contact_rate[user][j],
            inst.deadline,
            inst.batch,
            x_fj.min(cap),
        );
        dist = convolve_absorb(&dist, &part, cap);
    }
    dist.clamp_negatives();
    dist
}
