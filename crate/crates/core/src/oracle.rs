//! Brute-force exact solvers for tiny instances.
//!
//! These are the ground truth that every optimizer is checked against, plus
//! the decision experiment on reduced 3-SAT instances. They refuse instances
//! whose search space exceeds the evaluation budget rather than returning a
//! silent partial answer.

use crate::cost::{expected_cost, expected_cost_lb};
use crate::model::{reduce_3sat, Instance, Placement, SatFormula};
use crate::{Error, Result};

/// Default cap on objective evaluations.
pub const DEFAULT_ENUM_BUDGET: u64 = 100_000_000;

/// All cache allocations for one user: vectors over files with
/// `x_f <= min(s_rec_f, s_max_f)` and total at most the cache size,
/// in lexicographic order.
fn feasible_columns(inst: &Instance, user: usize, limit: u64) -> Result<Vec<Vec<u32>>> {
    let caps: Vec<u32> = (0..inst.num_files)
        .map(|f| inst.s_rec[f].min(inst.s_max[f]))
        .collect();
    let mut out = Vec::new();
    let mut current = vec![0u32; inst.num_files];
    fn rec(
        caps: &[u32],
        budget: u32,
        f: usize,
        current: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
        limit: u64,
    ) -> Result<()> {
        if f == caps.len() {
            out.push(current.clone());
            if out.len() as u64 > limit {
                return Err(Error::BudgetExceeded(format!(
                    "more than {limit} allocations for a single user"
                )));
            }
            return Ok(());
        }
        for v in 0..=caps[f].min(budget) {
            current[f] = v;
            rec(caps, budget - v, f + 1, current, out, limit)?;
        }
        current[f] = 0;
        Ok(())
    }
    rec(
        &caps,
        inst.cache_size[user],
        0,
        &mut current,
        &mut out,
        limit,
    )?;
    Ok(out)
}

/// Exhaustively minimize `objective` over all feasible placements, users
/// enumerated in the given order. First optimum found wins ties, which under
/// the identity order makes the result the user-major lexicographic minimum.
fn enumerate_best<F>(
    inst: &Instance,
    limit: u64,
    user_order: &[usize],
    mut objective: F,
) -> Result<(Placement, f64)>
where
    F: FnMut(&Placement) -> Result<f64>,
{
    let columns: Vec<Vec<Vec<u32>>> = (0..inst.num_users)
        .map(|i| feasible_columns(inst, i, limit))
        .collect::<Result<_>>()?;
    let mut space: u128 = 1;
    for cols in &columns {
        space = space.saturating_mul(cols.len() as u128);
    }
    if space > limit as u128 {
        return Err(Error::BudgetExceeded(format!(
            "search space {space} exceeds budget {limit}"
        )));
    }

    let mut x = Placement::zeros(inst);
    let mut avail: Vec<i64> = inst.s_max.iter().map(|&s| s as i64).collect();
    let mut best: Option<(Placement, f64)> = None;
    let mut evals: u64 = 0;

    #[allow(clippy::too_many_arguments)]
    fn dfs<F>(
        columns: &[Vec<Vec<u32>>],
        user_order: &[usize],
        depth: usize,
        x: &mut Placement,
        avail: &mut [i64],
        best: &mut Option<(Placement, f64)>,
        evals: &mut u64,
        limit: u64,
        objective: &mut F,
    ) -> Result<()>
    where
        F: FnMut(&Placement) -> Result<f64>,
    {
        if depth == user_order.len() {
            *evals += 1;
            if *evals > limit {
                return Err(Error::BudgetExceeded(format!(
                    "exceeded {limit} objective evaluations"
                )));
            }
            let value = objective(x)?;
            match best {
                Some((_, b)) if value >= *b => {}
                _ => *best = Some((x.clone(), value)),
            }
            return Ok(());
        }
        let user = user_order[depth];
        'cols: for col in &columns[user] {
            for (f, &v) in col.iter().enumerate() {
                if (v as i64) > avail[f] {
                    continue 'cols;
                }
            }
            for (f, &v) in col.iter().enumerate() {
                x.x[f][user] = v;
                avail[f] -= v as i64;
            }
            dfs(
                columns, user_order, depth + 1, x, avail, best, evals, limit, objective,
            )?;
            for (f, &v) in col.iter().enumerate() {
                x.x[f][user] = 0;
                avail[f] += v as i64;
            }
        }
        Ok(())
    }

    dfs(
        &columns,
        user_order,
        0,
        &mut x,
        &mut avail,
        &mut best,
        &mut evals,
        limit,
        &mut objective,
    )?;
    best.ok_or_else(|| Error::InvalidParameter("no feasible placement".into()))
}

/// Globally minimal expected cost and one argmin (user-major lexicographic
/// tie break).
pub fn enumerate_cocp(inst: &Instance, limit: u64) -> Result<(Placement, f64)> {
    let order: Vec<usize> = (0..inst.num_users).collect();
    enumerate_best(inst, limit, &order, |x| Ok(expected_cost(inst, x)?.total))
}

/// Globally minimal lower-bound objective and one argmin.
pub fn enumerate_acocp(inst: &Instance, limit: u64) -> Result<(Placement, f64)> {
    let order: Vec<usize> = (0..inst.num_users).collect();
    enumerate_best(inst, limit, &order, |x| expected_cost_lb(inst, x))
}

#[cfg(test)]
pub(crate) fn enumerate_cocp_ordered(
    inst: &Instance,
    limit: u64,
    order: &[usize],
) -> Result<(Placement, f64)> {
    enumerate_best(inst, limit, order, |x| Ok(expected_cost(inst, x)?.total))
}

/// Outcome of solving a reduced 3-SAT instance exactly.
#[derive(Debug, Clone)]
pub struct SatDecisionReport {
    /// Optimal expected cost of the reduced instance.
    pub optimum: f64,
    pub placement: Placement,
    /// Whether every literal pair caches one segment of each file (the
    /// decodable pattern). When false the experiment is inconclusive.
    pub pair_pattern: bool,
    /// Decoded assignment: variable t is true iff the user standing for the
    /// positive literal caches file a. Present only for patterned optima.
    pub assignment: Option<Vec<bool>>,
    /// Whether the decoded assignment satisfies the formula.
    pub satisfying: Option<bool>,
}

/// Reduce a formula, solve the reduction exactly, and decode the optimal
/// placement back into an assignment when its structure permits.
pub fn sat_decision_experiment(
    phi: &SatFormula,
    eps: f64,
    limit: u64,
) -> Result<SatDecisionReport> {
    let inst = reduce_3sat(phi, eps, 1.0)?;
    let (placement, optimum) = enumerate_cocp(&inst, limit)?;
    let m = phi.num_vars;
    let mut pair_pattern = true;
    let mut assignment = vec![false; m];
    for t in 0..m {
        let pos = (placement.x[0][2 * t], placement.x[1][2 * t]);
        let neg = (placement.x[0][2 * t + 1], placement.x[1][2 * t + 1]);
        match (pos, neg) {
            ((1, 0), (0, 1)) => assignment[t] = true,
            ((0, 1), (1, 0)) => assignment[t] = false,
            _ => {
                pair_pattern = false;
                break;
            }
        }
    }
    let (assignment, satisfying) = if pair_pattern {
        let sat = phi.evaluate(&assignment);
        (Some(assignment), Some(sat))
    } else {
        (None, None)
    };
    Ok(SatDecisionReport {
        optimum,
        placement,
        pair_pattern,
        assignment,
        satisfying,
    })
}
