//! Problem instances, feasibility validation, random instance generators,
//! and the 3-SAT reduction gadget.
//!
//! An [`Instance`] fully describes a placement problem: users with cache
//! budgets, files split into coded segments, per-user request probabilities,
//! pairwise contact rates, per-segment costs, and the collection deadline.
//! A [`Placement`] assigns a segment count per (file, user). Validation
//! reports violations rather than failing, so callers can surface all
//! problems at once.

use std::fmt;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Normalization tolerance for request-probability columns.
pub const PROB_TOL: f64 = 1e-9;

/// Full problem description.
///
/// Shapes: `req_prob` is files x users, `contact_rate` is users x users
/// (symmetric, zero diagonal). Instances are immutable once built and safe
/// to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "U")]
    pub num_users: usize,
    #[serde(rename = "F")]
    pub num_files: usize,
    /// Cache capacity per user, in segments.
    #[serde(rename = "C")]
    pub cache_size: Vec<u32>,
    /// Distinct segments needed to recover each file.
    pub s_rec: Vec<u32>,
    /// Encoded segments that exist of each file; caps system-wide caching.
    pub s_max: Vec<u32>,
    /// Request probability per (file, user); each user column sums to 1.
    #[serde(rename = "P")]
    pub req_prob: Vec<Vec<f64>>,
    /// Pairwise contact rates (contacts per unit time).
    #[serde(rename = "lambda")]
    pub contact_rate: Vec<Vec<f64>>,
    /// Segments transferable per contact.
    #[serde(rename = "B")]
    pub batch: u32,
    /// Cost of one segment obtained from another user.
    pub delta_d: f64,
    /// Cost of one segment downloaded from the network.
    pub delta_n: f64,
    /// Collection deadline.
    #[serde(rename = "T_D")]
    pub deadline: f64,
}

/// Caching placement: `x[f][i]` segments of file `f` cached at user `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub x: Vec<Vec<u32>>,
}

/// A violation of an [`Instance`] invariant, naming the field and index.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BadLength {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    NonPositive {
        field: &'static str,
    },
    ProbOutOfRange {
        file: usize,
        user: usize,
        value: f64,
    },
    ProbColumnSum {
        user: usize,
        sum: f64,
    },
    RateNegative {
        i: usize,
        j: usize,
    },
    RateAsymmetric {
        i: usize,
        j: usize,
    },
    RateDiagonal {
        user: usize,
    },
    RecoveryExceedsEncoded {
        file: usize,
    },
    RecoveryZero {
        file: usize,
    },
    CostOrder {
        delta_d: f64,
        delta_n: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadLength {
                field,
                expected,
                actual,
            } => write!(f, "{field}: expected length {expected}, got {actual}"),
            Violation::NonPositive { field } => write!(f, "{field}: must be positive"),
            Violation::ProbOutOfRange { file, user, value } => {
                write!(f, "P[{file}][{user}] = {value} outside [0,1]")
            }
            Violation::ProbColumnSum { user, sum } => {
                write!(f, "P column for user {user} sums to {sum}, expected 1")
            }
            Violation::RateNegative { i, j } => write!(f, "lambda[{i}][{j}] negative"),
            Violation::RateAsymmetric { i, j } => {
                write!(f, "lambda[{i}][{j}] != lambda[{j}][{i}]")
            }
            Violation::RateDiagonal { user } => write!(f, "lambda[{user}][{user}] nonzero"),
            Violation::RecoveryExceedsEncoded { file } => {
                write!(f, "s_rec[{file}] exceeds s_max[{file}]")
            }
            Violation::RecoveryZero { file } => write!(f, "s_rec[{file}] must be positive"),
            Violation::CostOrder { delta_d, delta_n } => {
                write!(f, "cost order violated: delta_n {delta_n} < delta_d {delta_d} or negative")
            }
        }
    }
}

/// A violation of a [`Placement`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum PlacementViolation {
    CacheExceeded { user: usize, used: u64, cap: u32 },
    AvailabilityExceeded { file: usize, used: u64, cap: u32 },
    EntryAboveRecovery { file: usize, user: usize, value: u32, s_rec: u32 },
}

impl fmt::Display for PlacementViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlacementViolation::CacheExceeded { user, used, cap } => {
                write!(f, "user {user} caches {used} segments, capacity {cap}")
            }
            PlacementViolation::AvailabilityExceeded { file, used, cap } => {
                write!(f, "file {file} cached {used} times, only {cap} segments encoded")
            }
            PlacementViolation::EntryAboveRecovery {
                file,
                user,
                value,
                s_rec,
            } => write!(
                f,
                "x[{file}][{user}] = {value} exceeds recovery threshold {s_rec}"
            ),
        }
    }
}

impl Instance {
    /// Expected number of contacts of pair (i, j) within the deadline.
    pub fn mean_contacts(&self, i: usize, j: usize) -> f64 {
        self.contact_rate[i][j] * self.deadline
    }

    /// Check every instance invariant; empty result means the instance is
    /// well formed. Reports rather than fails.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let u = self.num_users;
        let f = self.num_files;
        if u == 0 {
            out.push(Violation::NonPositive { field: "U" });
        }
        if f == 0 {
            out.push(Violation::NonPositive { field: "F" });
        }
        if self.batch == 0 {
            out.push(Violation::NonPositive { field: "B" });
        }
        if !(self.deadline > 0.0) {
            out.push(Violation::NonPositive { field: "T_D" });
        }
        if self.cache_size.len() != u {
            out.push(Violation::BadLength {
                field: "C",
                expected: u,
                actual: self.cache_size.len(),
            });
        }
        for (field, v) in [("s_rec", &self.s_rec), ("s_max", &self.s_max)] {
            if v.len() != f {
                out.push(Violation::BadLength {
                    field,
                    expected: f,
                    actual: v.len(),
                });
            }
        }
        if self.req_prob.len() != f || self.req_prob.iter().any(|row| row.len() != u) {
            out.push(Violation::BadLength {
                field: "P",
                expected: f * u,
                actual: self.req_prob.iter().map(Vec::len).sum(),
            });
            return out; // shapes are off; element checks would index out of range
        }
        if self.contact_rate.len() != u || self.contact_rate.iter().any(|row| row.len() != u) {
            out.push(Violation::BadLength {
                field: "lambda",
                expected: u * u,
                actual: self.contact_rate.iter().map(Vec::len).sum(),
            });
            return out;
        }
        for i in 0..u {
            let mut sum = 0.0;
            for fi in 0..f {
                let p = self.req_prob[fi][i];
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation::ProbOutOfRange {
                        file: fi,
                        user: i,
                        value: p,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                out.push(Violation::ProbColumnSum { user: i, sum });
            }
        }
        for i in 0..u {
            if self.contact_rate[i][i] != 0.0 {
                out.push(Violation::RateDiagonal { user: i });
            }
            for j in 0..u {
                if self.contact_rate[i][j] < 0.0 {
                    out.push(Violation::RateNegative { i, j });
                }
                if j > i && self.contact_rate[i][j] != self.contact_rate[j][i] {
                    out.push(Violation::RateAsymmetric { i, j });
                }
            }
        }
        for fi in 0..f.min(self.s_rec.len()).min(self.s_max.len()) {
            if self.s_rec[fi] == 0 {
                out.push(Violation::RecoveryZero { file: fi });
            }
            if self.s_rec[fi] > self.s_max[fi] {
                out.push(Violation::RecoveryExceedsEncoded { file: fi });
            }
        }
        if !(self.delta_d >= 0.0 && self.delta_n >= self.delta_d) {
            out.push(Violation::CostOrder {
                delta_d: self.delta_d,
                delta_n: self.delta_n,
            });
        }
        out
    }

    /// Check a placement against this instance. Dimension mismatch is an
    /// error (the check itself cannot proceed); constraint breaches are
    /// returned as violations.
    pub fn validate_placement(&self, x: &Placement) -> Result<Vec<PlacementViolation>> {
        if x.x.len() != self.num_files || x.x.iter().any(|row| row.len() != self.num_users) {
            return Err(Error::DimensionMismatch(format!(
                "placement is {}x{}, instance expects {}x{}",
                x.x.len(),
                x.x.first().map_or(0, |r| r.len()),
                self.num_files,
                self.num_users
            )));
        }
        let mut out = Vec::new();
        for i in 0..self.num_users {
            let used: u64 = (0..self.num_files).map(|f| x.x[f][i] as u64).sum();
            if used > self.cache_size[i] as u64 {
                out.push(PlacementViolation::CacheExceeded {
                    user: i,
                    used,
                    cap: self.cache_size[i],
                });
            }
        }
        for f in 0..self.num_files {
            let used: u64 = x.x[f].iter().map(|&v| v as u64).sum();
            if used > self.s_max[f] as u64 {
                out.push(PlacementViolation::AvailabilityExceeded {
                    file: f,
                    used,
                    cap: self.s_max[f],
                });
            }
            for i in 0..self.num_users {
                if x.x[f][i] > self.s_rec[f] {
                    out.push(PlacementViolation::EntryAboveRecovery {
                        file: f,
                        user: i,
                        value: x.x[f][i],
                        s_rec: self.s_rec[f],
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

impl Placement {
    pub fn zeros(inst: &Instance) -> Placement {
        Placement {
            x: vec![vec![0; inst.num_users]; inst.num_files],
        }
    }

    /// Total segments cached by `user`.
    pub fn cache_used(&self, user: usize) -> u64 {
        self.x.iter().map(|row| row[user] as u64).sum()
    }

    /// Total cached segments of `file` across all users.
    pub fn file_used(&self, file: usize) -> u64 {
        self.x[file].iter().map(|&v| v as u64).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Placement> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Zipf request-probability column: `P[f] ∝ (f+1)^(-gamma)` normalized to 1.
pub fn gen_zipf(num_files: usize, gamma: f64) -> Result<Vec<f64>> {
    if num_files == 0 {
        return Err(Error::InvalidParameter("F must be >= 1".into()));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidParameter("zipf gamma must be >= 0".into()));
    }
    let weights: Vec<f64> = (1..=num_files).map(|f| (f as f64).powf(-gamma)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Symmetric contact-rate matrix with zero diagonal; the upper triangle is
/// i.i.d. Gamma(shape, scale) drawn from a ChaCha8 stream, so the same seed
/// reproduces the same matrix on every platform.
pub fn gen_contact_rates(num_users: usize, shape: f64, scale: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if num_users < 2 {
        return Err(Error::InvalidParameter("U must be >= 2".into()));
    }
    if !(shape > 0.0 && scale > 0.0) {
        return Err(Error::InvalidParameter(
            "gamma shape and scale must be positive".into(),
        ));
    }
    let gamma = Gamma::new(shape, scale)
        .map_err(|e| Error::InvalidParameter(format!("gamma distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rates = vec![vec![0.0; num_users]; num_users];
    for i in 0..num_users {
        for j in (i + 1)..num_users {
            let r = gamma.sample(&mut rng);
            rates[i][j] = r;
            rates[j][i] = r;
        }
    }
    Ok(rates)
}

/// Per-file recovery thresholds drawn uniformly from {1..s_star}, with
/// `s_max = alpha * s_rec` so every file has the same encoding ratio.
pub fn gen_thresholds(
    num_files: usize,
    s_star: u32,
    alpha: u32,
    seed: u64,
) -> Result<(Vec<u32>, Vec<u32>)> {
    if s_star < 1 || alpha < 1 {
        return Err(Error::InvalidParameter(
            "s_star and alpha must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_rec: Vec<u32> = (0..num_files).map(|_| rng.gen_range(1..=s_star)).collect();
    let s_max: Vec<u32> = s_rec.iter().map(|&s| alpha * s).collect();
    Ok((s_rec, s_max))
}

/// Scalar knobs from which experiment instances are generated. JSON field
/// names match the instance format where they overlap.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    #[serde(rename = "U")]
    pub num_users: usize,
    #[serde(rename = "F")]
    pub num_files: usize,
    /// Uniform per-user cache size.
    #[serde(rename = "C")]
    pub cache: u32,
    #[serde(rename = "B")]
    pub batch: u32,
    pub delta_d: f64,
    pub delta_n: f64,
    #[serde(rename = "T_D")]
    pub deadline: f64,
    /// Zipf exponent for request probabilities (uniform across users).
    pub gamma: f64,
    /// Recovery thresholds are uniform on {1..s_star} unless `s_rec_uniform`
    /// pins them.
    pub s_star: u32,
    /// Encoding ratio s_max / s_rec.
    pub alpha: u32,
    /// Contact-rate Gamma shape (often written beta).
    pub beta: f64,
    /// Contact-rate Gamma scale (often written theta).
    pub theta: f64,
    /// When set, every file gets exactly this recovery threshold.
    pub s_rec_uniform: Option<u32>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_users: 8,
            num_files: 80,
            cache: 5,
            batch: 1,
            delta_d: 1.0,
            delta_n: 30.0,
            deadline: 600.0,
            gamma: 0.8,
            s_star: 4,
            alpha: 3,
            beta: 4.43,
            theta: 1.0 / 1088.0,
            s_rec_uniform: None,
        }
    }
}

/// Build a full instance from a config and seed. Thresholds and contact
/// rates come from distinct substreams of the seed, so varying one dimension
/// of a sweep does not reshuffle the other draws.
pub fn gen_instance(cfg: &GenConfig, seed: u64) -> Result<Instance> {
    let (s_rec, s_max) = match cfg.s_rec_uniform {
        Some(s) => (
            vec![s; cfg.num_files],
            vec![cfg.alpha * s; cfg.num_files],
        ),
        None => gen_thresholds(cfg.num_files, cfg.s_star, cfg.alpha, seed)?,
    };
    let rates = gen_contact_rates(
        cfg.num_users,
        cfg.beta,
        cfg.theta,
        seed ^ 0x9E37_79B9_7F4A_7C15,
    )?;
    let column = gen_zipf(cfg.num_files, cfg.gamma)?;
    let req_prob: Vec<Vec<f64>> = column
        .iter()
        .map(|&p| vec![p; cfg.num_users])
        .collect();
    let inst = Instance {
        num_users: cfg.num_users,
        num_files: cfg.num_files,
        cache_size: vec![cfg.cache; cfg.num_users],
        s_rec,
        s_max,
        req_prob,
        contact_rate: rates,
        batch: cfg.batch,
        delta_d: cfg.delta_d,
        delta_n: cfg.delta_n,
        deadline: cfg.deadline,
    };
    debug_assert!(inst.validate().is_empty());
    Ok(inst)
}

/// A 3-CNF formula: clauses of exactly three signed literals over variables
/// 1..=num_vars (DIMACS sign convention).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatFormula {
    pub num_vars: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl SatFormula {
    /// Build a formula, enforcing the structural rules: literals reference
    /// declared variables, each clause has three distinct variables (which
    /// also rules out a variable appearing with its negation).
    pub fn new(num_vars: usize, clauses: Vec<[i32; 3]>) -> Result<SatFormula> {
        for (c, clause) in clauses.iter().enumerate() {
            let mut vars = [0usize; 3];
            for (slot, &lit) in clause.iter().enumerate() {
                if lit == 0 || lit.unsigned_abs() as usize > num_vars {
                    return Err(Error::InvalidParameter(format!(
                        "clause {c}: literal {lit} out of range"
                    )));
                }
                vars[slot] = lit.unsigned_abs() as usize;
            }
            if vars[0] == vars[1] || vars[0] == vars[2] || vars[1] == vars[2] {
                return Err(Error::InvalidParameter(format!(
                    "clause {c}: literals must use three distinct variables"
                )));
            }
        }
        Ok(SatFormula { num_vars, clauses })
    }

    /// Occurrence-count preprocessing checks: each literal (both polarities)
    /// should appear in at least one and at most n-1 clauses, otherwise the
    /// variable admits a trivial assignment. Reported, not enforced: small
    /// structural test formulas legitimately skip this.
    pub fn preprocessing_violations(&self) -> Vec<String> {
        let n = self.clauses.len();
        let mut pos = vec![0usize; self.num_vars + 1];
        let mut neg = vec![0usize; self.num_vars + 1];
        for clause in &self.clauses {
            for &lit in clause {
                if lit > 0 {
                    pos[lit as usize] += 1;
                } else {
                    neg[(-lit) as usize] += 1;
                }
            }
        }
        let mut out = Vec::new();
        for v in 1..=self.num_vars {
            for (count, label) in [(pos[v], "positive"), (neg[v], "negative")] {
                if count == 0 {
                    out.push(format!("{label} literal of variable {v} never appears"));
                } else if n > 0 && count > n - 1 {
                    out.push(format!(
                        "{label} literal of variable {v} appears in {count} of {n} clauses"
                    ));
                }
            }
        }
        out
    }

    pub fn evaluate(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|clause| {
            clause.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize - 1;
                if lit > 0 {
                    assignment[v]
                } else {
                    !assignment[v]
                }
            })
        })
    }

    /// Parse DIMACS CNF text: `c` comment lines, a `p cnf <vars> <clauses>`
    /// header, then whitespace-separated literals with 0 terminating each
    /// clause.
    pub fn parse_dimacs(text: &str) -> Result<SatFormula> {
        let mut num_vars = None;
        let mut declared_clauses = 0usize;
        let mut literals: Vec<i32> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 3 || fields[0] != "cnf" {
                    return Err(Error::Parse(format!("bad problem line: {line}")));
                }
                num_vars = Some(
                    fields[1]
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("variable count: {e}")))?,
                );
                declared_clauses = fields[2]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("clause count: {e}")))?;
                continue;
            }
            for tok in line.split_whitespace() {
                literals.push(
                    tok.parse::<i32>()
                        .map_err(|e| Error::Parse(format!("literal {tok}: {e}")))?,
                );
            }
        }
        let num_vars = num_vars.ok_or_else(|| Error::Parse("missing p cnf header".into()))?;
        let mut clauses = Vec::new();
        let mut current: Vec<i32> = Vec::new();
        for lit in literals {
            if lit == 0 {
                if current.len() != 3 {
                    return Err(Error::Parse(format!(
                        "clause {} has {} literals, expected 3",
                        clauses.len(),
                        current.len()
                    )));
                }
                clauses.push([current[0], current[1], current[2]]);
                current.clear();
            } else {
                current.push(lit);
            }
        }
        if !current.is_empty() {
            return Err(Error::Parse("trailing clause without 0 terminator".into()));
        }
        if declared_clauses != 0 && clauses.len() != declared_clauses {
            return Err(Error::Parse(format!(
                "header declares {declared_clauses} clauses, found {}",
                clauses.len()
            )));
        }
        SatFormula::new(num_vars, clauses)
    }
}

/// Reduce a 3-CNF formula to a placement instance.
///
/// The instance has one user per literal (paired per variable) plus one
/// zero-cache user per clause, and two single-recovery-segment files. Pair
/// members meet often (rate `ln(1/eps)`), unrelated users rarely
/// (`ln(1/(1-eps))`), and each clause user meets the three users standing
/// for its literals often. The network cost is set just above the threshold
/// at which the optimal placement encodes a satisfying assignment (one file
/// per pair member) whenever one exists.
pub fn reduce_3sat(formula: &SatFormula, eps: f64, delta_d: f64) -> Result<Instance> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(
            "eps must lie strictly between 0 and 1/2".into(),
        ));
    }
    if !(delta_d > 0.0) {
        return Err(Error::InvalidParameter("delta_d must be positive".into()));
    }
    let m = formula.num_vars;
    let n = formula.clauses.len();
    if m < 3 || n == 0 {
        return Err(Error::InvalidParameter(
            "need at least 3 variables and 1 clause".into(),
        ));
    }
    let num_users = 2 * m + n;
    let rate_close = (1.0 / eps).ln();
    let rate_far = (1.0 / (1.0 - eps)).ln();

    let mut rates = vec![vec![rate_far; num_users]; num_users];
    for i in 0..num_users {
        rates[i][i] = 0.0;
    }
    // Literal pairs: users (2t, 2t+1) stand for z_{t+1} and its negation.
    for t in 0..m {
        rates[2 * t][2 * t + 1] = rate_close;
        rates[2 * t + 1][2 * t] = rate_close;
    }
    // Clause users meet the representatives of their literals often.
    for (c, clause) in formula.clauses.iter().enumerate() {
        let cu = 2 * m + c;
        for &lit in clause {
            let var = lit.unsigned_abs() as usize - 1;
            let rep = if lit > 0 { 2 * var } else { 2 * var + 1 };
            rates[cu][rep] = rate_close;
            rates[rep][cu] = rate_close;
        }
    }

    let mut cache = vec![1u32; num_users];
    for c in cache.iter_mut().skip(2 * m) {
        *c = 0;
    }

    // Files a (index 0) and b (index 1). Literal users want both equally,
    // clause users want only a.
    let mut req_prob = vec![vec![0.0; num_users]; 2];
    for i in 0..2 * m {
        req_prob[0][i] = 0.5;
        req_prob[1][i] = 0.5;
    }
    for i in 2 * m..num_users {
        req_prob[0][i] = 1.0;
    }

    let mf = m as f64;
    let nf = n as f64;
    let threshold = 3.0 * nf + nf * eps * (mf - 3.0) / (1.0 - eps).powi(m as i32 - 2);
    let delta_n = 1.01 * threshold * delta_d;

    let inst = Instance {
        num_users,
        num_files: 2,
        cache_size: cache,
        s_rec: vec![1, 1],
        s_max: vec![m as u32, m as u32],
        req_prob,
        contact_rate: rates,
        batch: 1,
        delta_d,
        delta_n,
        deadline: 1.0,
    };
    debug_assert!(inst.validate().is_empty(), "{:?}", inst.validate());
    Ok(inst)
}

#[cfg(test)]
pub(crate) mod test_instances {
    use super::*;

    /// Small deterministic instance with varied thresholds and rates; valid
    /// by construction.
    pub fn tiny_instance(num_users: usize, num_files: usize) -> Instance {
        let s_rec: Vec<u32> = (0..num_files).map(|f| [3, 2, 4, 1][f % 4]).collect();
        let s_max: Vec<u32> = s_rec.iter().map(|&s| 3 * s).collect();
        let column = gen_zipf(num_files, 0.7).unwrap();
        let req_prob: Vec<Vec<f64>> = column.iter().map(|&p| vec![p; num_users]).collect();
        let mut rates = vec![vec![0.0; num_users]; num_users];
        for i in 0..num_users {
            for j in (i + 1)..num_users {
                let r = 0.2 + 0.13 * ((i + j) % 5) as f64;
                rates[i][j] = r;
                rates[j][i] = r;
            }
        }
        let inst = Instance {
            num_users,
            num_files,
            cache_size: (0..num_users).map(|i| 2 + (i % 2) as u32).collect(),
            s_rec,
            s_max,
            req_prob,
            contact_rate: rates,
            batch: 1,
            delta_d: 1.0,
            delta_n: 30.0,
            deadline: 1.5,
        };
        assert!(inst.validate().is_empty());
        inst
    }
}
