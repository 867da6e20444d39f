//! The lower-bound placement program and its exact solver.
//!
//! Replacing the expected clamped shortfall with the clamped expected
//! shortfall makes the objective linear in level-indicator variables
//! `y[f][i][k]` (user i caches k segments of file f), at the price of
//! optimizing a lower bound instead of the true cost. Solving this program
//! exactly yields both a good placement and a certified lower bound on the
//! optimum of the original problem, which is what makes heuristics
//! benchmarkable.
//!
//! The internal solver is a depth-first branch-and-bound over the integer
//! levels `x_fi` (the selection constraint makes each (file, user) pair a
//! natural branching group). Two complementary admissible bounds are
//! maintained incrementally and combined by `max`:
//!
//! - a per-file bound that respects the file's remaining segment budget but
//!   lets every file use each user's残 cache independently, and
//! - a per-user bound that respects each user's remaining cache but ignores
//!   segment budgets.
//!
//! Both linearize the clamp through a fixed active-set guess taken from the
//! initial incumbent (`max(a, 0) >= theta * a` for `theta` in {0, 1}), so
//! each is a sum of independent small knapsack DPs. Fully fixed files switch
//! to their exact term values, which makes the bound exact at leaves.

use std::io::Write as IoWrite;

use crate::cost::{expected_cost, expected_cost_lb};
use crate::model::{Instance, Placement};
use crate::prob::expected_min;
use crate::{Error, KahanSum, Result};

/// Default cap on branch-and-bound nodes.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Tolerance below which a subtree cannot improve the incumbent.
const PRUNE_EPS: f64 = 1e-12;

/// Binary level variables, indexed `y[f][i][k]` for `k <= s_rec[f]`.
pub type YVars = Vec<Vec<Vec<f64>>>;

/// The lower-bound program: level indicators, epigraph variables for the
/// clamped network term, and the precomputed expectation coefficients
/// `e[i][j][k] = E(min(B M_ij, k))` the linear rows are built from.
#[derive(Debug, Clone)]
pub struct IlpModel {
    inst: Instance,
    /// `e[i][j][k]`, `k` up to the largest recovery threshold; zero for i=j.
    e: Vec<Vec<Vec<f64>>>,
}

impl IlpModel {
    /// Compute the expectation coefficients and wrap the instance.
    pub fn build(inst: &Instance) -> IlpModel {
        let max_level = inst.s_rec.iter().copied().max().unwrap_or(0) as usize;
        let u = inst.num_users;
        let mut e = vec![vec![vec![0.0; max_level + 1]; u]; u];
        for i in 0..u {
            for j in 0..u {
                if i == j {
                    continue;
                }
                for k in 1..=max_level {
                    e[i][j][k] = expected_min(
                        inst.contact_rate[i][j],
                        inst.deadline,
                        inst.batch,
                        k as u32,
                    );
                }
            }
        }
        IlpModel {
            inst: inst.clone(),
            e,
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    /// `E(min(B M_ij, k))`.
    pub fn e_coef(&self, i: usize, j: usize, k: usize) -> f64 {
        self.e[i][j][k]
    }

    /// One indicator per level 0..=s_rec per (file, user).
    pub fn num_binaries(&self) -> usize {
        self.inst
            .s_rec
            .iter()
            .map(|&s| (s as usize + 1) * self.inst.num_users)
            .sum()
    }

    /// One epigraph variable per (file, user).
    pub fn num_continuous(&self) -> usize {
        self.inst.num_files * self.inst.num_users
    }

    /// The lower-bound objective at an integer placement, computed from the
    /// coefficient tables (no feasibility requirements).
    pub fn lb_objective(&self, x: &Placement) -> f64 {
        let inst = &self.inst;
        let mut acc = KahanSum::new();
        for i in 0..inst.num_users {
            for f in 0..inst.num_files {
                let p = inst.req_prob[f][i];
                if p == 0.0 {
                    continue;
                }
                let mut collected = KahanSum::new();
                for j in 0..inst.num_users {
                    if j != i {
                        collected.add(self.e[i][j][x.x[f][j] as usize]);
                    }
                }
                let d2d = inst.delta_d * collected.value();
                let net = inst.delta_n
                    * (inst.s_rec[f] as f64 - collected.value() - x.x[f][i] as f64);
                acc.add(p * (d2d + net.max(0.0)));
            }
        }
        acc.value() / inst.num_users as f64
    }

    /// Placement encoded by an integral selection: `x[f][i]` is the unique
    /// level with `y = 1`.
    pub fn decode(&self, y: &YVars) -> Result<Placement> {
        let inst = &self.inst;
        if y.len() != inst.num_files {
            return Err(Error::DimensionMismatch("y file dimension".into()));
        }
        let mut x = Placement::zeros(inst);
        for f in 0..inst.num_files {
            if y[f].len() != inst.num_users {
                return Err(Error::DimensionMismatch("y user dimension".into()));
            }
            for i in 0..inst.num_users {
                if y[f][i].len() != inst.s_rec[f] as usize + 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "y[{f}][{i}] must have {} levels",
                        inst.s_rec[f] + 1
                    )));
                }
                let mut selected = None;
                for (k, &v) in y[f][i].iter().enumerate() {
                    if (v - 1.0).abs() <= 1e-9 {
                        if selected.is_some() {
                            return Err(Error::InvalidParameter(format!(
                                "y[{f}][{i}] selects multiple levels"
                            )));
                        }
                        selected = Some(k);
                    } else if v.abs() > 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "y[{f}][{i}][{k}] = {v} is not binary"
                        )));
                    }
                }
                match selected {
                    Some(k) => x.x[f][i] = k as u32,
                    None => {
                        return Err(Error::InvalidParameter(format!(
                            "y[{f}][{i}] selects no level"
                        )))
                    }
                }
            }
        }
        Ok(x)
    }

    /// Inverse of [`IlpModel::decode`] for feasible placements.
    pub fn encode(&self, x: &Placement) -> YVars {
        let inst = &self.inst;
        let mut y = Vec::with_capacity(inst.num_files);
        for f in 0..inst.num_files {
            let mut per_file = Vec::with_capacity(inst.num_users);
            for i in 0..inst.num_users {
                let mut levels = vec![0.0; inst.s_rec[f] as usize + 1];
                levels[x.x[f][i] as usize] = 1.0;
                per_file.push(levels);
            }
            y.push(per_file);
        }
        y
    }

    /// Objective of the program at an integral `y`, with the epigraph
    /// variables at their minimal feasible values.
    pub fn objective_at(&self, y: &YVars) -> Result<f64> {
        let x = self.decode(y)?;
        Ok(self.lb_objective(&x))
    }
}

// ---------------------------------------------------------------------------
// LP text format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn as_str(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Structured form of the exported LP text; writing and re-parsing this
/// document is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDocument {
    pub objective: Vec<(String, f64)>,
    pub constraints: Vec<LpRow>,
    /// Explicit `var >= value` lower bounds.
    pub bounds: Vec<(String, f64)>,
    pub binaries: Vec<String>,
}

fn y_name(f: usize, i: usize, k: usize) -> String {
    format!("y_f{f}_u{i}_k{k}")
}

fn dn2_name(f: usize, i: usize) -> String {
    format!("dn2_f{f}_u{i}")
}

impl IlpModel {
    /// Materialize the objective and constraint rows.
    pub fn to_lp_document(&self) -> LpDocument {
        let inst = &self.inst;
        let u = inst.num_users;
        let uf = u as f64;

        let mut objective = Vec::new();
        for f in 0..inst.num_files {
            for j in 0..u {
                for k in 1..=inst.s_rec[f] as usize {
                    let mut coef = 0.0;
                    for i in 0..u {
                        if i != j {
                            coef += inst.req_prob[f][i] * self.e[i][j][k];
                        }
                    }
                    coef *= inst.delta_d / uf;
                    if coef != 0.0 {
                        objective.push((y_name(f, j, k), coef));
                    }
                }
            }
        }
        for f in 0..inst.num_files {
            for i in 0..u {
                let coef = inst.req_prob[f][i] / uf;
                if coef != 0.0 {
                    objective.push((dn2_name(f, i), coef));
                }
            }
        }

        let mut constraints = Vec::new();
        for f in 0..inst.num_files {
            for i in 0..u {
                let terms = (0..=inst.s_rec[f] as usize)
                    .map(|k| (y_name(f, i, k), 1.0))
                    .collect();
                constraints.push(LpRow {
                    name: format!("sel_f{f}_u{i}"),
                    terms,
                    sense: Sense::Eq,
                    rhs: 1.0,
                });
            }
        }
        for i in 0..u {
            let mut terms = Vec::new();
            for f in 0..inst.num_files {
                for k in 1..=inst.s_rec[f] as usize {
                    terms.push((y_name(f, i, k), k as f64));
                }
            }
            constraints.push(LpRow {
                name: format!("cache_u{i}"),
                terms,
                sense: Sense::Le,
                rhs: inst.cache_size[i] as f64,
            });
        }
        for f in 0..inst.num_files {
            let mut terms = Vec::new();
            for i in 0..u {
                for k in 1..=inst.s_rec[f] as usize {
                    terms.push((y_name(f, i, k), k as f64));
                }
            }
            constraints.push(LpRow {
                name: format!("avail_f{f}"),
                terms,
                sense: Sense::Le,
                rhs: inst.s_max[f] as f64,
            });
        }
        // Epigraph: dn2 >= s_rec dN - dN sum_j e y - dN x, rearranged with
        // every variable on the left.
        for f in 0..inst.num_files {
            for i in 0..u {
                let mut terms = vec![(dn2_name(f, i), 1.0)];
                for j in 0..u {
                    if j == i {
                        continue;
                    }
                    for k in 1..=inst.s_rec[f] as usize {
                        let coef = inst.delta_n * self.e[i][j][k];
                        if coef != 0.0 {
                            terms.push((y_name(f, j, k), coef));
                        }
                    }
                }
                for k in 1..=inst.s_rec[f] as usize {
                    terms.push((y_name(f, i, k), inst.delta_n * k as f64));
                }
                constraints.push(LpRow {
                    name: format!("epi_f{f}_u{i}"),
                    terms,
                    sense: Sense::Ge,
                    rhs: inst.s_rec[f] as f64 * inst.delta_n,
                });
            }
        }

        let bounds = (0..inst.num_files)
            .flat_map(|f| (0..u).map(move |i| (dn2_name(f, i), 0.0)))
            .collect();
        let binaries = (0..inst.num_files)
            .flat_map(|f| {
                let s = inst.s_rec[f] as usize;
                (0..u).flat_map(move |i| (0..=s).map(move |k| y_name(f, i, k)))
            })
            .collect();

        LpDocument {
            objective,
            constraints,
            bounds,
            binaries,
        }
    }

    /// Write the program in CPLEX LP text format.
    pub fn export_lp(&self, sink: &mut impl IoWrite) -> Result<()> {
        let doc = self.to_lp_document();
        sink.write_all(write_lp(&doc).as_bytes())?;
        Ok(())
    }
}

/// Shortest round-trip representation; exponent form for extreme magnitudes.
fn fmt_num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_terms(out: &mut String, terms: &[(String, f64)], indent: &str) {
    for (idx, (name, coef)) in terms.iter().enumerate() {
        if idx == 0 {
            out.push_str(&format!("{}{} {}", indent, fmt_num(*coef), name));
        } else {
            if idx % 8 == 0 {
                out.push('\n');
                out.push_str(indent);
            }
            if *coef < 0.0 {
                out.push_str(&format!(" - {} {}", fmt_num(-coef), name));
            } else {
                out.push_str(&format!(" + {} {}", fmt_num(*coef), name));
            }
        }
    }
}

/// Serialize an LP document.
pub fn write_lp(doc: &LpDocument) -> String {
    let mut out = String::new();
    out.push_str("\\ ACOCP lower-bound model\n");
    out.push_str("Minimize\n");
    let mut obj = String::new();
    write_terms(&mut obj, &doc.objective, " ");
    out.push_str(&format!(" obj:{}\n", obj.strip_prefix(' ').map(|s| format!(" {s}")).unwrap_or_default()));
    out.push_str("Subject To\n");
    for row in &doc.constraints {
        let mut body = String::new();
        write_terms(&mut body, &row.terms, "  ");
        out.push_str(&format!(
            " {}:\n{} {} {}\n",
            row.name,
            body,
            row.sense.as_str(),
            fmt_num(row.rhs)
        ));
    }
    out.push_str("Bounds\n");
    for (name, lb) in &doc.bounds {
        out.push_str(&format!(" {} >= {}\n", name, fmt_num(*lb)));
    }
    out.push_str("Binary\n");
    for chunk in doc.binaries.chunks(8) {
        out.push(' ');
        out.push_str(&chunk.join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn parse_terms(tokens: &[&str]) -> Result<Vec<(String, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut pending: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    if pending.is_some() {
                        return Err(Error::Parse(format!("two numbers in a row near {tok}")));
                    }
                    pending = Some(sign * v);
                    sign = 1.0;
                } else {
                    let coef = pending.take().unwrap_or(sign);
                    terms.push((tok.to_string(), coef));
                    sign = 1.0;
                }
            }
        }
    }
    if pending.is_some() {
        return Err(Error::Parse("dangling coefficient".into()));
    }
    Ok(terms)
}

/// Parse LP text produced by [`write_lp`] (plus minor whitespace variation)
/// back into a structured document.
pub fn parse_lp(text: &str) -> Result<LpDocument> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Constraints,
        Bounds,
        Binary,
        Done,
    }
    let mut section = Section::Preamble;
    let mut objective_tokens: Vec<String> = Vec::new();
    let mut constraint_chunks: Vec<Vec<String>> = Vec::new();
    let mut bounds = Vec::new();
    let mut binaries = Vec::new();
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim_end();
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "Minimize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binary" => {
                section = Section::Binary;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Preamble | Section::Done => {}
            Section::Objective => {
                objective_tokens.extend(trimmed.split_whitespace().map(String::from));
            }
            Section::Constraints => {
                if trimmed.contains(':') {
                    constraint_chunks.push(Vec::new());
                }
                let chunk = constraint_chunks
                    .last_mut()
                    .ok_or_else(|| Error::Parse("constraint body before a name".into()))?;
                chunk.extend(trimmed.split_whitespace().map(String::from));
            }
            Section::Bounds => {
                let toks: Vec<&str> = trimmed.split_whitespace().collect();
                if toks.len() != 3 || toks[1] != ">=" {
                    return Err(Error::Parse(format!("unsupported bound: {trimmed}")));
                }
                let v = toks[2]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bound value: {e}")))?;
                bounds.push((toks[0].to_string(), v));
            }
            Section::Binary => {
                binaries.extend(trimmed.split_whitespace().map(String::from));
            }
        }
    }

    // Objective: strip the leading `obj:` label.
    let mut obj_tokens: Vec<&str> = objective_tokens.iter().map(String::as_str).collect();
    if let Some(first) = obj_tokens.first() {
        if let Some(stripped) = first.strip_suffix(':') {
            let _ = stripped;
            obj_tokens.remove(0);
        }
    }
    let objective = parse_terms(&obj_tokens)?;

    let mut constraints = Vec::new();
    for chunk in &constraint_chunks {
        let mut toks: Vec<&str> = chunk.iter().map(String::as_str).collect();
        if toks.is_empty() {
            return Err(Error::Parse("empty constraint".into()));
        }
        let name = toks[0]
            .strip_suffix(':')
            .ok_or_else(|| Error::Parse(format!("constraint name missing colon: {}", toks[0])))?
            .to_string();
        toks.remove(0);
        let sense_pos = toks
            .iter()
            .position(|t| matches!(*t, "<=" | ">=" | "="))
            .ok_or_else(|| Error::Parse(format!("constraint {name} has no relation")))?;
        let sense = match toks[sense_pos] {
            "<=" => Sense::Le,
            ">=" => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = toks
            .get(sense_pos + 1)
            .ok_or_else(|| Error::Parse(format!("constraint {name} missing rhs")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("constraint {name} rhs: {e}")))?;
        let terms = parse_terms(&toks[..sense_pos])?;
        constraints.push(LpRow {
            name,
            terms,
            sense,
            rhs,
        });
    }

    Ok(LpDocument {
        objective,
        constraints,
        bounds,
        binaries,
    })
}

// ---------------------------------------------------------------------------
// Exact solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// The returned placement minimizes the lower-bound objective (absolute
    /// tolerance 1e-9).
    Optimal,
    /// Node budget exhausted: the placement is the best incumbent and
    /// `lb_value` is a valid global lower bound.
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Best placement found (the optimum when status is `Optimal`).
    pub placement: Placement,
    /// Certified lower bound on the lower-bound objective, hence on the
    /// optimum of the exact problem.
    pub lb_value: f64,
    /// Exact expected cost of `placement`.
    pub ub_value: f64,
    /// Branch-and-bound nodes expanded.
    pub nodes: u64,
    pub status: SolveStatus,
}

/// Dual prices for the two bound relaxations, tuned once at the root by
/// projected subgradient and then frozen so the search stays deterministic.
///
/// `theta[f][i]` in [0, 1] underestimates the clamp (`max(a, 0) >= theta a`),
/// `nu[f] >= 0` prices a file's segment budget inside the cache-side bound,
/// `mu[j] >= 0` prices a user's cache inside the availability-side bound.
#[derive(Debug, Clone)]
pub(crate) struct Prices {
    theta: Vec<Vec<f64>>,
    mu: Vec<f64>,
    nu: Vec<f64>,
}

/// Cost tables derived from a fixed set of prices.
struct Tables {
    /// Cache-side per-variable cost: theta-linear part plus `nu_f * k`.
    gc: Vec<Vec<Vec<f64>>>,
    /// Availability-side per-variable cost: theta-linear part plus `mu_j * k`.
    ga: Vec<Vec<Vec<f64>>>,
    /// Per-file constant of the theta-linearized objective.
    const_file: Vec<f64>,
    /// Constant of the cache-side bound (theta constants minus priced
    /// segment budgets).
    cache_offset: f64,
    /// Constant of the availability-side bound (priced cache budgets; the
    /// per-file theta constants are added per file).
    avail_offset: f64,
    /// Cache prices, kept for the exact-file adjustment.
    mu: Vec<f64>,
}

impl Tables {
    /// The theta-linearized objective underestimates the true one:
    /// per (f, i), `max(a, 0) >= theta a` for any theta in [0, 1]. Folding
    /// the 1/U weight in, the linear form splits into per-variable costs
    /// `g[f][j](k)` plus per-file constants. The two price vectors shift
    /// those costs by `nu_f k` (cache side) and `mu_j k` (availability
    /// side), compensated in the offsets, which is the usual Lagrangian
    /// treatment of the constraint family each bound drops.
    fn build(model: &IlpModel, prices: &Prices) -> Tables {
        let inst = &model.inst;
        let u = inst.num_users;
        let uf = u as f64;
        let mut gc = vec![vec![Vec::new(); u]; inst.num_files];
        let mut ga = vec![vec![Vec::new(); u]; inst.num_files];
        let mut const_file = vec![0.0; inst.num_files];
        for f in 0..inst.num_files {
            let s = inst.s_rec[f] as usize;
            for i in 0..u {
                const_file[f] += prices.theta[f][i]
                    * inst.req_prob[f][i]
                    * inst.delta_n
                    * inst.s_rec[f] as f64
                    / uf;
            }
            for j in 0..u {
                let mut base = vec![0.0; s + 1];
                for (k, slot) in base.iter_mut().enumerate().skip(1) {
                    let mut v = 0.0;
                    for i in 0..u {
                        if i == j {
                            continue;
                        }
                        let price =
                            inst.delta_d - prices.theta[f][i] * inst.delta_n;
                        v += inst.req_prob[f][i] * price * model.e[i][j][k];
                    }
                    v -= prices.theta[f][j] * inst.req_prob[f][j] * inst.delta_n * k as f64;
                    *slot = v / uf;
                }
                let col_c: Vec<f64> = base
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| v + prices.nu[f] * k as f64)
                    .collect();
                let col_a: Vec<f64> = base
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| v + prices.mu[j] * k as f64)
                    .collect();
                gc[f][j] = col_c;
                ga[f][j] = col_a;
            }
        }
        let const_total: f64 = const_file.iter().sum();
        let priced_avail: f64 = (0..inst.num_files)
            .map(|f| prices.nu[f] * inst.s_max[f] as f64)
            .sum();
        let priced_cache: f64 = (0..u)
            .map(|j| prices.mu[j] * inst.cache_size[j] as f64)
            .sum();
        Tables {
            gc,
            ga,
            const_file,
            cache_offset: const_total - priced_avail,
            avail_offset: -priced_cache,
            mu: prices.mu.clone(),
        }
    }
}

/// Branch-and-bound state over (file, user) level groups. Exposed to tests
/// so bound admissibility can be checked at hand-built nodes.
pub(crate) struct Search<'a> {
    model: &'a IlpModel,
    /// Branchable groups in static order (largest cost leverage first).
    pub(crate) groups: Vec<(usize, usize)>,
    tables: Tables,
    // Node state.
    x: Vec<Vec<u32>>,
    fixed: Vec<Vec<bool>>,
    cache_rem: Vec<u32>,
    avail_rem: Vec<u32>,
    free_in_file: Vec<usize>,
    /// Availability-side term per file (priced; exact + price for fully
    /// fixed files).
    file_term: Vec<f64>,
    /// Cache-side DP value per user over its free groups.
    user_dp: Vec<f64>,
    /// Cache-side contribution of a user's fixed groups.
    fixed_gc: Vec<f64>,
    /// Availability-side contribution of a file's fixed groups.
    fixed_ga: Vec<f64>,
    dp_cur: Vec<f64>,
    dp_next: Vec<f64>,
}

/// Saved values restored on backtrack, so repeated push/pop introduces no
/// floating-point drift.
pub(crate) struct Frame {
    file_term: f64,
    user_dp: f64,
    fixed_gc: f64,
    fixed_ga: f64,
}

impl<'a> Search<'a> {
    pub(crate) fn new(model: &'a IlpModel, prices: &Prices) -> Search<'a> {
        let inst = &model.inst;
        let u = inst.num_users;
        let tables = Tables::build(model, prices);

        // Branch order: descending P * delta_n * s_rec, ties by index.
        let mut groups = Vec::new();
        let mut fixed = vec![vec![false; u]; inst.num_files];
        let mut free_in_file = vec![0usize; inst.num_files];
        for f in 0..inst.num_files {
            for i in 0..u {
                let ub = inst.s_rec[f].min(inst.cache_size[i]);
                if ub == 0 {
                    fixed[f][i] = true; // forced to zero, never branched
                } else {
                    groups.push((f, i));
                    free_in_file[f] += 1;
                }
            }
        }
        groups.sort_by(|&(fa, ia), &(fb, ib)| {
            let ka = inst.req_prob[fa][ia] * inst.delta_n * inst.s_rec[fa] as f64;
            let kb = inst.req_prob[fb][ib] * inst.delta_n * inst.s_rec[fb] as f64;
            kb.total_cmp(&ka).then(fa.cmp(&fb)).then(ia.cmp(&ib))
        });

        let max_budget = inst
            .s_max
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(inst.cache_size.iter().copied().max().unwrap_or(0))
            as usize;

        let mut search = Search {
            model,
            groups,
            tables,
            x: vec![vec![0; u]; inst.num_files],
            fixed,
            cache_rem: inst.cache_size.clone(),
            avail_rem: inst.s_max.clone(),
            free_in_file,
            file_term: vec![0.0; inst.num_files],
            user_dp: vec![0.0; u],
            fixed_gc: vec![0.0; u],
            fixed_ga: vec![0.0; inst.num_files],
            dp_cur: vec![0.0; max_budget + 1],
            dp_next: vec![0.0; max_budget + 1],
        };
        for f in 0..inst.num_files {
            search.file_term[f] = search.compute_file_term(f);
        }
        for j in 0..u {
            search.user_dp[j] = search.cache_dp(j);
        }
        search
    }

    /// Exact (unpriced) contribution of a fully fixed file column.
    fn exact_file(&self, f: usize) -> f64 {
        let inst = &self.model.inst;
        let mut acc = 0.0;
        for i in 0..inst.num_users {
            let p = inst.req_prob[f][i];
            if p == 0.0 {
                continue;
            }
            let mut collected = 0.0;
            for j in 0..inst.num_users {
                if j != i {
                    collected += self.model.e[i][j][self.x[f][j] as usize];
                }
            }
            let net = inst.delta_n
                * (inst.s_rec[f] as f64 - collected - self.x[f][i] as f64);
            acc += p * (inst.delta_d * collected + net.max(0.0));
        }
        acc / inst.num_users as f64
    }

    /// Availability-side term for one file: exact (plus cache prices) when
    /// fully fixed, otherwise the priced linear part with a DP over the free
    /// entries constrained by the file's remaining segments and each free
    /// user's remaining cache.
    fn compute_file_term(&mut self, f: usize) -> f64 {
        let inst = &self.model.inst;
        if self.free_in_file[f] == 0 {
            // Adding the priced cache use keeps the availability-side
            // decomposition consistent with its offset.
            let priced: f64 = (0..inst.num_users)
                .map(|j| self.tables.mu[j] * self.x[f][j] as f64)
                .sum();
            return self.exact_file(f) + priced;
        }
        let budget = self.avail_rem[f] as usize;
        let mut value = self.tables.const_file[f] + self.fixed_ga[f];
        let dp = &mut self.dp_cur[..=budget];
        dp.fill(0.0);
        for j in 0..inst.num_users {
            if self.fixed[f][j] {
                continue;
            }
            let cap = (inst.s_rec[f].min(self.cache_rem[j]) as usize).min(budget);
            if cap == 0 {
                continue; // only k = 0 available, contributes nothing
            }
            let g = &self.tables.ga[f][j];
            let next = &mut self.dp_next[..=budget];
            for b in 0..=budget {
                let mut best = self.dp_cur[b]; // k = 0
                for k in 1..=cap.min(b) {
                    let v = g[k] + self.dp_cur[b - k];
                    if v < best {
                        best = v;
                    }
                }
                next[b] = best;
            }
            std::mem::swap(&mut self.dp_cur, &mut self.dp_next);
        }
        value += self.dp_cur[budget];
        value
    }

    /// Cache-side DP for one user over its free groups, constrained by the
    /// user's remaining cache (availability enters through per-variable caps
    /// and the segment prices).
    fn cache_dp(&mut self, j: usize) -> f64 {
        let inst = &self.model.inst;
        let budget = self.cache_rem[j] as usize;
        if budget == 0 {
            return 0.0;
        }
        let dp = &mut self.dp_cur[..=budget];
        dp.fill(0.0);
        for f in 0..inst.num_files {
            if self.fixed[f][j] {
                continue;
            }
            let cap = (inst.s_rec[f].min(self.avail_rem[f]) as usize).min(budget);
            if cap == 0 {
                continue;
            }
            let g = &self.tables.gc[f][j];
            let next = &mut self.dp_next[..=budget];
            for b in 0..=budget {
                let mut best = self.dp_cur[b];
                for k in 1..=cap.min(b) {
                    let v = g[k] + self.dp_cur[b - k];
                    if v < best {
                        best = v;
                    }
                }
                next[b] = best;
            }
            std::mem::swap(&mut self.dp_cur, &mut self.dp_next);
        }
        self.dp_cur[budget]
    }

    /// Fix group (f, i) to level k and refresh the affected bounds.
    pub(crate) fn push(&mut self, f: usize, i: usize, k: u32) -> Frame {
        debug_assert!(!self.fixed[f][i]);
        self.x[f][i] = k;
        self.fixed[f][i] = true;
        self.cache_rem[i] -= k;
        self.avail_rem[f] -= k;
        self.free_in_file[f] -= 1;
        let frame = Frame {
            file_term: self.file_term[f],
            user_dp: self.user_dp[i],
            fixed_gc: self.fixed_gc[i],
            fixed_ga: self.fixed_ga[f],
        };
        self.fixed_gc[i] += self.tables.gc[f][i][k as usize];
        self.fixed_ga[f] += self.tables.ga[f][i][k as usize];
        self.user_dp[i] = self.cache_dp(i);
        self.file_term[f] = self.compute_file_term(f);
        frame
    }

    pub(crate) fn pop(&mut self, f: usize, i: usize, k: u32, frame: Frame) {
        self.file_term[f] = frame.file_term;
        self.user_dp[i] = frame.user_dp;
        self.fixed_gc[i] = frame.fixed_gc;
        self.fixed_ga[f] = frame.fixed_ga;
        self.free_in_file[f] += 1;
        self.avail_rem[f] += k;
        self.cache_rem[i] += k;
        self.fixed[f][i] = false;
        self.x[f][i] = 0;
    }

    /// Admissible lower bound on the objective over every feasible
    /// completion of the current node.
    pub(crate) fn bound(&self) -> f64 {
        let mut avail_side = KahanSum::new();
        avail_side.add(self.tables.avail_offset);
        for &t in &self.file_term {
            avail_side.add(t);
        }
        let mut cache_side = KahanSum::new();
        cache_side.add(self.tables.cache_offset);
        for j in 0..self.model.inst.num_users {
            cache_side.add(self.fixed_gc[j] + self.user_dp[j]);
        }
        avail_side.value().max(cache_side.value())
    }

    /// Exact objective of the (fully fixed) current assignment.
    pub(crate) fn leaf_value(&self) -> f64 {
        debug_assert!(self.free_in_file.iter().all(|&c| c == 0));
        let mut acc = KahanSum::new();
        for f in 0..self.model.inst.num_files {
            acc.add(self.exact_file(f));
        }
        acc.value()
    }

    pub(crate) fn level_cap(&self, f: usize, i: usize) -> u32 {
        self.model.inst.s_rec[f]
            .min(self.cache_rem[i])
            .min(self.avail_rem[f])
    }

    pub(crate) fn current_placement(&self) -> Placement {
        Placement { x: self.x.clone() }
    }
}

/// Clamp activity of the network term at a placement: 1 where the expected
/// collection falls short of the recovery threshold.
fn clamp_activity(model: &IlpModel, x: &Placement) -> Vec<Vec<f64>> {
    let inst = &model.inst;
    let mut theta = vec![vec![0.0; inst.num_users]; inst.num_files];
    for f in 0..inst.num_files {
        for i in 0..inst.num_users {
            let mut collected = 0.0;
            for j in 0..inst.num_users {
                if j != i {
                    collected += model.e[i][j][x.x[f][j] as usize];
                }
            }
            if inst.s_rec[f] as f64 - collected - x.x[f][i] as f64 > 0.0 {
                theta[f][i] = 1.0;
            }
        }
    }
    theta
}

/// Root relaxation of the cache-side bound, returning the bound and its
/// minimizer (used for subgradient steps on the availability prices).
fn cache_relax_root(model: &IlpModel, tables: &Tables) -> (f64, Vec<Vec<u32>>) {
    let inst = &model.inst;
    let mut x = vec![vec![0u32; inst.num_users]; inst.num_files];
    let mut total = tables.cache_offset;
    for j in 0..inst.num_users {
        let budget = inst.cache_size[j] as usize;
        let mut dp = vec![0.0; budget + 1];
        let mut choice = vec![vec![0u32; budget + 1]; inst.num_files];
        for f in 0..inst.num_files {
            let cap = (inst.s_rec[f] as usize).min(budget);
            let mut next = vec![0.0; budget + 1];
            for b in 0..=budget {
                let mut best = dp[b];
                let mut best_k = 0u32;
                for k in 1..=cap.min(b) {
                    let v = tables.gc[f][j][k] + dp[b - k];
                    if v < best {
                        best = v;
                        best_k = k as u32;
                    }
                }
                next[b] = best;
                choice[f][b] = best_k;
            }
            dp = next;
        }
        total += dp[budget];
        let mut b = budget;
        for f in (0..inst.num_files).rev() {
            let k = choice[f][b];
            x[f][j] = k;
            b -= k as usize;
        }
    }
    (total, x)
}

/// Root relaxation of the availability-side bound with its minimizer (used
/// for subgradient steps on the cache prices).
fn avail_relax_root(model: &IlpModel, tables: &Tables) -> (f64, Vec<Vec<u32>>) {
    let inst = &model.inst;
    let mut x = vec![vec![0u32; inst.num_users]; inst.num_files];
    let mut total = tables.avail_offset;
    for f in 0..inst.num_files {
        total += tables.const_file[f];
        let budget = inst.s_max[f] as usize;
        let mut dp = vec![0.0; budget + 1];
        let mut choice = vec![vec![0u32; budget + 1]; inst.num_users];
        for j in 0..inst.num_users {
            let cap = (inst.s_rec[f].min(inst.cache_size[j]) as usize).min(budget);
            let mut next = vec![0.0; budget + 1];
            for b in 0..=budget {
                let mut best = dp[b];
                let mut best_k = 0u32;
                for k in 1..=cap.min(b) {
                    let v = tables.ga[f][j][k] + dp[b - k];
                    if v < best {
                        best = v;
                        best_k = k as u32;
                    }
                }
                next[b] = best;
                choice[j][b] = best_k;
            }
            dp = next;
        }
        total += dp[budget];
        let mut b = budget;
        for j in (0..inst.num_users).rev() {
            let k = choice[j][b];
            x[f][j] = k;
            b -= k as usize;
        }
    }
    (total, x)
}

/// Tune clamp slopes and constraint prices by projected subgradient against
/// the incumbent value, keeping the best-bound prices seen. Every iterate
/// yields a valid bound, so the tuning only affects tightness. Deterministic
/// (fixed iteration count, no randomness).
fn tune_prices(model: &IlpModel, incumbent: &Placement, incumbent_value: f64) -> Prices {
    let inst = &model.inst;
    let u = inst.num_users;
    let mut prices = Prices {
        theta: clamp_activity(model, incumbent),
        mu: vec![0.0; u],
        nu: vec![0.0; inst.num_files],
    };
    let mut best_prices = prices.clone();
    let mut best_bound = f64::NEG_INFINITY;
    let mut alpha = 1.0;
    let mut stall = 0u32;
    for _ in 0..60 {
        let tables = Tables::build(model, &prices);
        let (bc, xc) = cache_relax_root(model, &tables);
        let (ba, xa) = avail_relax_root(model, &tables);
        let bound = bc.max(ba);
        if bound > best_bound + 1e-12 {
            best_bound = bound;
            best_prices = prices.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= 4 {
                alpha *= 0.5;
                stall = 0;
            }
        }
        // Availability violations of the cache-side minimizer drive nu.
        let mut v = vec![0.0; inst.num_files];
        let mut v_norm = 0.0;
        for f in 0..inst.num_files {
            let used: u32 = (0..u).map(|j| xc[f][j]).sum();
            v[f] = used as f64 - inst.s_max[f] as f64;
            v_norm += v[f] * v[f];
        }
        if v_norm > 0.0 {
            let step = alpha * (incumbent_value - bc).max(1e-6) / v_norm;
            for f in 0..inst.num_files {
                prices.nu[f] = (prices.nu[f] + step * v[f]).max(0.0);
            }
        }
        // Cache violations of the availability-side minimizer drive mu.
        let mut w = vec![0.0; u];
        let mut w_norm = 0.0;
        for j in 0..u {
            let used: u32 = (0..inst.num_files).map(|f| xa[f][j]).sum();
            w[j] = used as f64 - inst.cache_size[j] as f64;
            w_norm += w[j] * w[j];
        }
        if w_norm > 0.0 {
            let step = alpha * (incumbent_value - ba).max(1e-6) / w_norm;
            for j in 0..u {
                prices.mu[j] = (prices.mu[j] + step * w[j]).max(0.0);
            }
        }
        // Nudge the clamp slopes toward the activity at the cache-side
        // minimizer (the better-structured of the two).
        let xc_placement = Placement { x: xc };
        let act = clamp_activity(model, &xc_placement);
        for f in 0..inst.num_files {
            for i in 0..u {
                prices.theta[f][i] =
                    (0.7 * prices.theta[f][i] + 0.3 * act[f][i]).clamp(0.0, 1.0);
            }
        }
    }
    best_prices
}

/// One user-by-user sweep minimizing the lower-bound objective; repeated
/// remove-and-reoptimize passes until no user improves (at most three
/// passes). Produces the incumbent and the active-set guess for the bounds.
fn lb_sweep(model: &IlpModel) -> Placement {
    let inst = &model.inst;
    let u = inst.num_users;
    let uf = u as f64;
    let mut x = Placement::zeros(inst);
    let mut s_rem = inst.s_max.clone();
    for pass in 0..3 {
        let mut improved = false;
        for user in 0..u {
            let budget = inst.cache_size[user] as usize;
            if budget == 0 {
                continue;
            }
            // Release this user's current allocation.
            let before: Vec<u32> = (0..inst.num_files).map(|f| x.x[f][user]).collect();
            for f in 0..inst.num_files {
                s_rem[f] += x.x[f][user];
                x.x[f][user] = 0;
            }
            // Delta of the lb objective when this user caches k of file f.
            let mut value = vec![vec![0.0; budget + 1]; inst.num_files];
            let mut caps = vec![0usize; inst.num_files];
            for f in 0..inst.num_files {
                let cap = (inst.s_rec[f].min(s_rem[f]) as usize).min(budget);
                caps[f] = cap;
                if cap == 0 {
                    continue;
                }
                let s_rec = inst.s_rec[f] as f64;
                let mut collected = vec![0.0; u];
                for i in 0..u {
                    for j in 0..u {
                        if j != i {
                            collected[i] += model.e[i][j][x.x[f][j] as usize];
                        }
                    }
                }
                for k in 1..=cap {
                    let mut delta = 0.0;
                    // Own network term.
                    let own0 = (inst.delta_n * (s_rec - collected[user])).max(0.0);
                    let own_k =
                        (inst.delta_n * (s_rec - collected[user] - k as f64)).max(0.0);
                    delta += inst.req_prob[f][user] * (own_k - own0);
                    // Everyone else now collects from this user.
                    for i in 0..u {
                        if i == user {
                            continue;
                        }
                        let p = inst.req_prob[f][i];
                        if p == 0.0 {
                            continue;
                        }
                        let gain = model.e[i][user][k];
                        let before_i = (inst.delta_n
                            * (s_rec - collected[i] - x.x[f][i] as f64))
                            .max(0.0);
                        let after_i = (inst.delta_n
                            * (s_rec - collected[i] - gain - x.x[f][i] as f64))
                            .max(0.0);
                        delta += p * (inst.delta_d * gain + after_i - before_i);
                    }
                    value[f][k] = delta / uf;
                }
            }
            // Knapsack over files; ties break toward caching less.
            let mut dp = vec![0.0; budget + 1];
            let mut choice = vec![vec![0u32; budget + 1]; inst.num_files];
            for f in 0..inst.num_files {
                let mut next = vec![0.0; budget + 1];
                for b in 0..=budget {
                    let mut best = dp[b];
                    let mut best_k = 0u32;
                    for k in 1..=caps[f].min(b) {
                        let v = value[f][k] + dp[b - k];
                        if v < best {
                            best = v;
                            best_k = k as u32;
                        }
                    }
                    next[b] = best;
                    choice[f][b] = best_k;
                }
                dp = next;
            }
            let mut b = budget;
            for f in (0..inst.num_files).rev() {
                let k = choice[f][b];
                x.x[f][user] = k;
                s_rem[f] -= k;
                b -= k as usize;
            }
            if (0..inst.num_files).any(|f| x.x[f][user] != before[f]) {
                improved = true;
            }
        }
        if pass > 0 && !improved {
            break;
        }
    }
    debug_assert!(inst.validate_placement(&x).is_ok_and(|v| v.is_empty()));
    x
}

struct DfsCtx {
    budget: u64,
    prune_tol: f64,
    nodes: u64,
    best_value: f64,
    best_x: Placement,
    trace: Vec<f64>,
    aborted: bool,
    open_min: f64,
}

fn dfs(search: &mut Search, depth: usize, node_bound: f64, ctx: &mut DfsCtx) {
    if depth == search.groups.len() {
        let value = search.leaf_value();
        if value < ctx.best_value {
            ctx.best_value = value;
            ctx.best_x = search.current_placement();
            ctx.trace.push(value);
        }
        return;
    }
    let (f, i) = search.groups[depth];
    let cap = search.level_cap(f, i);
    for k in (0..=cap).rev() {
        if ctx.nodes >= ctx.budget {
            ctx.aborted = true;
        }
        if ctx.aborted {
            // Untried assignments here are covered by this node's bound.
            ctx.open_min = ctx.open_min.min(node_bound);
            return;
        }
        ctx.nodes += 1;
        let frame = search.push(f, i, k);
        let child_bound = search.bound();
        if child_bound < ctx.best_value - ctx.prune_tol {
            dfs(search, depth + 1, child_bound, ctx);
        }
        search.pop(f, i, k, frame);
        if ctx.aborted {
            ctx.open_min = ctx.open_min.min(node_bound);
            return;
        }
    }
}

/// Solve the lower-bound program exactly by branch-and-bound.
///
/// With status `Optimal` the decoded placement globally minimizes the
/// lower-bound objective; on budget exhaustion the best incumbent is
/// returned together with a still-valid global lower bound.
pub fn solve_exact(model: &IlpModel, budget: u64) -> Result<SolveResult> {
    let (result, _trace) = solve_exact_traced(model, budget, PRUNE_EPS)?;
    Ok(result)
}

/// Like [`solve_exact`] with an explicit absolute pruning tolerance: status
/// `Optimal` then means within `tol` of the true minimum, and the reported
/// lower bound accounts for the slack.
pub fn solve_exact_tol(model: &IlpModel, budget: u64, tol: f64) -> Result<SolveResult> {
    let (result, _trace) = solve_exact_traced(model, budget, tol.max(PRUNE_EPS))?;
    Ok(result)
}

pub(crate) fn solve_exact_traced(
    model: &IlpModel,
    budget: u64,
    prune_tol: f64,
) -> Result<(SolveResult, Vec<f64>)> {
    let incumbent = lb_sweep(model);
    let best_value = model.lb_objective(&incumbent);
    let prices = tune_prices(model, &incumbent, best_value);
    let mut search = Search::new(model, &prices);
    let root_bound = search.bound();
    let mut ctx = DfsCtx {
        budget,
        prune_tol,
        nodes: 0,
        best_value,
        best_x: incumbent,
        trace: vec![best_value],
        aborted: false,
        open_min: f64::INFINITY,
    };
    if root_bound < ctx.best_value - prune_tol {
        dfs(&mut search, 0, root_bound, &mut ctx);
    }
    debug_assert!(ctx.trace.windows(2).all(|w| w[1] <= w[0]));

    let lb_value = if ctx.aborted {
        ctx.open_min.min(ctx.best_value) - prune_tol
    } else if prune_tol <= PRUNE_EPS {
        expected_cost_lb(&model.inst, &ctx.best_x)?
    } else {
        // Looser pruning: the incumbent is optimal only up to the slack.
        expected_cost_lb(&model.inst, &ctx.best_x)? - prune_tol
    };
    let ub_value = expected_cost(&model.inst, &ctx.best_x)?.total;
    Ok((
        SolveResult {
            placement: ctx.best_x,
            lb_value,
            ub_value,
            nodes: ctx.nodes,
            status: if ctx.aborted {
                SolveStatus::BudgetExceeded
            } else {
                SolveStatus::Optimal
            },
        },
        ctx.trace,
    ))
}

/// Optimality-gap certificate at a placement: the exact cost, the
/// lower-bound objective, and their relative gap. When the placement is the
/// optimum of the lower-bound program, `lb` bounds the global optimum of the
/// exact problem from below, so any algorithm's cost minus `lb` bounds its
/// suboptimality.
pub fn certificate(inst: &Instance, x_lb: &Placement) -> Result<(f64, f64, f64)> {
    let ub = expected_cost(inst, x_lb)?.total;
    let lb = expected_cost_lb(inst, x_lb)?;
    debug_assert!(lb <= ub + 1e-9, "bound above exact cost: {lb} > {ub}");
    // The bound can be exactly tight; rounding then leaves a negative sliver.
    let gap = if ub > 0.0 {
        ((ub - lb) / ub).max(0.0)
    } else {
        0.0
    };
    Ok((ub, lb, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_instances::tiny_instance;
    use crate::model::{gen_instance, GenConfig};
    use crate::oracle;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_feasible_placement(inst: &Instance, seed: u64) -> Placement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Placement::zeros(inst);
        let mut s_rem = inst.s_max.clone();
        for i in 0..inst.num_users {
            let mut budget = inst.cache_size[i];
            for f in 0..inst.num_files {
                let hi = inst.s_rec[f].min(budget).min(s_rem[f]);
                let v = rng.gen_range(0..=hi);
                x.x[f][i] = v;
                s_rem[f] -= v;
                budget -= v;
            }
        }
        x
    }

    #[test]
    fn binary_count_at_benchmark_scale() {
        let cfg = GenConfig {
            s_rec_uniform: Some(4),
            ..GenConfig::default()
        };
        let inst = gen_instance(&cfg, 1).unwrap();
        let model = IlpModel::build(&inst);
        assert_eq!(model.num_binaries(), 8 * 80 * 5);
        assert_eq!(model.num_continuous(), 8 * 80);
    }

    #[test]
    fn tiny_model_counts() {
        let inst = Instance {
            num_users: 1,
            num_files: 1,
            cache_size: vec![1],
            s_rec: vec![2],
            s_max: vec![2],
            req_prob: vec![vec![1.0]],
            contact_rate: vec![vec![0.0]],
            batch: 1,
            delta_d: 1.0,
            delta_n: 30.0,
            deadline: 1.0,
        };
        let model = IlpModel::build(&inst);
        assert_eq!(model.num_binaries(), 3);
        assert_eq!(model.num_continuous(), 1);
    }

    #[test]
    fn decode_zero_selection_gives_zero_placement() {
        let inst = tiny_instance(2, 2);
        let model = IlpModel::build(&inst);
        let y = model.encode(&Placement::zeros(&inst));
        let x = model.decode(&y).unwrap();
        assert_eq!(x, Placement::zeros(&inst));
    }

    #[test]
    fn decode_reads_selected_level() {
        let inst = tiny_instance(2, 3); // s_rec[2] = 4
        let model = IlpModel::build(&inst);
        let mut x = Placement::zeros(&inst);
        x.x[2][1] = 3;
        let y = model.encode(&x);
        assert_eq!(model.decode(&y).unwrap().x[2][1], 3);
    }

    #[test]
    fn decode_rejects_bad_selections() {
        let inst = tiny_instance(2, 2);
        let model = IlpModel::build(&inst);
        let mut y = model.encode(&Placement::zeros(&inst));
        y[0][0][1] = 1.0; // two levels selected
        assert!(model.decode(&y).is_err());
        let mut y = model.encode(&Placement::zeros(&inst));
        y[1][1][0] = 0.4; // fractional
        assert!(model.decode(&y).is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let inst = tiny_instance(3, 3);
        let model = IlpModel::build(&inst);
        for seed in 0..100 {
            let x = random_feasible_placement(&inst, seed);
            let y = model.encode(&x);
            assert_eq!(model.decode(&y).unwrap(), x);
        }
    }

    #[test]
    fn model_objective_matches_lower_bound_evaluator() {
        let inst = tiny_instance(4, 3);
        let model = IlpModel::build(&inst);
        for seed in 0..50 {
            let x = random_feasible_placement(&inst, seed);
            let y = model.encode(&x);
            let via_model = model.objective_at(&y).unwrap();
            let direct = expected_cost_lb(&inst, &x).unwrap();
            assert!(
                (via_model - direct).abs() < 1e-9,
                "seed {seed}: {via_model} vs {direct}"
            );
        }
    }

    #[test]
    fn golden_lp_for_one_variable_model() {
        let inst = Instance {
            num_users: 1,
            num_files: 1,
            cache_size: vec![1],
            s_rec: vec![1],
            s_max: vec![1],
            req_prob: vec![vec![1.0]],
            contact_rate: vec![vec![0.0]],
            batch: 1,
            delta_d: 1.0,
            delta_n: 30.0,
            deadline: 1.0,
        };
        let model = IlpModel::build(&inst);
        let mut buf = Vec::new();
        model.export_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected = "\\ ACOCP lower-bound model\n\
                        Minimize\n \
                        obj: 1 dn2_f0_u0\n\
                        Subject To\n \
                        sel_f0_u0:\n  1 y_f0_u0_k0 + 1 y_f0_u0_k1 = 1\n \
                        cache_u0:\n  1 y_f0_u0_k1 <= 1\n \
                        avail_f0:\n  1 y_f0_u0_k1 <= 1\n \
                        epi_f0_u0:\n  1 dn2_f0_u0 + 30 y_f0_u0_k1 >= 30\n\
                        Bounds\n dn2_f0_u0 >= 0\n\
                        Binary\n y_f0_u0_k0 y_f0_u0_k1\n\
                        End\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn lp_round_trips_through_parser() {
        let inst = tiny_instance(3, 2);
        let model = IlpModel::build(&inst);
        let doc = model.to_lp_document();
        let text = write_lp(&doc);
        let parsed = parse_lp(&text).unwrap();
        assert_eq!(parsed, doc);
    }

    #[test]
    fn solver_matches_enumeration_on_tiny_instances() {
        for seed in 0..5 {
            let cfg = GenConfig {
                num_users: 3,
                num_files: 3,
                cache: 2,
                s_star: 2,
                alpha: 2,
                beta: 2.0,
                theta: 1.0 / 600.0,
                ..GenConfig::default()
            };
            let inst = gen_instance(&cfg, seed).unwrap();
            let model = IlpModel::build(&inst);
            let result = solve_exact(&model, DEFAULT_NODE_BUDGET).unwrap();
            assert_eq!(result.status, SolveStatus::Optimal);
            let (_, oracle_value) = oracle::enumerate_acocp(&inst, 10_000_000).unwrap();
            assert!(
                (result.lb_value - oracle_value).abs() < 1e-9,
                "seed {seed}: solver {} vs oracle {}",
                result.lb_value,
                oracle_value
            );
            assert!(result.lb_value <= result.ub_value + 1e-9);
        }
    }

    #[test]
    fn deterministic_instance_closes_the_gap() {
        let mut inst = tiny_instance(3, 3);
        for row in &mut inst.contact_rate {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let model = IlpModel::build(&inst);
        let result = solve_exact(&model, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!(
            (result.lb_value - result.ub_value).abs() < 1e-9,
            "lb {} vs ub {}",
            result.lb_value,
            result.ub_value
        );
    }

    #[test]
    fn node_bounds_are_admissible() {
        // At hand-built nodes, the bound must not exceed the true minimum
        // over the node's completions (checked exhaustively).
        let inst = tiny_instance(3, 2);
        let model = IlpModel::build(&inst);
        let incumbent = lb_sweep(&model);
        let prices = tune_prices(&model, &incumbent, model.lb_objective(&incumbent));
        let mut search = Search::new(&model, &prices);
        let groups = search.groups.clone();

        fn subtree_min(search: &mut Search, groups: &[(usize, usize)], depth: usize) -> f64 {
            if depth == groups.len() {
                return search.leaf_value();
            }
            let (f, i) = groups[depth];
            let cap = search.level_cap(f, i);
            let mut best = f64::INFINITY;
            for k in 0..=cap {
                let frame = search.push(f, i, k);
                best = best.min(subtree_min(search, groups, depth + 1));
                search.pop(f, i, k, frame);
            }
            best
        }

        // Root and one level of children.
        let root_bound = search.bound();
        let true_min = subtree_min(&mut search, &groups, 0);
        assert!(
            root_bound <= true_min + 1e-9,
            "root bound {root_bound} vs true min {true_min}"
        );
        let (f, i) = groups[0];
        for k in 0..=search.level_cap(f, i) {
            let frame = search.push(f, i, k);
            let b = search.bound();
            let m = subtree_min(&mut search, &groups, 1);
            assert!(b <= m + 1e-9, "k={k}: bound {b} vs min {m}");
            search.pop(f, i, k, frame);
        }
    }

    #[test]
    fn incumbent_trace_is_monotone() {
        let inst = tiny_instance(4, 4);
        let model = IlpModel::build(&inst);
        let (result, trace) = solve_exact_traced(&model, DEFAULT_NODE_BUDGET, PRUNE_EPS).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(result.status, SolveStatus::Optimal);
    }

    #[test]
    fn budget_exhaustion_returns_valid_bounds() {
        let inst = tiny_instance(4, 4);
        let model = IlpModel::build(&inst);
        let full = solve_exact(&model, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(full.status, SolveStatus::Optimal);
        let capped = solve_exact(&model, 3).unwrap();
        assert_eq!(capped.status, SolveStatus::BudgetExceeded);
        // The capped lower bound must not exceed the true optimum, and the
        // incumbent must not beat it.
        assert!(capped.lb_value <= full.lb_value + 1e-9);
        let inc_obj = model.lb_objective(&capped.placement);
        assert!(inc_obj + 1e-12 >= full.lb_value);
        assert!(capped.lb_value <= capped.ub_value + 1e-9);
    }

    #[test]
    fn solved_placements_are_feasible() {
        for seed in 0..3 {
            let cfg = GenConfig {
                num_users: 4,
                num_files: 5,
                cache: 2,
                s_star: 3,
                ..GenConfig::default()
            };
            let inst = gen_instance(&cfg, seed).unwrap();
            let model = IlpModel::build(&inst);
            let result = solve_exact(&model, DEFAULT_NODE_BUDGET).unwrap();
            assert!(inst.validate_placement(&result.placement).unwrap().is_empty());
        }
    }

    #[test]
    fn certificate_sandwiches_the_oracle_optimum() {
        for seed in 0..3 {
            let cfg = GenConfig {
                num_users: 3,
                num_files: 3,
                cache: 2,
                s_star: 2,
                alpha: 2,
                ..GenConfig::default()
            };
            let inst = gen_instance(&cfg, seed).unwrap();
            let model = IlpModel::build(&inst);
            let result = solve_exact(&model, DEFAULT_NODE_BUDGET).unwrap();
            let (ub, lb, gap) = certificate(&inst, &result.placement).unwrap();
            let (_, true_opt) = oracle::enumerate_cocp(&inst, 10_000_000).unwrap();
            assert!(lb <= true_opt + 1e-9, "lb {lb} vs optimum {true_opt}");
            assert!(ub + 1e-9 >= true_opt, "ub {ub} vs optimum {true_opt}");
            assert!(gap >= 0.0);
        }
    }

    #[test]
    fn certificate_gap_zero_without_contacts() {
        let mut inst = tiny_instance(3, 2);
        for row in &mut inst.contact_rate {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let model = IlpModel::build(&inst);
        let result = solve_exact(&model, DEFAULT_NODE_BUDGET).unwrap();
        let (_, _, gap) = certificate(&inst, &result.placement).unwrap();
        assert!(gap.abs() < 1e-9);
    }

    #[test]
    fn certificate_rejects_infeasible_placement() {
        let inst = tiny_instance(2, 2);
        let mut x = Placement::zeros(&inst);
        x.x[0][0] = inst.s_rec[0] + 1;
        assert!(certificate(&inst, &x).is_err());
    }
}
