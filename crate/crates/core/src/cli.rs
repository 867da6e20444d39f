//! Command-line front end: instance generation, solving, simulation, and
//! experiment sweeps with CSV output.
//!
//! Sweep presets reproduce the evaluation scenarios: cache size, user count,
//! file count, contact-rate shape, deadline, and popularity skew, each over
//! an ensemble of seeded instances. Plotting is external; the CSV schema is
//! `sweep_param,value,seed,method,cost,lb,gap,wall_ms`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acocp::{self, IlpModel};
use crate::baselines;
use crate::cost::{expected_cost, expected_cost_lb};
use crate::mauu;
use crate::model::{gen_instance, reduce_3sat, GenConfig, Instance, Placement, SatFormula};
use crate::oracle;
use crate::sim;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cocp",
    about = "Cost-optimal D2D caching: generation, solving, simulation, sweeps",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a config file and/or flags (flags override
    /// config fields, config overrides built-in defaults).
    Gen {
        /// Generation config (JSON); missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output instance path (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        files: Option<usize>,
        #[arg(long)]
        cache: Option<u32>,
        #[arg(long)]
        batch: Option<u32>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        deadline: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        s_star: Option<u32>,
        #[arg(long)]
        alpha: Option<u32>,
        #[arg(long)]
        delta_d: Option<f64>,
        #[arg(long)]
        delta_n: Option<f64>,
    },
    /// Print the expected cost of a placement and its lower bound.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        placement: PathBuf,
    },
    /// Compute a placement with the chosen method.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Output placement path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Node budget for the exact solver / evaluation budget for brute
        /// force.
        #[arg(long, default_value_t = acocp::DEFAULT_NODE_BUDGET)]
        nodes: u64,
        /// Absolute pruning tolerance for the exact solver.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Seed for the randomized baseline.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shuffle the user processing order with this seed (user-by-user
        /// method only; default is index order).
        #[arg(long)]
        order_seed: Option<u64>,
    },
    /// Monte Carlo check of a placement against the analytic cost.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        placement: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a figure preset over an ensemble of seeds and write CSV rows.
    Sweep {
        #[arg(long, value_enum)]
        figure: Figure,
        /// Base config overriding the preset's defaults (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of seeded instances per grid value.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Methods to run (defaults depend on the figure).
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long, default_value_t = acocp::DEFAULT_NODE_BUDGET)]
        nodes: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the lower-bound program in CPLEX LP format.
    ExportLp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a DIMACS 3-CNF formula to a placement instance.
    Reduce {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Output instance path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solve the reduction exactly and report the decoded assignment.
        #[arg(long, default_value_t = false)]
        decide: bool,
        /// Evaluation budget for the exact solve.
        #[arg(long, default_value_t = 100_000_000)]
        nodes: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Acocp,
    Mauu,
    Popular,
    Random,
    Brute,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Acocp => "acocp",
            Method::Mauu => "mauu",
            Method::Popular => "popular",
            Method::Random => "random",
            Method::Brute => "brute",
        }
    }
}

/// Experiment presets, one per evaluation figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Cache size 3..7 at 8 users, 80 files.
    C,
    /// User count sweep at cache 5.
    U,
    /// File count sweep at batch 2 with uniform recovery threshold 4.
    F,
    /// Contact-rate Gamma shape sweep.
    Beta,
    /// Deadline sweep at batch 2.
    Td,
    /// Popularity skew sweep at 20 users, 200 files.
    Gamma,
}

/// A fully specified sweep: parameter grid, base config, methods, ensemble
/// size, and solver budget.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: &'static str,
    pub values: Vec<f64>,
    pub base: GenConfig,
    pub methods: Vec<Method>,
    pub seeds: u64,
    pub nodes: u64,
}

/// Preset grid and base parameters for a figure.
pub fn sweep_preset(figure: Figure) -> SweepSpec {
    let all = vec![Method::Acocp, Method::Mauu, Method::Popular, Method::Random];
    match figure {
        Figure::C => SweepSpec {
            param: "C",
            values: vec![3.0, 4.0, 5.0, 6.0, 7.0],
            base: GenConfig::default(),
            methods: all,
            seeds: 20,
            nodes: acocp::DEFAULT_NODE_BUDGET,
        },
        Figure::U => SweepSpec {
            param: "U",
            values: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            base: GenConfig::default(),
            methods: all,
            seeds: 20,
            nodes: acocp::DEFAULT_NODE_BUDGET,
        },
        Figure::F => SweepSpec {
            param: "F",
            values: vec![40.0, 80.0, 120.0, 160.0, 200.0],
            base: GenConfig {
                batch: 2,
                s_rec_uniform: Some(4),
                ..GenConfig::default()
            },
            methods: all,
            seeds: 20,
            nodes: acocp::DEFAULT_NODE_BUDGET,
        },
        Figure::Beta => SweepSpec {
            param: "beta",
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            base: GenConfig::default(),
            methods: all,
            seeds: 20,
            nodes: acocp::DEFAULT_NODE_BUDGET,
        },
        Figure::Td => SweepSpec {
            param: "T_D",
            values: vec![200.0, 400.0, 600.0, 800.0, 1000.0],
            base: GenConfig {
                batch: 2,
                ..GenConfig::default()
            },
            methods: all,
            seeds: 20,
            nodes: acocp::DEFAULT_NODE_BUDGET,
        },
        Figure::Gamma => SweepSpec {
            param: "gamma",
            values: vec![0.4, 0.6, 0.8, 1.0, 1.2],
            base: GenConfig {
                num_users: 20,
                num_files: 200,
                cache: 4,
                s_star: 3,
                ..GenConfig::default()
            },
            methods: vec![Method::Mauu, Method::Popular, Method::Random],
            seeds: 20,
            nodes: acocp::DEFAULT_NODE_BUDGET,
        },
    }
}

fn apply_sweep_value(base: &GenConfig, param: &str, value: f64) -> Result<GenConfig> {
    let mut cfg = base.clone();
    match param {
        "C" => cfg.cache = value as u32,
        "U" => cfg.num_users = value as usize,
        "F" => cfg.num_files = value as usize,
        "beta" => cfg.beta = value,
        "T_D" => cfg.deadline = value,
        "gamma" => cfg.gamma = value,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown sweep parameter {other}"
            )))
        }
    }
    Ok(cfg)
}

/// One CSV row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep_param: String,
    pub value: f64,
    pub seed: u64,
    pub method: String,
    pub cost: f64,
    pub lb: Option<f64>,
    pub gap: Option<f64>,
    pub wall_ms: u64,
}

/// Run one method on one instance; returns (cost, lb, gap).
pub fn run_method(
    inst: &Instance,
    method: Method,
    seed: u64,
    nodes: u64,
) -> Result<(Placement, f64, Option<f64>, Option<f64>)> {
    match method {
        Method::Acocp => {
            let model = IlpModel::build(inst);
            let result = acocp::solve_exact(&model, nodes)?;
            // The lb/gap columns carry the certificate at the returned
            // placement (the quantity the evaluation figures plot); the
            // solver's certified global bound is available via SolveResult.
            let (ub, lb, gap) = acocp::certificate(inst, &result.placement)?;
            Ok((result.placement, ub, Some(lb), Some(gap)))
        }
        Method::Mauu => {
            let x = mauu::run(inst, &mauu::default_order(inst))?;
            let cost = expected_cost(inst, &x)?.total;
            Ok((x, cost, None, None))
        }
        Method::Popular => {
            let x = baselines::popular_caching(inst)?;
            let cost = expected_cost(inst, &x)?.total;
            Ok((x, cost, None, None))
        }
        Method::Random => {
            let x = baselines::random_caching(inst, seed)?;
            let cost = expected_cost(inst, &x)?.total;
            Ok((x, cost, None, None))
        }
        Method::Brute => {
            let (x, cost) = oracle::enumerate_cocp(inst, nodes)?;
            Ok((x, cost, None, None))
        }
    }
}

/// Run every (value, seed, method) cell of a sweep. Cells run in parallel;
/// rows come back sorted by (value, seed, method) regardless of completion
/// order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let cells: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.seeds).map(move |s| (v, s)))
        .collect();
    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(value, seed)| -> Result<Vec<SweepRow>> {
            let cfg = apply_sweep_value(&spec.base, spec.param, value)?;
            let inst = gen_instance(&cfg, seed)?;
            let mut out = Vec::new();
            for &method in &spec.methods {
                let start = Instant::now();
                let (_, cost, lb, gap) = run_method(&inst, method, seed, spec.nodes)?;
                out.push(SweepRow {
                    sweep_param: spec.param.to_string(),
                    value,
                    seed,
                    method: method.name().to_string(),
                    cost,
                    lb,
                    gap,
                    wall_ms: start.elapsed().as_millis() as u64,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.seed.cmp(&b.seed))
            .then(a.method.cmp(&b.method))
    });
    Ok(rows)
}

/// Write sweep rows with the documented header.
pub fn write_csv(rows: &[SweepRow], sink: impl std::io::Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer
        .write_record(["sweep_param", "value", "seed", "method", "cost", "lb", "gap", "wall_ms"])
        .map_err(|e| Error::Parse(e.to_string()))?;
    for row in rows {
        writer
            .write_record([
                row.sweep_param.clone(),
                format!("{}", row.value),
                format!("{}", row.seed),
                row.method.clone(),
                format!("{}", row.cost),
                row.lb.map(|v| format!("{v}")).unwrap_or_default(),
                row.gap.map(|v| format!("{v}")).unwrap_or_default(),
                format!("{}", row.wall_ms),
            ])
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn load_gen_config(path: &Option<PathBuf>) -> Result<GenConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(GenConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            config,
            seed,
            out,
            users,
            files,
            cache,
            batch,
            gamma,
            deadline,
            beta,
            theta,
            s_star,
            alpha,
            delta_d,
            delta_n,
        } => {
            let mut cfg = load_gen_config(&config)?;
            if let Some(v) = users {
                cfg.num_users = v;
            }
            if let Some(v) = files {
                cfg.num_files = v;
            }
            if let Some(v) = cache {
                cfg.cache = v;
            }
            if let Some(v) = batch {
                cfg.batch = v;
            }
            if let Some(v) = gamma {
                cfg.gamma = v;
            }
            if let Some(v) = deadline {
                cfg.deadline = v;
            }
            if let Some(v) = beta {
                cfg.beta = v;
            }
            if let Some(v) = theta {
                cfg.theta = v;
            }
            if let Some(v) = s_star {
                cfg.s_star = v;
            }
            if let Some(v) = alpha {
                cfg.alpha = v;
            }
            if let Some(v) = delta_d {
                cfg.delta_d = v;
            }
            if let Some(v) = delta_n {
                cfg.delta_n = v;
            }
            let inst = gen_instance(&cfg, seed)?;
            inst.save(&out)?;
            println!(
                "wrote instance: {} users, {} files, seed {seed} -> {}",
                inst.num_users,
                inst.num_files,
                out.display()
            );
        }
        Command::Eval {
            instance,
            placement,
        } => {
            let inst = Instance::load(&instance)?;
            let x = Placement::load(&placement)?;
            let report = expected_cost(&inst, &x)?;
            let lb = expected_cost_lb(&inst, &x)?;
            println!("cost {}", report.total);
            println!("d2d_component {}", report.d2d_component);
            println!("network_component {}", report.network_component);
            println!("lower_bound {lb}");
        }
        Command::Solve {
            instance,
            method,
            out,
            nodes,
            tol,
            seed,
            order_seed,
        } => {
            let inst = Instance::load(&instance)?;
            let placement = match method {
                Method::Acocp => {
                    let model = IlpModel::build(&inst);
                    let result = acocp::solve_exact_tol(&model, nodes, tol)?;
                    let (ub, lb, gap) = acocp::certificate(&inst, &result.placement)?;
                    println!("status {:?}", result.status);
                    println!("nodes {}", result.nodes);
                    println!("cost {ub}");
                    println!("lower_bound {lb}");
                    println!("gap {gap}");
                    println!("certified_lb {}", result.lb_value);
                    result.placement
                }
                Method::Mauu => {
                    let mut order = mauu::default_order(&inst);
                    if let Some(os) = order_seed {
                        let mut rng = ChaCha8Rng::seed_from_u64(os);
                        order.shuffle(&mut rng);
                    }
                    let x = mauu::run(&inst, &order)?;
                    println!("cost {}", expected_cost(&inst, &x)?.total);
                    x
                }
                Method::Popular | Method::Random | Method::Brute => {
                    let (x, cost, _, _) = run_method(&inst, method, seed, nodes)?;
                    println!("cost {cost}");
                    x
                }
            };
            if let Some(path) = out {
                placement.save(&path)?;
                println!("wrote placement -> {}", path.display());
            }
        }
        Command::Simulate {
            instance,
            placement,
            reps,
            seed,
        } => {
            let inst = Instance::load(&instance)?;
            let x = Placement::load(&placement)?;
            let analytic = expected_cost(&inst, &x)?.total;
            let (mean, stderr) = sim::monte_carlo_cost(&inst, &x, reps, seed)?;
            let sigmas = if stderr > 0.0 {
                (mean - analytic).abs() / stderr
            } else {
                0.0
            };
            println!("empirical_mean {mean}");
            println!("stderr {stderr}");
            println!("analytic {analytic}");
            println!("deviation_sigmas {sigmas}");
        }
        Command::Sweep {
            figure,
            config,
            seeds,
            methods,
            nodes,
            out,
        } => {
            let mut spec = sweep_preset(figure);
            if let Some(path) = config {
                let text = std::fs::read_to_string(path)?;
                spec.base = serde_json::from_str(&text)?;
            }
            spec.seeds = seeds;
            spec.nodes = nodes;
            if let Some(ms) = methods {
                spec.methods = ms;
            }
            let rows = run_sweep(&spec)?;
            let file = std::fs::File::create(&out)?;
            write_csv(&rows, file)?;
            println!("wrote {} rows -> {}", rows.len(), out.display());
        }
        Command::ExportLp { instance, out } => {
            let inst = Instance::load(&instance)?;
            let model = IlpModel::build(&inst);
            let mut file = std::fs::File::create(&out)?;
            model.export_lp(&mut file)?;
            println!(
                "wrote LP: {} binaries, {} continuous -> {}",
                model.num_binaries(),
                model.num_continuous(),
                out.display()
            );
        }
        Command::Reduce {
            cnf,
            eps,
            out,
            decide,
            nodes,
        } => {
            let text = std::fs::read_to_string(&cnf)?;
            let phi = SatFormula::parse_dimacs(&text)?;
            for warning in phi.preprocessing_violations() {
                eprintln!("warning: {warning}");
            }
            let inst = reduce_3sat(&phi, eps, 1.0)?;
            println!(
                "reduced {} vars / {} clauses -> {} users",
                phi.num_vars,
                phi.clauses.len(),
                inst.num_users
            );
            if let Some(path) = &out {
                inst.save(path)?;
                println!("wrote instance -> {}", path.display());
            }
            if decide {
                let report = oracle::sat_decision_experiment(&phi, eps, nodes)?;
                println!("optimum {}", report.optimum);
                println!("pair_pattern {}", report.pair_pattern);
                match (&report.assignment, report.satisfying) {
                    (Some(a), Some(sat)) => {
                        let rendered: Vec<String> = a
                            .iter()
                            .enumerate()
                            .map(|(i, &v)| format!("z{}={}", i + 1, v))
                            .collect();
                        println!("assignment {}", rendered.join(" "));
                        println!("satisfying {sat}");
                    }
                    _ => println!("assignment inconclusive"),
                }
            }
        }
    }
    Ok(())
}

/// Entry point used by the binary; prints errors to stderr and sets the
/// exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
