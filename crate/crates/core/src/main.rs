use anyhow::{bail, Context, Result};
use bincut::analysis::{
    check_condition1, check_robust_quasiconvex_binary, check_tangent_domination,
    compute_epsilon_bar, find_kkt_multipliers, kkt_certificate, split_points, Certificate,
    ConditionReport,
};
use bincut::convexify::{auto_penalties, lipschitz_linearization, penalty_transform, PenaltyConfig};
use bincut::engine::{
    solve_algorithm1, solve_algorithm1_with, solve_algorithm2, solve_algorithm3, write_trace_csv,
    MasterBackend, SolveOptions, SolveResult, SolveStatus,
};
use bincut::expr::NonlinearFunction;
use bincut::instance::{parse_instance, InstanceFile};
use bincut::model::{BinaryVector, Problem, ENUMERATION_LIMIT};
use bincut::qkp::{self, QkpForm};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "bincut", version, about = "Cutting-plane solver for nonlinear binary optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file (or a quadratic knapsack file).
    Solve(SolveArgs),
    /// Generate a random quadratic knapsack instance.
    GenerateQkp {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check sufficient conditions on a desk-scale instance.
    Check(CheckArgs),
    /// Run a sweep of quadratic knapsack instances described by a TOML file.
    Bench {
        spec: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Auto,
    Cp,
    CpLinear,
    Shifted,
}

#[derive(Clone, Copy, ValueEnum)]
enum MasterKind {
    Enum,
    Bnb,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum CutKind {
    Tangent,
    Lipschitz,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Inequality,
    Equality,
}

impl From<FormArg> for QkpForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Inequality => QkpForm::Inequality,
            FormArg::Equality => QkpForm::Equality,
        }
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    path: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    algorithm: Algorithm,
    /// none, auto, or comma-separated mu=V,lambda=V1,V2,...
    #[arg(long)]
    convexify: Option<String>,
    /// Shift for the shifted-cut method.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "enum")]
    master: MasterKind,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "off")]
    fixing: OnOff,
    #[arg(long, value_enum, default_value = "tangent")]
    cuts: CutKind,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run the KKT certificate on the returned point.
    #[arg(long)]
    certify: bool,
    /// Form used for quadratic knapsack files.
    #[arg(long, value_enum, default_value = "inequality")]
    qkp_form: FormArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckMode {
    Condition1,
    TangentDomination,
    EpsilonBar,
    RobustQc,
}

#[derive(clap::Args)]
struct CheckArgs {
    path: PathBuf,
    #[arg(long, value_enum)]
    mode: CheckMode,
    #[arg(long)]
    convexify: Option<String>,
    /// Modulus for the robust quasiconvexity test.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Function tested by robust-qc: `obj` (as −f) or `gJ`.
    #[arg(long, default_value = "obj")]
    target: String,
    #[arg(long, value_enum, default_value = "inequality")]
    qkp_form: FormArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::GenerateQkp { n, seed, out } => cmd_generate_qkp(n, seed, &out),
        Command::Check(args) => cmd_check(&args),
        Command::Bench { spec, out } => cmd_bench(&spec, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, form: QkpForm) -> Result<InstanceFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if qkp::is_qkp_text(&text) {
        let inst = qkp::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(InstanceFile {
            problem: qkp::qkp_to_problem(&inst, form),
            lipschitz: None,
            start: Some(qkp::greedy_start(&inst)),
        });
    }
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn penalties(spec: &str, problem: &Problem) -> Result<Option<PenaltyConfig>> {
    match spec {
        "none" => Ok(None),
        "auto" => Ok(Some(auto_penalties(problem)?)),
        _ => {
            // `mu=V,lambda=V1,V2,...`: bare values after `lambda=` extend the list.
            let mut mu = 0.0;
            let mut lambdas: Option<Vec<f64>> = None;
            for part in spec.split(',').map(str::trim) {
                let num = |t: &str| t.parse::<f64>().with_context(|| format!("bad --convexify value {t:?}"));
                if let Some(v) = part.strip_prefix("mu=") {
                    mu = num(v)?;
                } else if let Some(v) = part.strip_prefix("lambda=") {
                    lambdas = Some(vec![num(v)?]);
                } else if let Some(l) = lambdas.as_mut() {
                    l.push(num(part)?);
                } else {
                    bail!("unknown --convexify item {part:?} (expected none, auto, mu=V, lambda=V1,V2,...)");
                }
            }
            let lambdas = lambdas.unwrap_or_else(|| vec![0.0; problem.m()]);
            Ok(Some(PenaltyConfig::user(mu, lambdas)))
        }
    }
}

fn apply_convexify(spec: Option<&str>, problem: Problem) -> Result<Problem> {
    match penalties(spec.unwrap_or("none"), &problem)? {
        None => Ok(problem),
        Some(cfg) => {
            println!(
                "convexify: mu = {} ({:?}), lambda = {:?}",
                cfg.mu, cfg.mu_provenance, cfg.lambdas
            );
            Ok(penalty_transform(&problem, &cfg)?)
        }
    }
}

/// A feasible point found by the linear method with a zero objective.
fn find_start(problem: &Problem, options: &SolveOptions) -> Result<BinaryVector> {
    let probe = Problem::new(
        NonlinearFunction::linear(vec![0.0; problem.n], 0.0),
        problem.constraints.clone(),
        problem.polyhedron.clone(),
    );
    let r = solve_algorithm2(&probe, options).context("searching for a feasible start")?;
    if r.status != SolveStatus::OptimalGapClosed {
        bail!("no feasible start found within the iteration limit");
    }
    Ok(r.best_x)
}

fn print_certificate(c: &Certificate) {
    println!(
        "certificate: {} {} (lambda = {:?}, c·x* = {}, max c·x = {})",
        c.kind.name(),
        if c.passed { "PASSED" } else { "FAILED" },
        c.lambdas,
        c.point_value.unwrap_or(f64::NAN),
        c.lp_value.unwrap_or(f64::NAN)
    );
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let file = load(&args.path, args.qkp_form.into())?;
    let linear = file.problem.objective.is_linear();
    let (algorithm, convexify) = match args.algorithm {
        Algorithm::Auto if linear => (Algorithm::CpLinear, args.convexify.as_deref()),
        Algorithm::Auto => (Algorithm::Cp, Some(args.convexify.as_deref().unwrap_or("auto"))),
        a => (a, args.convexify.as_deref()),
    };
    let problem = apply_convexify(convexify, file.problem)?;
    let options = SolveOptions {
        epsilon_stop: 0.0,
        max_iter: args.max_iter,
        master: match args.master {
            MasterKind::Enum => MasterBackend::Enumerate {
                limit: ENUMERATION_LIMIT,
            },
            MasterKind::Bnb => MasterBackend::BranchAndBound,
        },
        fixing: matches!(args.fixing, OnOff::On),
    };
    let start = || -> Result<BinaryVector> {
        match &file.start {
            Some(s) => Ok(s.clone()),
            None => find_start(&problem, &options),
        }
    };

    let result: SolveResult = match algorithm {
        Algorithm::CpLinear => solve_algorithm2(&problem, &options)?,
        Algorithm::Shifted => {
            let eps = args.epsilon.context("--algorithm shifted needs --epsilon")?;
            solve_algorithm3(&problem, &start()?, eps, &options)?
        }
        _ => match args.cuts {
            CutKind::Tangent => solve_algorithm1(&problem, &start()?, &options)?,
            CutKind::Lipschitz => {
                let (lf, lg) = file
                    .lipschitz
                    .clone()
                    .context("--cuts lipschitz needs a LIPSCHITZ line in the instance")?;
                let gen = lipschitz_linearization(&problem, lf, lg)?;
                solve_algorithm1_with(&problem, &start()?, &gen, &options)?
            }
        },
    };

    if let Some(path) = &args.trace {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trace_csv(&result.state.trace, io::BufWriter::new(f))?;
    }
    for d in &result.state.diagnostics {
        eprintln!("note: {d}");
    }
    println!("status: {}", result.status.name());
    println!("x: {}", result.best_x);
    println!("value: {}", result.best_value);
    println!("iterations: {}", result.iterations);
    println!("LB: {}", result.state.lb);
    println!("UB: {}", result.state.ub);

    let mut certified = result.certificate.as_ref().is_some_and(|c| c.passed);
    if let Some(c) = &result.certificate {
        print_certificate(c);
    }
    if args.certify && result.certificate.is_none() {
        match find_kkt_multipliers(&problem, &result.best_x)? {
            Some(lambda) => {
                let c = kkt_certificate(&problem, &result.best_x, &lambda)?;
                certified |= c.passed;
                print_certificate(&c);
            }
            None => println!("certificate: KKT_LP FAILED (no multipliers found)"),
        }
    }
    Ok(match result.status {
        SolveStatus::OptimalGapClosed => 0,
        SolveStatus::RepeatedPoint if certified => 0,
        _ => 2,
    })
}

fn cmd_generate_qkp(n: usize, seed: u64, out: &Path) -> Result<u8> {
    let inst = qkp::generate_instance(n, seed)?;
    fs::write(out, qkp::serialize(&inst)).with_context(|| format!("writing {}", out.display()))?;
    let cnd = qkp::cnd_check(&inst.q_mat)?;
    println!(
        "wrote {} (n = {}, m = {}, seed = {seed}); c.n.d. check: {}",
        out.display(),
        inst.n,
        inst.m,
        if cnd { "passed" } else { "FAILED" }
    );
    Ok(if cnd { 0 } else { 2 })
}

fn print_report(r: &ConditionReport, what: &str) {
    println!("{what}: {}", if r.condition1_holds { "HOLDS" } else { "FAILS" });
    if let Some(v) = r.lp_value {
        println!("master optimum: {v}");
    }
    println!("true optimum: {}", r.true_optimum);
    for w in r.witnesses.iter().take(10) {
        match w.constraint {
            Some(j) => println!("witness: x = {}, y = {}, g{} cut value {}", w.x, w.y, j + 1, w.excess),
            None => println!("witness: x = {}, y = {}, f(x) − h_f(x,y) = {}", w.x, w.y, w.excess),
        }
    }
    if r.witnesses.len() > 10 {
        println!("... {} witnesses in total", r.witnesses.len());
    }
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let file = load(&args.path, args.qkp_form.into())?;
    let problem = apply_convexify(args.convexify.as_deref(), file.problem)?;
    let ok = match args.mode {
        CheckMode::Condition1 => {
            let r = check_condition1(&problem)?;
            print_report(&r, "condition 1");
            r.condition1_holds
        }
        CheckMode::TangentDomination => {
            let r = check_tangent_domination(&problem)?;
            print_report(&r, "tangent domination");
            r.condition1_holds
        }
        CheckMode::EpsilonBar => {
            let e = compute_epsilon_bar(&problem)?;
            println!("epsilon_bar: {}", e.value);
            if !e.positive {
                println!("epsilon_bar is not positive: the pseudoconvexity premise fails");
            }
            e.positive
        }
        CheckMode::RobustQc => {
            let func = match args.target.as_str() {
                "obj" => negate(&problem.objective),
                t => {
                    let j: usize = t
                        .strip_prefix('g')
                        .and_then(|v| v.parse().ok())
                        .filter(|&j| j >= 1 && j <= problem.m())
                        .with_context(|| format!("bad --target {t:?}"))?;
                    problem.constraints[j - 1].clone()
                }
            };
            let points = split_points(&problem)?;
            let all: Vec<BinaryVector> = points.feasible.into_iter().chain(points.infeasible).collect();
            match check_robust_quasiconvex_binary(&func, args.tau, &all)? {
                None => {
                    println!("robust quasiconvexity (tau = {}): HOLDS", args.tau);
                    true
                }
                Some((x, y)) => {
                    println!("robust quasiconvexity (tau = {}): FAILS, witness x = {x}, y = {y}", args.tau);
                    false
                }
            }
        }
    };
    Ok(if ok { 0 } else { 2 })
}

fn negate(f: &NonlinearFunction) -> NonlinearFunction {
    f.scaled(-1.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchSpec {
    sizes: Vec<usize>,
    seeds: u64,
    #[serde(default)]
    seed_start: u64,
    #[serde(default = "default_algorithm")]
    algorithm: String,
    #[serde(default = "default_form")]
    form: String,
    epsilon: Option<f64>,
    #[serde(default = "default_master")]
    master: String,
    #[serde(default)]
    fixing: bool,
    max_iter: Option<usize>,
}

fn default_algorithm() -> String {
    "cp".into()
}
fn default_form() -> String {
    "equality".into()
}
fn default_master() -> String {
    "enum".into()
}

struct BenchRow {
    n: usize,
    seed: u64,
    status: &'static str,
    iterations: usize,
    gap_pct: f64,
    value: f64,
    nodes: u64,
    ms: f64,
}

pub const BENCH_HEADER: &str = "n,seed,algorithm,status,iterations,gap_pct,value,nodes,ms";

fn cmd_bench(spec_path: &Path, out: Option<&Path>) -> Result<u8> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: BenchSpec = toml::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    if spec.sizes.is_empty() {
        bail!("bench spec has an empty sizes list");
    }
    if spec.seeds == 0 {
        bail!("bench spec needs seeds ≥ 1");
    }
    let form = match spec.form.as_str() {
        "inequality" => QkpForm::Inequality,
        "equality" => QkpForm::Equality,
        f => bail!("unknown form {f:?}"),
    };
    let master = match spec.master.as_str() {
        "enum" => MasterBackend::Enumerate {
            limit: ENUMERATION_LIMIT,
        },
        "bnb" => MasterBackend::BranchAndBound,
        m => bail!("unknown master {m:?}"),
    };
    match spec.algorithm.as_str() {
        "cp" => {}
        "shifted" if spec.epsilon.is_some() => {}
        "shifted" => bail!("algorithm shifted needs epsilon"),
        a => bail!("unknown algorithm {a:?} (cp or shifted)"),
    }
    let options = SolveOptions {
        epsilon_stop: 0.0,
        max_iter: spec.max_iter,
        master,
        fixing: spec.fixing,
    };
    let jobs: Vec<(usize, u64)> = spec
        .sizes
        .iter()
        .flat_map(|&n| (spec.seed_start..spec.seed_start + spec.seeds).map(move |s| (n, s)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(n, seed)| -> Result<BenchRow> {
            let inst = qkp::generate_instance(n, seed)?;
            let problem = qkp::qkp_to_problem(&inst, form);
            let x0 = qkp::greedy_start(&inst);
            let t = Instant::now();
            let r = match spec.epsilon {
                Some(eps) if spec.algorithm == "shifted" => solve_algorithm3(&problem, &x0, eps, &options)?,
                _ => solve_algorithm1(&problem, &x0, &options)?,
            };
            let ms = t.elapsed().as_secs_f64() * 1e3;
            Ok(BenchRow {
                n,
                seed,
                status: r.status.name(),
                iterations: r.iterations,
                gap_pct: qkp::optimality_gap(r.state.ub, r.state.lb).unwrap_or(f64::NAN),
                value: r.best_value,
                nodes: r.state.master_nodes,
                ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.n, r.seed));

    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(sink, "{BENCH_HEADER}")?;
    for r in &rows {
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.n, r.seed, spec.algorithm, r.status, r.iterations, r.gap_pct, r.value, r.nodes, r.ms
        )?;
    }
    sink.flush()?;
    eprintln!("n,mean_ms,mean_gap_pct,mean_iterations");
    for &n in &spec.sizes {
        let group: Vec<&BenchRow> = rows.iter().filter(|r| r.n == n).collect();
        let k = group.len() as f64;
        eprintln!(
            "{n},{:.3},{},{}",
            group.iter().map(|r| r.ms).sum::<f64>() / k,
            group.iter().map(|r| r.gap_pct).sum::<f64>() / k,
            group.iter().map(|r| r.iterations as f64).sum::<f64>() / k
        );
    }
    Ok(0)
}
