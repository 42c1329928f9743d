mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use psphere::geomcheck::{self, GeomCheckConfig, GeomReport};
use psphere::instances;
use psphere::optimizer::{multistart, solve, BetaRule, Method, SolverConfig};
use psphere::par::{self, Execution};
use psphere::problems::lasso::DEFAULT_EPS;
use psphere::problems::nnpca::sparsity_count;
use psphere::problems::{kkt_check, nnpca_lift, reference, BoxQpInstance, LassoInstance, NnpcaInstance};
use psphere::{csvio, kernels, Error, RetractionKind, SolveResult, SpherePNorm, TransportKind};

use output::{Document, Format, RunRecord, SCHEMA};

#[derive(Parser)]
#[command(name = "psphere", version, about = "Riemannian optimization on the unit sphere of the p-norm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nonnegative PCA through the 4-sphere.
    Nnpca(NnpcaArgs),
    /// Least squares on the sphere of radius C in the (1+eps)-norm.
    Lasso(LassoArgs),
    /// Box-constrained QP through the p-sphere, swept over p.
    Boxqp(BoxqpArgs),
    /// Geometry self-check over a (p, n) grid.
    Geomcheck(GeomArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Retraction {
    Normalize,
    Projective,
    Orthographic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Transport {
    Diffret,
    Projection,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Beta {
    Fr,
    Prplus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Cg,
    Gd,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum)]
    retraction: Option<Retraction>,
    #[arg(long, value_enum)]
    transport: Option<Transport>,
    #[arg(long, value_enum)]
    beta: Option<Beta>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Stop when the Riemannian gradient norm drops below this.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Carry CG directions with the inverse retraction instead of a transport.
    #[arg(long)]
    inverse_transport: bool,
}

#[derive(Args, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run sweeps on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl OutputArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NnpcaFixture {
    /// A = diag(2, 1).
    Diag21,
    /// A = I.
    Identity,
}

#[derive(Args)]
struct NnpcaArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long, value_enum, conflicts_with = "matrix")]
    fixture: Option<NnpcaFixture>,
    /// Symmetric positive definite matrix as CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    sparsity_threshold: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct LassoArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 13)]
    n: usize,
    /// Radii to solve for.
    #[arg(long = "C", value_delimiter = ',', default_value = "22")]
    c: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficients above this magnitude count as support.
    #[arg(long, default_value_t = 1e-2)]
    threshold: f64,
    /// Replace the response by zeros.
    #[arg(long)]
    zero_response: bool,
    /// Design matrix as CSV; needs --response.
    #[arg(long, requires = "response")]
    design: Option<PathBuf>,
    #[arg(long, requires = "design")]
    response: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoxFixture {
    /// n = 2, A = I, c = (-10, 0), box [-1, 1]^2.
    Clamp,
    /// Same box with c = (-0.5, 0), whose unconstrained minimizer is feasible.
    Feasible,
}

#[derive(Args)]
struct BoxqpArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "5,50,500,5000")]
    p: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Redraws of c allowed while the unconstrained minimizer is feasible.
    #[arg(long, default_value_t = 100)]
    retries: usize,
    #[arg(long, value_enum, conflicts_with = "matrix")]
    fixture: Option<BoxFixture>,
    /// A, c, l, u as CSV files; all four are required together.
    #[arg(long, requires_all = ["linear", "lower", "upper"])]
    matrix: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    linear: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    lower: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    upper: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    reference_iters: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GeomArgs {
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Add p = 1.000001 and p = 50000 to the default grid.
    #[arg(long, conflicts_with = "p")]
    full_grid: bool,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Machine-readable report instead of the table.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Failure { code: 1, message }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into() }
}

fn solver_config(args: &SolverArgs, mut cfg: SolverConfig) -> Result<SolverConfig, Failure> {
    if let Some(r) = args.retraction {
        cfg.retraction = match r {
            Retraction::Normalize => RetractionKind::Normalization,
            Retraction::Projective => RetractionKind::Projective,
            Retraction::Orthographic => RetractionKind::Orthographic,
        };
    }
    if let Some(t) = args.transport {
        cfg.transport = match t {
            Transport::Diffret => TransportKind::DifferentiatedRetraction,
            Transport::Projection => TransportKind::Projection,
        };
    }
    if let Some(b) = args.beta {
        cfg.beta_rule = match b {
            Beta::Fr => BetaRule::FletcherReeves,
            Beta::Prplus => BetaRule::PolakRibierePlus,
        };
    }
    if let Some(m) = args.method {
        cfg.method = match m {
            MethodArg::Cg => Method::ConjugateGradient,
            MethodArg::Gd => Method::GradientDescent,
        };
    }
    if let Some(tol) = args.tol {
        cfg.grad_tol = tol;
    }
    if let Some(k) = args.max_iters {
        cfg.max_iters = k;
    }
    cfg.inverse_retraction_transport = args.inverse_transport;
    cfg.validate()?;
    Ok(cfg)
}

fn solver_echo(cfg: &SolverConfig) -> Value {
    json!({
        "method": match cfg.method { Method::ConjugateGradient => "cg", Method::GradientDescent => "gd" },
        "retraction": match cfg.retraction {
            RetractionKind::Normalization => "normalize",
            RetractionKind::Projective => "projective",
            RetractionKind::Orthographic => "orthographic",
        },
        "transport": match cfg.transport {
            TransportKind::DifferentiatedRetraction => "diffret",
            TransportKind::Projection => "projection",
        },
        "beta": match cfg.beta_rule { BetaRule::FletcherReeves => "fr", BetaRule::PolakRibierePlus => "prplus" },
        "tol": cfg.grad_tol,
        "max_iters": cfg.max_iters,
        "inverse_transport": cfg.inverse_retraction_transport,
    })
}

fn record(label: String, solution: Vec<f64>, r: &SolveResult, diagnostics: Value) -> RunRecord {
    RunRecord {
        label,
        solution,
        objective: r.objective,
        grad_norm: r.grad_norm,
        iterations: r.iterations,
        converged: r.converged,
        diagnostics,
    }
}

fn write<S: Serialize>(doc: &Document<S>, out: &OutputArgs) -> Result<(), Failure> {
    let text = output::render(doc, out.format)?;
    output::emit(&text, out.out.as_deref())?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, Failure> {
    csvio::read_matrix(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn read_vector(path: &Path) -> Result<Vec<f64>, Failure> {
    csvio::read_vector(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn run_nnpca(args: &NnpcaArgs) -> Result<ExitCode, Failure> {
    if args.starts == 0 {
        return Err(invalid("--starts must be at least 1"));
    }
    let (inst, source) = match (&args.fixture, &args.matrix) {
        (Some(NnpcaFixture::Diag21), _) => (NnpcaInstance::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0])))?, "diag21"),
        (Some(NnpcaFixture::Identity), _) => {
            if args.n < 2 {
                return Err(invalid(format!("n must be >= 2, got {}", args.n)));
            }
            (NnpcaInstance::new(DMatrix::identity(args.n, args.n))?, "identity")
        }
        (None, Some(path)) => (NnpcaInstance::new(read_matrix(path)?)?, "matrix"),
        (None, None) => (instances::nnpca_instance(args.n, args.seed)?, "seeded"),
    };
    let n = inst.n();
    let cfg = solver_config(&args.solver, SolverConfig::default())?;
    let s = SpherePNorm::new(n, 4.0)?;
    let starts = instances::positive_starts(&s, args.starts, args.seed);
    let ms = multistart(&inst.problem(), &s, &starts, &cfg, args.output.exec())?;
    let best = ms.best_result();
    let v = nnpca_lift(best.point.coords());
    let kkt = kkt_check(&inst, &v, args.kkt_tol)?;
    let per_start: Vec<Value> = ms
        .runs
        .iter()
        .map(|r| match r {
            Ok(r) => json!({"objective": r.objective, "grad_norm": r.grad_norm, "iterations": r.iterations, "converged": r.converged}),
            Err(e) => json!({"error": e.to_string()}),
        })
        .collect();
    let diagnostics = json!({
        "v": v,
        "lifted_objective": inst.lifted_objective(&v),
        "kkt": kkt,
        "sparsity_threshold": args.sparsity_threshold,
        "sparsity_count": sparsity_count(&v, args.sparsity_threshold),
    });
    let doc = Document {
        schema: SCHEMA,
        command: "nnpca",
        spec: json!({
            "n": n,
            "p": 4.0,
            "seed": args.seed,
            "starts": args.starts,
            "source": source,
            "kkt_tol": args.kkt_tol,
            "solver": solver_echo(&cfg),
        }),
        results: vec![record(format!("start {}", ms.best), best.point.coords().to_vec(), best, diagnostics)],
        diagnostics: json!({"best_start": ms.best, "starts": per_start}),
    };
    write(&doc, &args.output)?;
    Ok(if best.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_lasso(args: &LassoArgs) -> Result<ExitCode, Failure> {
    if args.c.is_empty() {
        return Err(invalid("--C needs at least one radius"));
    }
    if !(args.eps > 0.0 && args.eps.is_finite()) {
        return Err(invalid(format!("--eps must be positive, got {}", args.eps)));
    }
    let (x, mut y, w_true) = match (&args.design, &args.response) {
        (Some(d), Some(r)) => (read_matrix(d)?, read_vector(r)?, None),
        _ => {
            let data = instances::lasso_data(args.m, args.n, args.seed)?;
            (data.x, data.y, Some(data.w_true))
        }
    };
    if args.zero_response {
        y.iter_mut().for_each(|v| *v = 0.0);
    }
    let p = 1.0 + args.eps;
    let base = LassoInstance::new(x, y, args.c[0], p)?;
    let n = base.n();
    let cfg = solver_config(
        &args.solver,
        SolverConfig { retraction: RetractionKind::Projective, method: Method::GradientDescent, ..Default::default() },
    )?;
    let s = SpherePNorm::new(n, p)?;
    let x0 = s.point_from_ambient(&vec![1.0; n])?;
    let radii: Vec<LassoInstance> = args.c.iter().map(|&c| base.with_radius(c)).collect::<Result<_, _>>()?;
    let runs = par::map_slice(args.output.exec(), &radii, |inst| solve(&inst.problem(), &s, &x0, &cfg));
    let mut results = Vec::new();
    for (inst, r) in radii.iter().zip(runs) {
        let r = r?;
        let c = inst.radius();
        let w: Vec<f64> = r.point.coords().iter().map(|v| c * v).collect();
        let support: Vec<usize> = (0..n).filter(|&i| w[i].abs() > args.threshold).collect();
        let diagnostics = json!({
            "C": c,
            "x": r.point.coords(),
            "support": support,
            "support_size": support.len(),
            "l1_norm": kernels::pnorm(&w, 1.0),
        });
        results.push(record(format!("C={c}"), w, &r, diagnostics));
    }
    let unregularized = base.unregularized();
    let doc = Document {
        schema: SCHEMA,
        command: "lasso",
        spec: json!({
            "m": base.data().nrows(),
            "n": n,
            "C": args.c,
            "eps": args.eps,
            "p": p,
            "seed": args.seed,
            "threshold": args.threshold,
            "zero_response": args.zero_response,
            "source": if args.design.is_some() { "csv" } else { "seeded" },
            "solver": solver_echo(&cfg),
        }),
        results,
        diagnostics: json!({
            "w_true": w_true,
            "unregularized": unregularized.as_ref().map(|w| json!({"w": w, "loss": base.loss(w)})),
            "unregularized_skipped": unregularized.is_none().then_some("X^T X is singular"),
        }),
    };
    write(&doc, &args.output)?;
    Ok(ExitCode::SUCCESS)
}

fn box_instance(args: &BoxqpArgs) -> Result<(BoxQpInstance, &'static str), Failure> {
    let gate = |inst: BoxQpInstance, source| {
        instances::require_infeasible(&inst).map_err(|e| Failure { code: 3, message: e.to_string() })?;
        Ok((inst, source))
    };
    match (&args.fixture, &args.matrix) {
        (Some(f), _) => {
            let c = match f {
                BoxFixture::Clamp => vec![-10.0, 0.0],
                BoxFixture::Feasible => vec![-0.5, 0.0],
            };
            let inst = BoxQpInstance::new(DMatrix::identity(2, 2), c, vec![-1.0; 2], vec![1.0; 2])?;
            gate(inst, "fixture")
        }
        (None, Some(a)) => {
            let load = |p: &Option<PathBuf>| read_vector(p.as_deref().expect("required by clap"));
            let inst = BoxQpInstance::new(read_matrix(a)?, load(&args.linear)?, load(&args.lower)?, load(&args.upper)?)?;
            gate(inst, "csv")
        }
        (None, None) => match instances::boxqp_instance(args.n, args.seed, args.retries) {
            Ok(inst) => Ok((inst, "seeded")),
            Err(e @ Error::Domain(_)) => Err(Failure { code: 3, message: e.to_string() }),
            Err(e) => Err(e.into()),
        },
    }
}

fn run_boxqp(args: &BoxqpArgs) -> Result<ExitCode, Failure> {
    if args.p.is_empty() {
        return Err(invalid("--p needs at least one exponent"));
    }
    let cfg = solver_config(&args.solver, SolverConfig::default())?;
    let (inst, source) = box_instance(args)?;
    let n = inst.n();
    let spheres: Vec<SpherePNorm> = args.p.iter().map(|&p| SpherePNorm::new(n, p)).collect::<Result<_, _>>()?;
    let w_ref = reference::box_projected_gradient(&inst, args.reference_iters);
    let runs = par::map_slice(args.output.exec(), &spheres, |s| {
        let x0 = instances::boxqp_start(&inst, s)?;
        solve(&inst.problem(), s, &x0, &cfg)
    });
    let mut results = Vec::new();
    for (s, r) in spheres.iter().zip(runs) {
        let r = r?;
        let w = inst.to_box(r.point.coords());
        let diagnostics = json!({
            "p": s.p(),
            "x": r.point.coords(),
            "loss": inst.loss(&w),
            "box_violation": inst.box_violation(&w),
            "distance_to_reference": kernels::pnorm(&kernels::sub(&w, &w_ref), 2.0),
        });
        results.push(record(format!("p={}", s.p()), w, &r, diagnostics));
    }
    let doc = Document {
        schema: SCHEMA,
        command: "boxqp",
        spec: json!({
            "n": n,
            "p": args.p,
            "seed": args.seed,
            "retries": args.retries,
            "source": source,
            "reference_iters": args.reference_iters,
            "solver": solver_echo(&cfg),
        }),
        results,
        diagnostics: json!({
            "linear": inst.linear(),
            "lower": inst.lower(),
            "upper": inst.upper(),
            "unconstrained_minimizer": inst.unconstrained_minimizer(),
            "reference": w_ref,
            "reference_loss": inst.loss(&w_ref),
            "reference_kkt_residual": reference::box_kkt_residual(&inst, &w_ref),
        }),
    };
    write(&doc, &args.output)?;
    Ok(ExitCode::SUCCESS)
}

fn sci(v: f64) -> String {
    format!("{v:.2e}")
}

fn table(report: &GeomReport, color: bool) -> String {
    let mut s = format!("{} cells x {} trials\n", report.cells, report.trials);
    let w = report.rows.iter().map(|r| r.formula.len()).max().unwrap_or(0);
    let wc = report.rows.iter().map(|r| r.check.len()).max().unwrap_or(0);
    for r in &report.rows {
        let at = r.worst_at.map_or(String::new(), |(p, n)| format!("  at p={p} n={n}"));
        s.push_str(&format!(
            "{}  {:<w$}  {:<wc$}  worst {:>9}  tol {:>8}{at}\n",
            output::status(r.passed, color),
            r.formula,
            r.check,
            sci(r.worst),
            sci(r.tol),
        ));
    }
    s.push_str(if report.passed() { "all rows pass\n" } else { "some rows fail\n" });
    s
}

fn run_geomcheck(args: &GeomArgs) -> Result<ExitCode, Failure> {
    let mut cfg = if args.full_grid { GeomCheckConfig::full_grid() } else { GeomCheckConfig::default() };
    if let Some(p) = &args.p {
        cfg.ps = p.clone();
    }
    if let Some(n) = &args.n {
        cfg.ns = n.clone();
    }
    for &p in &cfg.ps {
        kernels::check_exponent(p)?;
    }
    if let Some(&n) = cfg.ns.iter().find(|&&n| n < 2) {
        return Err(invalid(format!("n must be >= 2, got {n}")));
    }
    if cfg.ps.is_empty() || cfg.ns.is_empty() || args.trials == 0 {
        return Err(invalid("empty grid"));
    }
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    if args.sequential {
        cfg.exec = Execution::Sequential;
    }
    let report = geomcheck::run(&cfg);
    let text = match args.format {
        None => table(&report, args.out.is_none() && output::color_enabled()),
        Some(format) => output::render(
            &json!({
                "schema": SCHEMA,
                "command": "geomcheck",
                "spec": {"p": cfg.ps, "n": cfg.ns, "trials": cfg.trials, "seed": cfg.seed},
                "passed": report.passed(),
                "report": report,
            }),
            format,
        )?,
    };
    output::emit(&text, args.out.as_deref())?;
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Nnpca(a) => run_nnpca(a),
        Command::Lasso(a) => run_lasso(a),
        Command::Boxqp(a) => run_boxqp(a),
        Command::Geomcheck(a) => run_geomcheck(a),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("psphere: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
