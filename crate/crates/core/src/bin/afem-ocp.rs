use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use afem_ocp::activeset::{full_discretization_boundary, to_csv as segments_csv, variational_boundary};
use afem_ocp::adapt::{afem_loop_with, eoc, AdaptOptions, AdaptiveHistory, Quantity};
use afem_ocp::compare::{compare, format_table};
use afem_ocp::control::{OuterMethod, SolverOptions};
use afem_ocp::fe::{l2_norm_diff, LinearSolverOptions};
use afem_ocp::mesh::Mesh;
use afem_ocp::problems::{manufactured_poisson, problem_by_name, solve_bvp, PROBLEM_NAMES};
use afem_ocp::vtk::{to_vtk, Field};
use afem_ocp::Error;

#[derive(Parser)]
#[command(name = "afem-ocp", version, about = "Adaptive FEM for control-constrained elliptic optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive (or uniform) loop and write the history.
    Run(RunArgs),
    /// Align histories by DOF count and print an efficiency table.
    Compare(CompareArgs),
    /// Solve, then write active-set boundaries of the final control.
    Activeset(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Refine {
    Adaptive,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Emit {
    Csv,
    Vtk,
    Activeset,
    Timing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    FixedPoint,
    ActiveSet,
}

/// Keys of the TOML config file; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    problem: Option<String>,
    refine: Option<Refine>,
    theta: Option<f64>,
    r: Option<usize>,
    max_dofs: Option<usize>,
    max_iters: Option<usize>,
    tol: Option<f64>,
    quad_order: Option<usize>,
    out: Option<PathBuf>,
    emit: Option<Vec<Emit>>,
    initial_subdivisions: Option<usize>,
    method: Option<Method>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with the same keys as the flags (underscores for dashes).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, value_enum)]
    refine: Option<Refine>,
    #[arg(long)]
    theta: Option<f64>,
    /// Bisections per marked element.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    max_dofs: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Outer solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    emit: Option<Vec<Emit>>,
    /// Cells per side of the initial mesh.
    #[arg(long)]
    initial_subdivisions: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// History CSV files; the first is the reference.
    #[arg(required = true, num_args = 2..)]
    histories: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "eta")]
    quantity: QuantityArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuantityArg {
    Eta,
    Combined,
    ErrU,
    ErrY,
    ErrP,
    Osc,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Eta => Quantity::Eta,
            QuantityArg::Combined => Quantity::Combined,
            QuantityArg::ErrU => Quantity::ErrU,
            QuantityArg::ErrY => Quantity::ErrY,
            QuantityArg::ErrP => Quantity::ErrP,
            QuantityArg::Osc => Quantity::Osc,
        }
    }
}

struct RunConfig {
    problem: String,
    refine: Refine,
    adapt: AdaptOptions,
    solver: SolverOptions,
    out: PathBuf,
    emit: Vec<Emit>,
}

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => Failure::Config(m),
            Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let problem = self.problem.clone().or(file.problem).unwrap_or_else(|| "example1".into());
        if !PROBLEM_NAMES.contains(&problem.as_str()) {
            return Err(Failure::Config(format!(
                "unknown problem '{problem}' (expected one of {})",
                PROBLEM_NAMES.join(", ")
            )));
        }
        let refine = self.refine.or(file.refine).unwrap_or(Refine::Adaptive);
        let mut adapt = AdaptOptions {
            theta: self.theta.or(file.theta).unwrap_or(0.3),
            r: self.r.or(file.r).unwrap_or(1),
            max_dofs: self.max_dofs.or(file.max_dofs),
            max_iters: self.max_iters.or(file.max_iters),
            uniform: refine == Refine::Uniform,
            ..AdaptOptions::default()
        };
        if adapt.max_dofs.is_none() && adapt.max_iters.is_none() {
            adapt.max_dofs = Some(100_000);
        }
        if let Some(n) = self.initial_subdivisions.or(file.initial_subdivisions) {
            adapt.initial_subdivisions = n;
        }
        let mut solver = SolverOptions::default();
        if let Some(tol) = self.tol.or(file.tol) {
            solver.tol = tol;
        }
        if let Some(q) = self.quad_order.or(file.quad_order) {
            solver.quad_order = q;
            adapt.estimator.quad_order = q;
        }
        if self.method.or(file.method) == Some(Method::ActiveSet) {
            solver.method = OuterMethod::ActiveSet;
        }
        adapt.validate()?;
        solver.validate()?;
        Ok(RunConfig {
            problem,
            refine,
            adapt,
            solver,
            out: self.out.clone().or(file.out).unwrap_or_else(|| "out".into()),
            emit: self.emit.clone().or(file.emit).unwrap_or_else(|| vec![Emit::Csv]),
        })
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn print_summary(h: &AdaptiveHistory) {
    let has_err = h.records.iter().any(|r| r.combined_error().is_some());
    print!("{:>4} {:>9} {:>12} {:>12}", "k", "N", "eta", "osc");
    if has_err {
        print!(" {:>12} {:>12} {:>12}", "err_u", "err_y", "err_p");
    }
    println!(" {:>8}", "eoc_eta");
    for (i, r) in h.records.iter().enumerate() {
        print!("{:>4} {:>9} {:>12.4e} {:>12.4e}", r.k, r.n_dof, r.eta, r.osc);
        if has_err {
            let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
            print!(" {:>12} {:>12} {:>12}", f(r.err_u), f(r.err_y), f(r.err_p));
        }
        let rate = if i == 0 {
            "-".to_string()
        } else {
            let p = &h.records[i - 1];
            format!("{:.3}", -(r.eta / p.eta).ln() / (r.n_dof as f64 / p.n_dof as f64).ln())
        };
        println!(" {rate:>8}");
    }
    let tail = eoc(h, Quantity::Eta, 4);
    if let Some(s) = tail.tail_slope {
        println!("tail slope of eta vs N: {s:.4}");
    }
    if has_err {
        if let Some(s) = eoc(h, Quantity::Combined, 4).tail_slope {
            println!("tail slope of err_u+err_y+err_p vs N: {s:.4}");
        }
    }
}

/// Uniform levels n = 8, 16, 32, 64 of the manufactured Poisson problem;
/// passes when every L2 rate in h lies in 2 ± 0.1.
fn run_poisson(cfg: &RunConfig) -> Result<bool, Failure> {
    let bvp = manufactured_poisson();
    let exact = bvp.exact.clone().expect("manufactured solution");
    let mut prev: Option<f64> = None;
    let mut ok = true;
    println!("{:>4} {:>9} {:>12} {:>8}", "n", "N", "L2 error", "rate");
    for n in [8, 16, 32, 64] {
        let mesh = Mesh::unit_square(n)?;
        let y = solve_bvp(&mesh, &bvp, cfg.solver.quad_order, LinearSolverOptions::default())?;
        let err = l2_norm_diff(&mesh, &y, &exact, 5)?;
        let rate = prev.map(|e| (e / err).log2());
        if let Some(r) = rate {
            ok &= (r - 2.0).abs() <= 0.1;
        }
        println!(
            "{n:>4} {:>9} {err:>12.4e} {:>8}",
            mesh.num_vertices(),
            rate.map_or("-".into(), |r| format!("{r:.3}"))
        );
        prev = Some(err);
    }
    println!("poisson oracle: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run(args: &RunArgs, activeset_only: bool) -> Result<(), Failure> {
    let mut cfg = args.resolve()?;
    if cfg.problem == "poisson" {
        return if run_poisson(&cfg)? {
            Ok(())
        } else {
            Err(Failure::Solver("poisson oracle rates out of band".into()))
        };
    }
    if activeset_only {
        cfg.emit = vec![Emit::Activeset];
    }
    let spec = problem_by_name(&cfg.problem)?;
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    let vtk = cfg.emit.contains(&Emit::Vtk);
    let out = cfg.out.clone();
    let run = afem_loop_with(
        &spec,
        &cfg.adapt,
        &cfg.solver,
        Mesh::unit_square(cfg.adapt.initial_subdivisions)?,
        |view| {
            if vtk {
                let eta = view.indicators.eta2_all().iter().map(|v| v.sqrt()).collect::<Vec<_>>();
                let u: Vec<f64> = view.solution.p.values().iter().map(|&p| spec.clamp_control(p)).collect();
                let text = to_vtk(
                    view.mesh,
                    &format!("{} k={}", spec.name, view.record.k),
                    &[Field { name: "eta", values: &eta }],
                    &[
                        Field { name: "y", values: view.solution.y.values() },
                        Field { name: "p", values: view.solution.p.values() },
                        Field { name: "u_nodal", values: &u },
                    ],
                )?;
                fs::write(out.join(format!("mesh_{:03}.vtk", view.record.k)), text)?;
            }
            Ok(())
        },
    )?;
    let mode = match cfg.refine {
        Refine::Adaptive => "adaptive",
        Refine::Uniform => "uniform",
    };
    if cfg.emit.contains(&Emit::Csv) {
        let path = cfg.out.join(format!("{}_{mode}.csv", cfg.problem));
        write(&path, &run.history.to_csv(cfg.emit.contains(&Emit::Timing)))?;
        println!("history written to {}", path.display());
    }
    print_summary(&run.history);
    if let Some(msg) = &run.history.failed {
        return Err(Failure::Solver(msg.clone()));
    }
    if cfg.emit.contains(&Emit::Activeset) {
        let sol = run.solution.as_ref().expect("completed run has a solution");
        let var = variational_boundary(&run.mesh, sol, &spec);
        let full = full_discretization_boundary(&run.mesh, sol, &spec);
        let pv = cfg.out.join(format!("{}_activeset_variational.csv", cfg.problem));
        let pf = cfg.out.join(format!("{}_activeset_full.csv", cfg.problem));
        write(&pv, &segments_csv(&var))?;
        write(&pf, &segments_csv(&full))?;
        println!(
            "active-set boundaries: {} variational segments, {} full-discretization segments",
            var.len(),
            full.len()
        );
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<(), Failure> {
    let mut hs = Vec::new();
    for path in &args.histories {
        let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
        hs.push(AdaptiveHistory::read_csv(std::io::BufReader::new(file))?);
    }
    let refs: Vec<&AdaptiveHistory> = hs.iter().collect();
    let rows = compare(&refs, args.quantity.into())?;
    let names: Vec<String> = args
        .histories
        .iter()
        .map(|p| p.file_stem().map_or("?".into(), |s| s.to_string_lossy().into_owned()))
        .collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    print!("{}", format_table(&rows, &names));
    for (name, h) in names.iter().zip(&hs) {
        if let Some(s) = eoc(h, args.quantity.into(), 4).tail_slope {
            println!("{name}: tail slope {s:.4}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Ok(v) = std::env::var("AFEM_OCP_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: AFEM_OCP_THREADS: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("error: AFEM_OCP_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(1);
            }
        }
    }
    let result = match &cli.command {
        Command::Run(a) => run(a, false),
        Command::Activeset(a) => run(a, true),
        Command::Compare(a) => run_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) => format!("configuration: {m}"),
                Failure::Solver(m) => format!("solver: {m}"),
                Failure::Io(m) => format!("i/o: {m}"),
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
