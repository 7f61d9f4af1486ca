//! `kwgraph`: command-line front end for the Kazdan-Warner graph solver.
//!
//! Exit codes: 0 success, 1 `verify` found failures, 2 invalid input or
//! options, 3 no convergence, undefined degree or no super-solution.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kwgraph::continuation::{branch_scan, estimate_c_h, estimate_lambda_star, fmt_float, BranchTable};
use kwgraph::degree::{
    degree_invariance_sweep, degree_numeric, degree_reduction_consistency, interpolate_path, schur_reduce,
    DegreeValue, SweepReport,
};
use kwgraph::io::{from_json, parse_problem, FamilyFile, LambdaFile, ProblemFile, SweepFile};
use kwgraph::solve::{enumerate_escalating, newton_solve, solve_negative_via_supersolution};
use kwgraph::verify::{run_all, VerifyConfig};
use kwgraph::{Error, KwProblem, Solution, SolveOptions, VertexFunction};

#[derive(Parser, Debug)]
#[command(name = "kwgraph", version, about = "Kazdan-Warner equations on weighted graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Input JSON file.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Report destination (standard output when absent).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Residual tolerance in the sup norm.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Multistart box radius.
    #[arg(long, global = true)]
    radius: Option<f64>,
    /// Number of multistart points.
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// Comma-separated parameter grid for `scan`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    #[arg(long = "bracket-tol", global = true, default_value_t = 1e-3)]
    bracket_tol: f64,
    /// Maximum number of radius doublings.
    #[arg(long, global = true)]
    escalate: Option<u32>,
    /// Waypoint count for `sweep` (overrides the file).
    #[arg(long, global = true)]
    waypoints: Option<usize>,
    /// Number of random instances in the `verify` degree suite.
    #[arg(long, global = true)]
    instances: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Find one solution.
    Solve,
    /// List all solutions found by multistart Newton.
    Enumerate,
    /// Numeric and predicted Brouwer degree.
    Degree,
    /// Eliminate the vertices where h vanishes.
    Reduce,
    /// Degree along a linear path between two problems.
    Sweep,
    /// Bracket the critical constant c_h.
    Ch,
    /// Bracket lambda* for the family (K + lambda, kappa).
    Lambdastar,
    /// Solution counts over a grid of c.
    Scan,
    /// Run the randomized verification suites.
    Verify,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Lib(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(String, u8), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok((report, code)) => match write_report(&cli, &report) {
            Ok(()) => ExitCode::from(code),
            Err(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        },
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("KW_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("KW_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("KW_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn write_report(cli: &Cli, report: &str) -> Result<(), String> {
    match &cli.output {
        Some(path) => std::fs::write(path, report).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn solve_options(cli: &Cli) -> Result<SolveOptions, Failure> {
    let mut o = SolveOptions { rng_seed: cli.seed, start_box_radius: cli.radius, ..Default::default() };
    if let Some(t) = cli.tol {
        o.tol_residual = t;
    }
    if let Some(s) = cli.starts {
        o.n_starts = s;
    }
    if let Some(e) = cli.escalate {
        o.escalate = e;
    }
    o.validate()?;
    Ok(o)
}

fn read_input(cli: &Cli) -> Result<String, Failure> {
    let path = cli.input.as_ref().ok_or_else(|| Failure::Usage("--input is required".into()))?;
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn json_only(cli: &Cli) -> Result<(), Failure> {
    match cli.format {
        Format::Json => Ok(()),
        Format::Csv => Err(Failure::Usage(format!("{:?} reports are JSON only", cli.command).to_lowercase())),
    }
}

fn run(cli: &Cli) -> Outcome {
    let opts = solve_options(cli)?;
    match cli.command {
        Command::Solve => cmd_solve(cli, &opts),
        Command::Enumerate => cmd_enumerate(cli, &opts),
        Command::Degree => cmd_degree(cli, &opts),
        Command::Reduce => cmd_reduce(cli, &opts),
        Command::Sweep => cmd_sweep(cli, &opts),
        Command::Ch => cmd_ch(cli, &opts),
        Command::Lambdastar => cmd_lambdastar(cli, &opts),
        Command::Scan => cmd_scan(cli, &opts),
        Command::Verify => cmd_verify(cli, &opts),
    }
}

/// Newton from zero, then the sub/super-solution method for `c < 0`, then
/// the most stable root of a multistart enumeration.
fn find_one(p: &KwProblem, opts: &SolveOptions) -> Result<Solution, Error> {
    let first = match newton_solve(p, &VertexFunction::zeros(p.len()), opts) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    if p.scalar_c().is_some_and(|c| c < 0.0) {
        if let Ok(s) = solve_negative_via_supersolution(p, opts, &[]) {
            return Ok(s);
        }
    }
    let e = enumerate_escalating(p, opts, &[])?;
    e.solutions
        .into_iter()
        .max_by(|a, b| a.min_eigenvalue.total_cmp(&b.min_eigenvalue))
        .ok_or(first)
}

fn cmd_solve(cli: &Cli, opts: &SolveOptions) -> Outcome {
    let p = parse_problem(&read_input(cli)?)?;
    let s = find_one(&p, opts)?;
    let report = match cli.format {
        Format::Json => json(&s),
        Format::Csv => {
            let mut out = String::from("vertex,name,u\n");
            for (x, name) in p.graph().names().iter().enumerate() {
                let _ = writeln!(out, "{x},{},{}", csv_field(name), fmt_float(s.u[x]));
            }
            out
        }
    };
    Ok((report, 0))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn solutions_csv(solutions: &[Solution]) -> String {
    let mut out = String::from("index,u,residual_linf,jac_det_sign,stability,min_eigenvalue\n");
    for (k, s) in solutions.iter().enumerate() {
        let u: Vec<String> = s.u.iter().map(|&v| fmt_float(v)).collect();
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{}",
            u.join(";"),
            fmt_float(s.residual_linf),
            s.jac_det_sign,
            s.stability,
            fmt_float(s.min_eigenvalue)
        );
    }
    out
}

fn cmd_enumerate(cli: &Cli, opts: &SolveOptions) -> Outcome {
    let p = parse_problem(&read_input(cli)?)?;
    let e = enumerate_escalating(&p, opts, &[])?;
    let report = match cli.format {
        Format::Json => json(&e),
        Format::Csv => solutions_csv(&e.solutions),
    };
    Ok((report, 0))
}

fn cmd_degree(cli: &Cli, opts: &SolveOptions) -> Outcome {
    let p = parse_problem(&read_input(cli)?)?;
    let r = degree_numeric(&p, opts)?;
    let report = match cli.format {
        Format::Json => json(&r),
        Format::Csv => solutions_csv(&r.solutions),
    };
    if r.numeric_degree == DegreeValue::Undefined {
        eprintln!("error: a root is degenerate; the numeric degree is undefined");
        return Ok((report, 3));
    }
    Ok((report, 0))
}

#[derive(Serialize)]
struct ReduceReport {
    reduction: kwgraph::degree::SchurReduction,
    reduced_problem: ProblemFile,
    consistency: kwgraph::degree::ReductionConsistency,
}

fn cmd_reduce(cli: &Cli, opts: &SolveOptions) -> Outcome {
    json_only(cli)?;
    let p = parse_problem(&read_input(cli)?)?;
    let (reduction, reduced) = schur_reduce(&p)?;
    let consistency = degree_reduction_consistency(&p, opts)?;
    let report = ReduceReport { reduction, reduced_problem: ProblemFile::from_problem(&reduced), consistency };
    Ok((json(&report), 0))
}

fn sweep_csv(r: &SweepReport) -> String {
    let mut out = String::from("index,c,regime,root_count,numeric_degree,theoretical_degree\n");
    let deg = |d: DegreeValue| match d {
        DegreeValue::Value(v) => v.to_string(),
        DegreeValue::Undefined => "Undefined".into(),
        DegreeValue::NotApplicable => "NotApplicable".into(),
    };
    for w in &r.waypoints {
        let c = w.c.map(fmt_float).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{c},{:?},{},{},{}",
            w.index,
            w.regime,
            w.root_count,
            deg(w.numeric_degree),
            deg(w.theoretical_degree)
        );
    }
    out
}

fn cmd_sweep(cli: &Cli, opts: &SolveOptions) -> Outcome {
    let file: SweepFile = from_json(&read_input(cli)?)?;
    let g = file.graph.build()?;
    let start = file.start.into_problem(g.clone())?;
    let end = file.end.into_problem(g)?;
    let count = cli.waypoints.or(file.waypoints).unwrap_or(16);
    let path = interpolate_path(&start, &end, count)?;
    let r = degree_invariance_sweep(&path, file.class_a, opts)?;
    let report = match cli.format {
        Format::Json => json(&r),
        Format::Csv => sweep_csv(&r),
    };
    Ok((report, 0))
}

fn cmd_ch(cli: &Cli, opts: &SolveOptions) -> Outcome {
    json_only(cli)?;
    let file: FamilyFile = from_json(&read_input(cli)?)?;
    let g = file.graph.build()?;
    let b = estimate_c_h(&g, &VertexFunction::new(file.h), opts, cli.bracket_tol)?;
    Ok((json(&b), 0))
}

#[derive(Serialize)]
struct LambdaReport {
    bracket: kwgraph::continuation::BracketResult,
    table: BranchTable,
}

fn cmd_lambdastar(cli: &Cli, opts: &SolveOptions) -> Outcome {
    let file: LambdaFile = from_json(&read_input(cli)?)?;
    let g = file.graph.build()?;
    let (bracket, table) =
        estimate_lambda_star(&g, &VertexFunction::new(file.k), &VertexFunction::new(file.kappa), opts, cli.bracket_tol)?;
    let report = match cli.format {
        Format::Json => json(&LambdaReport { bracket, table }),
        Format::Csv => table.to_csv(),
    };
    Ok((report, 0))
}

fn cmd_scan(cli: &Cli, opts: &SolveOptions) -> Outcome {
    let file: FamilyFile = from_json(&read_input(cli)?)?;
    let grid = cli.grid.clone().ok_or_else(|| Failure::Usage("--grid is required for scan".into()))?;
    let g = file.graph.build()?;
    let table = branch_scan(&g, &VertexFunction::new(file.h), &grid, opts)?;
    let report = match cli.format {
        Format::Json => json(&table),
        Format::Csv => table.to_csv(),
    };
    Ok((report, 0))
}

fn cmd_verify(cli: &Cli, opts: &SolveOptions) -> Outcome {
    json_only(cli)?;
    let mut cfg = VerifyConfig { seed: cli.seed, solve: opts.clone(), ..Default::default() };
    if let Some(n) = cli.instances {
        cfg.degree_instances = n;
    }
    let r = run_all(&cfg)?;
    let d = &r.degree;
    eprintln!(
        "degree: {} matched, {} failed, {} degenerate of {}",
        d.matched, d.failed, d.degenerate, d.instances
    );
    eprintln!("identities: {}", if r.identities.passed { "pass" } else { "FAIL" });
    eprintln!("schur: {}", if r.schur.passed { "pass" } else { "FAIL" });
    Ok((json(&r), if r.all_passed { 0 } else { 1 }))
}
