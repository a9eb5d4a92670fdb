//! `copodr` command line: solve one problem file or run a benchmark suite.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 schema or usage error,
//! 3 solver numerical failure, 4 infeasible.

use clap::{Args, Parser, Subcommand, ValueEnum};
use copodr::bench::{run_suite, ExperimentConfig, Family};
use copodr::conic::{cbf, sdpa, AssembleOptions, SolveOptions, Status};
use copodr::lifting::lift_spec_from_json;
use copodr::model::schema::problem_from_json;
use copodr::pipeline::{prepare, run, Bound, Rule, Scheme};
use copodr::Error;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OTHER: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "copodr", version, about = "Copositive bounds for multi-stage robust linear programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bound one problem file with a decision rule and cone approximation.
    Solve(SolveArgs),
    /// Run a seeded benchmark family and write CSV and Markdown tables.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Ldr,
    Qdr,
    Pldr,
    Pqdr,
    Lqdr,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConeArg {
    Ia,
    As,
    Gwk,
    Ustar,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Sdpa,
    Cbf,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON (schema copodr-v1).
    problem: PathBuf,
    #[arg(long, value_enum, default_value = "ldr")]
    rule: RuleArg,
    #[arg(long, value_enum, default_value = "ia")]
    cone: ConeArg,
    /// Lifting JSON for pldr/pqdr; defaults to midpoint breakpoints on every axis.
    #[arg(long)]
    lift: Option<PathBuf>,
    /// Write the conic program (SDPA for .dat-s, CBF otherwise or per --format).
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// With --export, skip the solve.
    #[arg(long, requires = "export")]
    no_solve: bool,
    /// Check the extracted rule on sampled parameters.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the solver's primal/dual vectors as text.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Machine-readable report.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    family: String,
    #[arg(long = "T", default_value_t = 1)]
    t: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma separated, e.g. qdr-ia,qdr-as; the family baseline is always added.
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, env = "COPODR_JOBS")]
    jobs: Option<usize>,
    /// Fill the solve_seconds column (the CSV then differs between runs).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    json: bool,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Schema(_) | Error::Dimension(_) | Error::Invalid(_) | Error::Format(_) => EXIT_SCHEMA,
            Error::Solver(_) => EXIT_NUMERICAL,
            Error::Unbounded(_) | Error::Io(_) => EXIT_OTHER,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_OTHER, msg: format!("{}: {e}", path.display()) }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_fail(path, e))
}

fn rule_of(r: RuleArg) -> Rule {
    match r {
        RuleArg::Ldr => Rule::Ldr,
        RuleArg::Qdr => Rule::Qdr,
        RuleArg::Pldr => Rule::Pldr,
        RuleArg::Pqdr => Rule::Pqdr,
        RuleArg::Lqdr => Rule::Lqdr,
    }
}

fn bound_of(c: ConeArg) -> Bound {
    match c {
        ConeArg::Ia => Bound::Ia,
        ConeArg::As => Bound::As,
        ConeArg::Gwk => Bound::Gwk,
        ConeArg::Ustar => Bound::Ustar,
    }
}

fn export(args: &SolveArgs, program: &copodr::conic::ConicProgram, path: &Path) -> Result<(), Failure> {
    let fmt = args.format.unwrap_or_else(|| {
        let name = path.to_string_lossy();
        if name.ends_with(".dat-s") || name.ends_with(".sdpa") {
            FormatArg::Sdpa
        } else {
            FormatArg::Cbf
        }
    });
    match fmt {
        FormatArg::Sdpa => sdpa::export_sdpa(program, path)?,
        FormatArg::Cbf => cbf::export_cbf(program, path)?,
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let p = problem_from_json(&read(&args.problem)?)?;
    let lift = match &args.lift {
        Some(path) => Some(lift_spec_from_json(&read(path)?)?),
        None => None,
    };
    let scheme = Scheme::new(rule_of(args.rule), bound_of(args.cone));

    if let Some(path) = &args.export {
        if !matches!(scheme.bound, Bound::Ia | Bound::As) {
            return Err(Failure { code: EXIT_SCHEMA, msg: "--export needs --cone ia or as".into() });
        }
        let prepared = prepare(&p, scheme.rule, lift.as_ref())?;
        let approx = if scheme.bound == Bound::Ia { copodr::conic::Approx::IA } else { copodr::conic::Approx::AS };
        let asm = copodr::conic::assemble(&prepared.cp, &AssembleOptions::new(approx))?;
        export(args, &asm.program, path)?;
        if args.no_solve {
            if args.json {
                println!("{}", json!({"scheme": scheme.to_string(), "exported": path}));
            } else {
                println!("{scheme}: wrote {}", path.display());
            }
            return Ok(());
        }
    }

    let r = run(&p, scheme, lift.as_ref(), &SolveOptions::default())?;
    let sol = &r.solution.solution;
    if let Some(path) = &args.solution {
        std::fs::write(path, sol.to_text()).map_err(|e| io_fail(path, e))?;
    }
    let verdict = if args.verify && r.status() == Status::Optimal { Some(r.verify(&p, args.samples, args.seed)?) } else { None };

    if args.json {
        let report = json!({
            "scheme": scheme.to_string(),
            "status": r.status(),
            "bound": if r.value().is_finite() { json!(r.value()) } else { json!(null) },
            "residuals": sol.residuals,
            "iterations": sol.iterations,
            "solve_seconds": r.seconds,
            "verify": verdict,
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("report"));
    } else {
        println!("scheme     {scheme}");
        println!("status     {:?}", r.status());
        println!("bound      {:.10}", r.value());
        println!(
            "residuals  primal {:.2e}  dual {:.2e}  gap {:.2e}",
            sol.residuals.primal, sol.residuals.dual, sol.residuals.gap
        );
        println!("time       {:.3}s ({} iterations)", r.seconds, sol.iterations);
        if let Some(v) = &verdict {
            println!(
                "verify     {} (max violation {:.2e}, worst sampled objective {:.10}, {} samples)",
                if v.verdict { "pass" } else { "FAIL" },
                v.violation,
                v.realized,
                v.samples
            );
        }
    }
    match r.status() {
        Status::Optimal => Ok(()),
        Status::Infeasible => {
            let ray = sol.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let by = r.assembled.as_ref().map(|a| copodr::linalg::dot(&a.program.b, &sol.y));
            let cert = match by {
                Some(v) => format!("dual ray with bᵀy = {v:.3e}, ‖y‖∞ = {ray:.3e}"),
                None => format!("dual ray with ‖y‖∞ = {ray:.3e}"),
            };
            Err(Failure { code: EXIT_INFEASIBLE, msg: format!("{scheme}: the approximation is infeasible ({cert})") })
        }
        s => Err(Failure { code: EXIT_NUMERICAL, msg: format!("{scheme}: solver stopped with status {s:?}") }),
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let family: Family = args.family.parse()?;
    let mut cfg = ExperimentConfig::new(family, args.t, args.n, args.seed);
    if !args.schemes.is_empty() {
        cfg.schemes = args.schemes.iter().map(|s| s.parse::<Scheme>()).collect::<Result<_, _>>()?;
    }
    cfg.jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let table = run_suite(&cfg)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_fail(&args.out, e))?;
    let stem = format!("{family}_T{}_n{}_seed{}", args.t, args.n, args.seed);
    let csv = args.out.join(format!("{stem}.csv"));
    let md = args.out.join(format!("{stem}.md"));
    std::fs::write(&csv, table.to_csv(args.timings)).map_err(|e| io_fail(&csv, e))?;
    std::fs::write(&md, table.to_markdown()).map_err(|e| io_fail(&md, e))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&table.stats).expect("stats"));
    } else {
        print!("{}", table.to_markdown());
        println!("wrote {} and {}", csv.display(), md.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
