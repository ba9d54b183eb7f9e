//! `triplet-mur` command line: `analyze`, `sweep` and `verify`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad arguments or input,
//! 3 solver non-convergence, 4 output not writable.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::experiment::{linear_grid, sweep, Family, RNG_NAME};
use crate::format::{fmt_g12, round_json};
use crate::geometry::{fermat_torricelli, Vec3};
use crate::mur::{analyze, gamma, FT_TOL};
use crate::parent::build_parent_padded;
use crate::qubit::Triplet;
use crate::solver::{solve_bloch_form, solve_povm_form, SolveStatus, DEFAULT_TOL};
use crate::verify::{run_suites, Suite};

pub use crate::experiment::SweepRow;

pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_UNWRITABLE: i32 = 4;

pub const CSV_HEADER: &str = "gamma_deg,lower_bound,attainable,exact,analytic,mc_estimate,mc_stderr,jointly_measurable";

#[derive(Parser, Debug)]
#[command(name = "triplet-mur", version, about = "Incompatibility and optimal joint measurements of qubit observable triplets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze one triplet of unbiased observables given by Bloch vectors.
    Analyze(AnalyzeArgs),
    /// Sweep one of the four families over an angle grid.
    Sweep(SweepArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Form {
    Bloch,
    Povm,
}

#[derive(clap::Args, Debug)]
struct AnalyzeArgs {
    /// Bloch vector "x,y,z" of the first observable.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    m1: Vec3,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    m2: Vec3,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    m3: Vec3,
    /// Solver tolerance on the objective.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Which conic formulation computes the exact value.
    #[arg(long, value_enum, default_value_t = Form::Bloch)]
    form: Form,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    /// m_o, m_perp, m_p or m_y.
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma_start: f64,
    #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
    gamma_end: f64,
    #[arg(long, default_value_t = 91)]
    steps: usize,
    /// Monte-Carlo shots per point; 0 disables the simulation.
    #[arg(long, default_value_t = 0)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of ft, dual, parent, symmetry.
    #[arg(long, value_delimiter = ',')]
    cases: Vec<Suite>,
    /// Override every suite's pass threshold.
    #[arg(long)]
    tol: Option<f64>,
    /// Emit a JSON report instead of the summary.
    #[arg(long)]
    json: bool,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("'{p}': {e}"))?;
        if !slot.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(Vec3::from(v))
}

fn v3(v: Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => EXIT_NO_CONVERGENCE,
            Error::Io(_) => EXIT_UNWRITABLE,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<i32, Failure>;

fn io_fail(e: std::io::Error) -> Failure {
    Failure { code: EXIT_UNWRITABLE, message: e.to_string() }
}

fn analyze_document(args: &AnalyzeArgs) -> Result<Value, Failure> {
    let t = Triplet::unbiased([args.m1, args.m2, args.m3])?;
    let report = analyze(&t)?;
    let sol = match args.form {
        Form::Bloch => solve_bloch_form(&t, args.tol)?,
        Form::Povm => solve_povm_form(&t, args.tol)?,
    };
    if sol.status != SolveStatus::Optimal {
        return Err(Failure {
            code: EXIT_NO_CONVERGENCE,
            message: format!("solver stopped with status {:?} after {} iterations", sol.status, sol.iterations),
        });
    }
    // The POVM form may report a tiny bias; the parent design wants the unbiased part.
    let n = Triplet::unbiased(sol.approximators.bloch())?;
    let design = build_parent_padded(&n)?;
    let ft = fermat_torricelli(&report.p, FT_TOL)?;
    let mut doc = json!({
        "input": [v3(args.m1), v3(args.m2), v3(args.m3)],
        "gamma_matrix_row_products": gamma().row_products(),
        "p_vectors": report.p.map(v3),
        "ft_point": v3(ft.point),
        "lhs": report.lhs,
        "delta": report.delta,
        "lower_bound": report.lower_bound,
        "attainable": report.attainable,
        "jointly_measurable": report.jointly_measurable,
        "exact_value": sol.value,
        "optimal_n": sol.approximators.bloch().map(v3),
        "parent": {
            "probabilities": design.probabilities,
            "directions": design.directions.map(|d| d.map(v3).unwrap_or(Value::Null)),
            "post_processing": design.post.table.iter()
                .map(|(label, r)| json!({ "label": label.to_string(), "plus_probabilities": r }))
                .collect::<Vec<_>>(),
        },
        "worst_state": v3(sol.worst_state.r),
    });
    round_json(&mut doc);
    Ok(doc)
}

fn text_report(doc: &Value) -> String {
    let num = |k: &str| doc[k].as_f64().map(fmt_g12).unwrap_or_default();
    let mut out = String::new();
    out.push_str(&format!("lhs                {}\n", num("lhs")));
    out.push_str(&format!("delta              {}\n", num("delta")));
    out.push_str(&format!("lower bound        {}\n", num("lower_bound")));
    out.push_str(&format!("attainable         {}\n", doc["attainable"]));
    out.push_str(&format!("jointly measurable {}\n", doc["jointly_measurable"]));
    out.push_str(&format!("exact value        {}\n", num("exact_value")));
    out.push_str(&format!("optimal n          {}\n", doc["optimal_n"]));
    out.push_str(&format!("worst state        {}\n", doc["worst_state"]));
    out
}

fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> CmdResult {
    let doc = analyze_document(args)?;
    let text = match args.format {
        ReportFormat::Json => serde_json::to_string_pretty(&doc).map_err(|e| Failure { code: 1, message: e.to_string() })? + "\n",
        ReportFormat::Text => text_report(&doc),
    };
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(0)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g12).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_g12(r.gamma_deg),
            fmt_g12(r.lower_bound),
            u8::from(r.attainable),
            fmt_g12(r.exact),
            opt(r.analytic),
            opt(r.mc_estimate),
            opt(r.mc_stderr),
            u8::from(r.jointly_measurable),
        ));
    }
    s
}

pub fn rows_to_json(rows: &[SweepRow]) -> String {
    let mut v: Value = rows
        .iter()
        .map(|r| {
            json!({
                "gamma_deg": r.gamma_deg,
                "lower_bound": r.lower_bound,
                "attainable": u8::from(r.attainable),
                "exact": r.exact,
                "analytic": r.analytic,
                "mc_estimate": r.mc_estimate,
                "mc_stderr": r.mc_stderr,
                "jointly_measurable": u8::from(r.jointly_measurable),
            })
        })
        .collect();
    round_json(&mut v);
    serde_json::to_string_pretty(&v).unwrap_or_default() + "\n"
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let grid = linear_grid(args.gamma_start, args.gamma_end, args.steps)?;
    if !(args.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", args.tol)).into());
    }
    if args.shots > 0 && args.shots < crate::experiment::MIN_SHOTS {
        return Err(Error::InvalidInput(format!("--shots must be 0 or at least {}", crate::experiment::MIN_SHOTS)).into());
    }
    let rows = sweep(args.family, &grid, args.shots, args.seed, args.tol)?;
    let body = match args.format {
        TableFormat::Csv => rows_to_csv(&rows),
        TableFormat::Json => rows_to_json(&rows),
    };
    match &args.out {
        Some(path) => std::fs::write(path, body).map_err(|e| Failure {
            code: EXIT_UNWRITABLE,
            message: format!("cannot write {}: {e}", path.display()),
        })?,
        None => out.write_all(body.as_bytes()).map_err(io_fail)?,
    }
    if args.shots > 0 {
        // Record which generator produced the counts.
        let _ = writeln!(err, "monte-carlo: {RNG_NAME}, base seed {}, point i uses seed + i", args.seed);
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let suites = if args.cases.is_empty() { Suite::ALL.to_vec() } else { args.cases.clone() };
    let reports = run_suites(&suites, args.seed, args.tol);
    let passed = reports.iter().all(|r| r.passed());
    let text = if args.json {
        let mut v = json!({ "passed": passed, "seed": args.seed, "suites": reports });
        round_json(&mut v);
        serde_json::to_string_pretty(&v).unwrap_or_default() + "\n"
    } else {
        let mut s = String::new();
        for r in &reports {
            s.push_str(&format!(
                "{:<9} {}  {} cases, max error {:.3e}, tol {:.1e}\n",
                r.suite.name(),
                if r.passed() { "PASS" } else { "FAIL" },
                r.cases,
                r.max_error,
                r.tol
            ));
            for f in &r.failures {
                s.push_str(&format!("    failing: {f}\n"));
            }
        }
        s.push_str(if passed { "all suites passed\n" } else { "verification failed\n" });
        s
    };
    out.write_all(text.as_bytes()).map_err(io_fail)?;
    Ok(if passed { 0 } else { EXIT_VERIFY_FAILED })
}

/// Parse `args` (program name first) and run, writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut full = vec!["triplet-mur"];
        full.extend_from_slice(args);
        let code = run_with(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn vector_parsing() {
        assert_eq!(parse_vec3("0, 0.5,-1").unwrap(), Vec3::new(0.0, 0.5, -1.0));
        assert!(parse_vec3("0,0").is_err());
        assert!(parse_vec3("a,b,c").is_err());
        assert!(parse_vec3("1,inf,0").is_err());
    }

    #[test]
    fn analyze_pauli() {
        let (code, out, _) = call(&["analyze", "--m1", "0,0,1", "--m2", "0,1,0", "--m3", "1,0,0"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["exact_value"].as_f64().unwrap() - 1.464101615138).abs() < 1e-9);
    }

    #[test]
    fn analyze_parallel_compatible() {
        let (code, out, _) = call(&["analyze", "--m1", "0,0,1", "--m2", "0,0,1", "--m3", "0,0,1"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["jointly_measurable"], Value::Bool(true));
        assert!(v["exact_value"].as_f64().unwrap().abs() < 1e-8);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&["analyze", "--m1", "0,0", "--m2", "0,1,0", "--m3", "1,0,0"]).0, 2);
        assert_eq!(call(&["analyze", "--m1", "0,0,2", "--m2", "0,1,0", "--m3", "1,0,0"]).0, 2);
        assert_eq!(call(&["sweep", "--family", "m_x"]).0, 2);
        assert_eq!(call(&["sweep", "--family", "m_o", "--steps", "1"]).0, 2);
        assert_eq!(call(&["sweep", "--family", "m_o", "--gamma-end", "120"]).0, 2);
        assert_eq!(call(&["verify", "--cases", "bogus"]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("sweep"));
    }

    #[test]
    fn csv_rows() {
        let (code, out, _) = call(&["sweep", "--family", "m_p", "--gamma-start", "30", "--gamma-end", "60", "--steps", "2"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        // No analytic value or simulation for this family and shot count.
        assert!(lines[1].starts_with("30,") && lines[1].ends_with(",,,,0"), "{}", lines[1]);
    }

    #[test]
    fn unwritable_output_exits_4() {
        let code = call(&["sweep", "--family", "m_o", "--steps", "2", "--out", "/nonexistent-dir/x.csv"]).0;
        assert_eq!(code, 4);
    }

    #[test]
    fn verify_controlled_failure() {
        let (code, out, _) = call(&["verify", "--cases", "ft", "--tol", "1e-30"]);
        assert_eq!(code, 1);
        assert!(out.contains("FAIL") && out.contains("failing"));
    }
}
