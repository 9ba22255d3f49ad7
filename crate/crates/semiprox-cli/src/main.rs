//! Command-line surface for the semiconvex penalty library.
//!
//! Exit codes are part of the scripting interface: 0 ok, 1 oracle check
//! failed, 2 invalid input (spec documents, CSV files, shapes), 3 numeric
//! range violations, 4 violated solver preconditions.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiprox::moreau;
use semiprox::oracle::{self, GridSpec};
use semiprox::penalty::{ExtReal, PenaltySpec};
use semiprox::semiconvex::{prox_semiconvex, CaseTag, ProxResult};
use semiprox::solver::{
    solve, PenaltyAssignment, RegressionProblem, SolveConfig, SolveError,
};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INPUT_INVALID: u8 = 2;
const EXIT_NUMERIC_RANGE: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "semiprox",
    version,
    about = "Semiconvex sparsity penalties: evaluate, tabulate, cross-check, and solve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the penalty, its envelope and difference penalty, and both
    /// proximity operators at one point; prints a JSON record.
    Eval {
        /// Penalty spec document (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// Emit a CSV table of the penalty and its operators over a uniform grid.
    Table {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long)]
        n: usize,
    },
    /// Cross-check the closed-form prox against the brute-force oracle on
    /// seeded random queries plus the analytic breakpoints.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a penalized least-squares problem from CSV inputs; prints a
    /// JSON report.
    Solve {
        /// Design matrix CSV (header row, n rows, p columns).
        #[arg(long = "X")]
        design: PathBuf,
        /// Response vector CSV (header row, n rows, one column).
        #[arg(long = "y")]
        response: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long = "max-iter", default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT_INVALID,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERIC_RANGE,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Eval { spec, alpha, beta, x } => {
            let spec = load_spec(&spec)?;
            check_positive("alpha", alpha)?;
            check_positive("beta", beta)?;
            if !x.is_finite() {
                return Err(Failure::numeric("x must be finite"));
            }
            cmd_eval(&spec, alpha, beta, x)
        }
        Command::Table { spec, alpha, beta, lo, hi, n } => {
            let spec = load_spec(&spec)?;
            check_positive("alpha", alpha)?;
            check_positive("beta", beta)?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Failure::numeric("table range needs finite lo < hi"));
            }
            if n < 2 {
                return Err(Failure::numeric("table needs at least two grid points"));
            }
            print!("{}", GridTable::build(&spec, alpha, beta, lo, hi, n).to_csv());
            Ok(())
        }
        Command::Check { spec, alpha, beta, samples, seed } => {
            let spec = load_spec(&spec)?;
            check_positive("alpha", alpha)?;
            check_positive("beta", beta)?;
            if samples < 1 {
                return Err(Failure::numeric("check needs at least one sample"));
            }
            cmd_check(&spec, alpha, beta, samples, seed)
        }
        Command::Solve {
            design,
            response,
            spec,
            alpha,
            beta,
            lambda,
            max_iter,
            tol,
        } => {
            let spec = load_spec(&spec)?;
            check_positive("alpha", alpha)?;
            check_positive("beta", beta)?;
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Failure::numeric("lambda must be nonnegative"));
            }
            if max_iter == 0 {
                return Err(Failure::numeric("max-iter must be at least 1"));
            }
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Failure::numeric("tol must be positive"));
            }
            cmd_solve(&design, &response, spec, alpha, beta, lambda, max_iter, tol)
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::numeric(format!("{name} must be a positive finite number")))
    }
}

fn load_spec(path: &Path) -> Result<PenaltySpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read spec {}: {e}", path.display())))?;
    PenaltySpec::from_json(&text)
        .map_err(|e| Failure::input(format!("spec {}: {e}", path.display())))
}

/// JSON encoding of extended reals: plain numbers, with "inf"/"-inf" string
/// tokens for the infinities (JSON has no infinity literal).
fn json_real(v: f64) -> serde_json::Value {
    if v == f64::INFINITY {
        serde_json::Value::String("inf".into())
    } else if v == f64::NEG_INFINITY {
        serde_json::Value::String("-inf".into())
    } else {
        serde_json::json!(v)
    }
}

fn json_ext(v: ExtReal) -> serde_json::Value {
    match v {
        ExtReal::Finite(f) => serde_json::json!(f),
        ExtReal::PosInf => serde_json::Value::String("inf".into()),
    }
}

fn csv_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn csv_ext(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(f) => format!("{f}"),
        ExtReal::PosInf => "inf".into(),
    }
}

fn cmd_eval(spec: &PenaltySpec, alpha: f64, beta: f64, x: f64) -> Result<(), Failure> {
    let (result, tag) = prox_semiconvex(spec, alpha, beta, x);
    let record = serde_json::json!({
        "x": x,
        "alpha": alpha,
        "beta": beta,
        "f": json_ext(spec.eval(x)),
        "env": json_real(moreau::env(spec, alpha, x)),
        "f_alpha": json_ext(moreau::eval_falpha(spec, alpha, x)),
        "prox_base": json_real(moreau::prox(spec, alpha, x)),
        "prox_semiconvex": {
            "lo": json_real(result.low()),
            "hi": json_real(result.high()),
            "set_valued": result.is_set_valued(),
            "kind": match result {
                ProxResult::Single(_) => "single",
                ProxResult::Pair(_, _) => "pair",
                ProxResult::Segment(_, _) => "segment",
            },
        },
        "case": tag.to_string(),
    });
    println!("{record}");
    Ok(())
}

struct GridRow {
    x: f64,
    f: ExtReal,
    env: f64,
    f_alpha: ExtReal,
    prox_base: f64,
    prox_semi: ProxResult,
    case: CaseTag,
}

/// Sampled rows of the penalty and its operators on a uniform grid with
/// strictly increasing `x`.
struct GridTable {
    rows: Vec<GridRow>,
}

impl GridTable {
    fn build(spec: &PenaltySpec, alpha: f64, beta: f64, lo: f64, hi: f64, n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let x = if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                };
                let (prox_semi, case) = prox_semiconvex(spec, alpha, beta, x);
                GridRow {
                    x,
                    f: spec.eval(x),
                    env: moreau::env(spec, alpha, x),
                    f_alpha: moreau::eval_falpha(spec, alpha, x),
                    prox_base: moreau::prox(spec, alpha, x),
                    prox_semi,
                    case,
                }
            })
            .collect();
        GridTable { rows }
    }

    fn to_csv(&self) -> String {
        let mut out =
            String::from("x,f,env,f_alpha,prox_base,prox_semi_lo,prox_semi_hi,set_valued,case\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_real(r.x),
                csv_ext(r.f),
                csv_real(r.env),
                csv_ext(r.f_alpha),
                csv_real(r.prox_base),
                csv_real(r.prox_semi.low()),
                csv_real(r.prox_semi.high()),
                r.prox_semi.is_set_valued(),
                r.case,
            ));
        }
        out
    }
}

/// Analytic kink positions of the prox map, used as mandatory check queries.
fn breakpoints(spec: &PenaltySpec, alpha: f64, beta: f64) -> Vec<f64> {
    let c = spec.coeffs();
    let (a1, a2, b1, b2) = (c.a1(), c.a2(), c.b1(), c.b2());
    let mut xs = vec![beta * b1, beta * b2, alpha * b1, alpha * b2];
    xs.push(alpha * b2 * (a2 * beta + 1.0));
    xs.push(alpha * b1 * (a1 * beta + 1.0));
    if b2 > 0.0 && alpha * b2 * (a2 * beta + 1.0) < beta * b2 {
        let d = alpha * a2 * (a2 * beta + 1.0) + 1.0;
        xs.push(alpha * a2 * beta * b2 / (alpha * a2 + 1.0)
            + b2 * (alpha * beta * d).sqrt() / (alpha * a2 + 1.0));
    }
    if b1 < 0.0 && alpha * (-b1) * (a1 * beta + 1.0) < beta * (-b1) {
        let d = alpha * a1 * (a1 * beta + 1.0) + 1.0;
        xs.push(-(alpha * a1 * beta * (-b1) / (alpha * a1 + 1.0)
            + (-b1) * (alpha * beta * d).sqrt() / (alpha * a1 + 1.0)));
    }
    if let Some(interval) = spec.constraint() {
        for b in [interval.lo(), interval.hi()] {
            if b.is_finite() {
                xs.push(b);
            }
        }
    }
    xs
}

fn cmd_check(
    spec: &PenaltySpec,
    alpha: f64,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = breakpoints(spec, alpha, beta);
    let n_breakpoints = xs.len();
    let radius = 2.0 * xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(alpha).max(beta) + 1.0;
    for _ in 0..samples {
        xs.push(rng.random_range(-radius..radius));
    }

    let mut max_dev: f64 = 0.0;
    let mut worst_x = 0.0;
    for &x in &xs {
        let (result, _) = prox_semiconvex(spec, alpha, beta, x);
        let g = |u: f64| moreau::eval_falpha(spec, alpha, u);
        let span = 2.0 * x.abs() + 2.0;
        let n = ((span / 0.008).ceil() as usize).clamp(2001, 40_001);
        let grid = GridSpec::new(x - x.abs() - 1.0, x + x.abs() + 1.0, n, 3, 1e-9)
            .expect("query window is a valid grid");
        let pts = oracle::grid_prox(g, beta, x, &grid)
            .expect("penalty domain contains the origin");
        let min = oracle::grid_env(g, beta, x, &grid).expect("same window as grid_prox");
        let objective =
            |u: f64| g(u).unwrap_finite() + (u - x) * (u - x) / (2.0 * beta);
        let dev = oracle::prox_deviation(&result, &pts, objective, min, grid.tol);
        if dev > max_dev {
            max_dev = dev;
            worst_x = x;
        }
    }

    let pass = max_dev <= 1e-6;
    println!(
        "checked {} queries ({} sampled + {} breakpoints): max deviation {:.3e}: {}",
        xs.len(),
        samples,
        n_breakpoints,
        max_dev,
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: format!("closed form deviates from the oracle by {max_dev:.3e} at x = {worst_x}"),
        })
    }
}

fn read_matrix(path: &Path) -> Result<Array2<f64>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let row: Result<Vec<f64>, _> = record
            .iter()
            .map(|field| field.trim().parse::<f64>())
            .collect();
        let row = row.map_err(|e| {
            Failure::input(format!("{}: non-numeric field: {e}", path.display()))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Failure::input(format!(
                    "{}: ragged rows ({} vs {} columns)",
                    path.display(),
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::input(format!("{}: no data rows", path.display())));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect())
        .expect("dimensions checked above"))
}

fn read_vector(path: &Path) -> Result<Array1<f64>, Failure> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Failure::input(format!(
            "{}: expected a single column, found {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok(m.column(0).to_owned())
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    design_path: &Path,
    response_path: &Path,
    spec: PenaltySpec,
    alpha: f64,
    beta: f64,
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(), Failure> {
    let design = read_matrix(design_path)?;
    let response = read_vector(response_path)?;
    let problem = RegressionProblem::new(
        design,
        response,
        PenaltyAssignment::Shared(spec),
        alpha,
        lambda,
    )
    .map_err(map_solve_error)?;
    let config = SolveConfig {
        beta,
        max_iter,
        rel_tol: tol,
    };
    let report = solve(&problem, &config).map_err(map_solve_error)?;
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serialization cannot fail")
    );
    Ok(())
}

fn map_solve_error(e: SolveError) -> Failure {
    let code = match e {
        SolveError::Shape(_) => EXIT_INPUT_INVALID,
        SolveError::StepTooLarge(_) => EXIT_PRECONDITION,
        SolveError::Invalid(_) | SolveError::NonFiniteIterate(_) => EXIT_NUMERIC_RANGE,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}
