use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use wigner_gup::{
    build_moment_matrix, check_psd, gaussian_moments, hankel_matrix, hankel_min_eigenvalue,
    moments_from_fock_dm, moments_from_grid, transform_moments, validate_table, weyl_product,
    FockDensityMatrix, GaussianState, GridOptions, HalfInt, MomentTable, SymplecticMap,
    WeylPolynomial, WignerGrid, DEFAULT_PSD_TOL,
};

/// Moment matrices of Wigner distributions and the generalized uncertainty
/// principle. Every command prints a single JSON document.
#[derive(Parser, Debug)]
#[command(name = "wigner-gup", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Reduced Planck constant. Files carrying a different value are rejected.
    #[arg(long, global = true)]
    hbar: Option<f64>,
    /// Relative PSD tolerance.
    #[arg(long, global = true, default_value_t = DEFAULT_PSD_TOL)]
    tol: f64,
    /// Promote warnings (support-limited grids, table validation) to errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Write the JSON result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a moment table for a state.
    Moments {
        /// vacuum | fock:<n> | gaussian:<muq,mup,vqq,vqp,vpp> | dm:<file> | grid:<file>
        #[arg(long)]
        state: String,
        /// Highest total degree (even).
        #[arg(long)]
        order: u32,
    },
    /// Check M_J >= 0 for a moment table.
    Check {
        #[arg(long)]
        table: PathBuf,
        /// Half-integer order, e.g. 3/2 or 1.
        #[arg(long = "J", value_parser = parse_half)]
        j: HalfInt,
        /// Include every Schur residual matrix in the report.
        #[arg(long)]
        schur: bool,
    },
    /// Apply a symplectic map [[a, b], [c, d]] to a moment table.
    Transform {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, num_args = 4, value_names = ["A", "B", "C", "D"], allow_negative_numbers = true)]
        matrix: Vec<f64>,
    },
    /// Expand the product of two Weyl-ordered monomials.
    Product {
        /// Exponents m,n of the left factor.
        #[arg(long, value_parser = parse_pair)]
        left: (u32, u32),
        #[arg(long, value_parser = parse_pair)]
        right: (u32, u32),
    },
    /// Hankel matrix of a classical moment sequence.
    Hankel {
        /// Comma-separated gamma_0, ..., gamma_2k.
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            required = true
        )]
        moments: Vec<f64>,
    },
}

fn parse_half(s: &str) -> Result<HalfInt, String> {
    s.parse().map_err(|e: wigner_gup::Error| e.to_string())
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (m, n) = s
        .split_once(',')
        .ok_or_else(|| format!("expected m,n, got {s:?}"))?;
    let num = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}"));
    Ok((num(m)?, num(n)?))
}

type Failure = Box<dyn std::error::Error>;

/// JSON result plus exit code.
struct Report {
    doc: Value,
    code: u8,
}

impl Report {
    fn ok(doc: Value) -> Self {
        Report { doc, code: 0 }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn check_hbar(file_hbar: Option<f64>, global: &Global) -> Result<f64, Failure> {
    match (file_hbar, global.hbar) {
        (Some(f), Some(g)) if f != g => Err(wigner_gup::Error::HbarMismatch(f, g).into()),
        (Some(f), _) => Ok(f),
        (None, g) => Ok(g.unwrap_or(1.0)),
    }
}

fn load_table(path: &Path, global: &Global) -> Result<MomentTable, Failure> {
    let table = MomentTable::from_json(&read(path)?)?;
    check_hbar(Some(table.hbar()), global)?;
    let report = validate_table(&table);
    for f in report.failures() {
        eprintln!("warning: {}: {}", f.name, f.detail);
    }
    if global.strict && !report.passed() {
        return Err("table validation failed".into());
    }
    Ok(table)
}

fn gaussian_from(params: &str) -> Result<GaussianState, Failure> {
    let v: Vec<f64> = params
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()?;
    let [muq, mup, vqq, vqp, vpp] = v[..] else {
        return Err(format!("gaussian needs 5 numbers, got {}", v.len()).into());
    };
    Ok(GaussianState::new([muq, mup], [[vqq, vqp], [vqp, vpp]])?)
}

fn moments(state: &str, order: u32, global: &Global) -> Result<Report, Failure> {
    let (kind, arg) = state.split_once(':').unwrap_or((state, ""));
    let table = match kind {
        "vacuum" => {
            let hbar = check_hbar(None, global)?;
            gaussian_moments(&GaussianState::vacuum(hbar), order, hbar)?
        }
        "fock" => {
            let hbar = check_hbar(None, global)?;
            let n: usize = arg
                .parse()
                .map_err(|e| format!("fock level {arg:?}: {e}"))?;
            moments_from_fock_dm(&FockDensityMatrix::fock(n, n + 1)?, order, hbar)?
        }
        "gaussian" => {
            let hbar = check_hbar(None, global)?;
            let g = gaussian_from(arg)?;
            if !g.is_physical(hbar) {
                eprintln!("warning: det V = {} is below hbar^2/4", g.det());
            }
            gaussian_moments(&g, order, hbar)?
        }
        "dm" => {
            let (rho, file_hbar) = FockDensityMatrix::from_json(&read(Path::new(arg))?)?;
            moments_from_fock_dm(&rho, order, check_hbar(file_hbar, global)?)?
        }
        "grid" => {
            let grid = WignerGrid::from_json(&read(Path::new(arg))?)?;
            let hbar = check_hbar(grid.hbar, global)?;
            let out = moments_from_grid(
                &grid,
                order,
                GridOptions {
                    strict: global.strict,
                    hbar,
                    ..GridOptions::default()
                },
            )?;
            eprintln!("raw normalization {}", out.raw_normalization);
            if !out.support_limited.is_empty() {
                let list: Vec<String> = out.support_limited.iter().map(|i| i.to_string()).collect();
                eprintln!("warning: support-limited moments: {}", list.join(" "));
            }
            out.table
        }
        _ => return Err(format!("unknown state {state:?}").into()),
    };
    Ok(Report::ok(table.to_json_value()))
}

fn check(table: &Path, j: HalfInt, schur: bool, global: &Global) -> Result<Report, Failure> {
    let table = load_table(table, global)?;
    let report = check_psd(&build_moment_matrix(&table, j)?, global.tol)?;
    if let Some(f) = report.first_failing_condition() {
        eprintln!(
            "level {} fails: min eigenvalue {}",
            f.level, f.min_eigenvalue
        );
    }
    let code = if report.verdict.passed() { 0 } else { 2 };
    Ok(Report {
        doc: report.to_json_value(schur),
        code,
    })
}

fn transform(table: &Path, m: &[f64], global: &Global) -> Result<Report, Failure> {
    let table = load_table(table, global)?;
    let s = SymplecticMap::new(m[0], m[1], m[2], m[3])?;
    Ok(Report::ok(transform_moments(&table, &s)?.to_json_value()))
}

fn product(left: (u32, u32), right: (u32, u32), global: &Global) -> Result<Report, Failure> {
    let hbar = check_hbar(None, global)?;
    let a = WeylPolynomial::monomial(left.0, left.1, hbar);
    let b = WeylPolynomial::monomial(right.0, right.1, hbar);
    let p = weyl_product(&a, &b)?;
    let terms: Vec<Value> = p
        .terms()
        .map(|(idx, z)| json!({ "m": idx.m, "n": idx.n, "re": z.re, "im": z.im }))
        .collect();
    Ok(Report::ok(json!({
        "hbar": hbar,
        "left": [left.0, left.1],
        "right": [right.0, right.1],
        "text": p.to_string(),
        "terms": terms,
    })))
}

fn hankel(gamma: &[f64]) -> Result<Report, Failure> {
    let h = hankel_matrix(gamma)?;
    let min = hankel_min_eigenvalue(gamma)?;
    let rows: Vec<Vec<f64>> = h.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(Report::ok(
        json!({ "matrix": rows, "min_eigenvalue": min, "psd": min >= 0.0 }),
    ))
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    let g = &cli.global;
    if let Some(h) = g.hbar {
        if !(h.is_finite() && h > 0.0) {
            return Err(wigner_gup::Error::InvalidHbar(h).into());
        }
    }
    match &cli.command {
        Command::Moments { state, order } => moments(state, *order, g),
        Command::Check { table, j, schur } => check(table, *j, *schur, g),
        Command::Transform { table, matrix } => transform(table, matrix, g),
        Command::Product { left, right } => product(*left, *right, g),
        Command::Hankel { moments } => hankel(moments),
    }
}

fn emit(doc: &Value, output: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc)?;
    match output {
        Some(path) => {
            fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()).into())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // usage errors are input errors; exit code 2 is reserved for failed checks
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = run(&cli).and_then(|r| emit(&r.doc, cli.global.output.as_deref()).map(|_| r.code));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
