//! Command-line front end: ingest matrix sets, run bounds, print tables,
//! emit JSON reports, export SDP instances, and re-verify certificates.
//!
//! Exit codes: 0 success, 1 certificate verification failure, 2 unreadable
//! or invalid input (parse errors, schema violations, exceeded caps, bad
//! flags), 3 numerical failure inside a solve.

use crate::bounds::{
    self, BoundMethod, BoundOptions, BoundReport, BoundsError, Certificate, MatrixSet,
};
use crate::input::{self, InputDocument, InputFormat};
use crate::linalg::DenseMatrix;
use crate::lyapunov::{self, LyapunovError, SosCertificate};
use crate::sdp;
use crate::symalg::{enumerate_basis, induced_matrix};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "jsrkit",
    version,
    about = "Certified upper and lower bounds on the joint spectral radius of a matrix set"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Txt,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => InputFormat::Json,
            FormatArg::Txt => InputFormat::Txt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    All,
    Lower,
    Sos,
    Cq,
    Sr,
}

#[derive(Subcommand)]
enum Command {
    /// Compute bounds on the joint spectral radius of the input set.
    Bounds {
        /// Path to the matrix-set file.
        input: PathBuf,
        /// Input encoding.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Even polynomial degree 2d used by the sos, cq and sr methods.
        #[arg(long, default_value_t = 2)]
        degree: usize,
        /// Which bound(s) to compute.
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Relative bisection tolerance for the sos and cq methods.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Longest product length scanned by the lower-bound method.
        #[arg(long, default_value_t = 2)]
        max_product_length: usize,
        /// Emit the machine-readable JSON report instead of the table.
        #[arg(long)]
        json: bool,
        /// Write the SOS certificate found at the certified rate to a file.
        #[arg(long)]
        certificate_out: Option<PathBuf>,
    },
    /// Print one input matrix lifted to a symmetric-algebra power.
    Lift {
        /// Path to the matrix-set file.
        input: PathBuf,
        /// Input encoding.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Lift degree d (any positive integer).
        #[arg(long, default_value_t = 2)]
        degree: usize,
        /// 1-based index of the matrix to lift.
        #[arg(long, default_value_t = 1)]
        index: usize,
    },
    /// Print the size table of the three lifting procedures.
    Sizes {
        /// Matrix dimension n.
        #[arg(long)]
        n: usize,
        /// Number of degree doublings (rows 2d = 2, 4, ..., 2^steps).
        #[arg(long, default_value_t = 5)]
        steps: usize,
        /// Number of matrices, for the accuracy column m^(-1/2d).
        #[arg(long, default_value_t = 2)]
        m: usize,
    },
    /// Export the degree-2d SOS feasibility program at a fixed rate gamma
    /// in SDPA sparse format.
    ExportSdpa {
        /// Path to the matrix-set file.
        input: PathBuf,
        /// Output path for the .dat-s file.
        out: PathBuf,
        /// Input encoding.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Even polynomial degree 2d.
        #[arg(long, default_value_t = 2)]
        degree: usize,
        /// Contraction rate gamma being probed.
        #[arg(long)]
        gamma: f64,
    },
    /// Re-verify a stored SOS certificate against the input set.
    Certify {
        /// Path to the matrix-set file.
        input: PathBuf,
        /// Input encoding.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Path to the certificate JSON.
        #[arg(long)]
        poly: PathBuf,
        /// Require the certificate to prove decay at most this rate.
        #[arg(long)]
        gamma: Option<f64>,
    },
}

/// One computed bound together with how long it took.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub wall_ms: u64,
    #[serde(flatten)]
    pub report: BoundReport,
}

/// The machine-readable result of a `bounds` run. Deterministic for a fixed
/// input file and flag set, except for the wall_ms timing fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    /// SHA-256 of the raw input file bytes, hex-encoded.
    pub input_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_name: Option<String>,
    pub degree: usize,
    pub bisection_tol: f64,
    pub eps_feas: f64,
    pub max_product_length: usize,
    pub results: Vec<MethodResult>,
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

/// Parses argv and runs the selected command, returning the process exit
/// code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bounds {
            input,
            format,
            degree,
            method,
            tol,
            max_product_length,
            json,
            certificate_out,
        } => cmd_bounds(
            &input,
            format.into(),
            degree,
            method,
            tol,
            max_product_length,
            json,
            certificate_out.as_deref(),
        ),
        Command::Lift { input, format, degree, index } => {
            cmd_lift(&input, format.into(), degree, index)
        }
        Command::Sizes { n, steps, m } => cmd_sizes(n, steps, m),
        Command::ExportSdpa { input, out, format, degree, gamma } => {
            cmd_export_sdpa(&input, format.into(), degree, gamma, &out)
        }
        Command::Certify { input, format, poly, gamma } => {
            cmd_certify(&input, format.into(), &poly, gamma)
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

fn load_input(
    path: &std::path::Path,
    format: InputFormat,
) -> Result<(InputDocument, MatrixSet, String), Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| fail(2, format!("cannot read {}: {e}", path.display())))?;
    let digest = format!("{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|_| fail(2, format!("{} is not valid UTF-8", path.display())))?;
    let doc = match format {
        InputFormat::Json => input::parse_json(&text),
        InputFormat::Txt => input::parse_txt(&text),
    }
    .map_err(|e| fail(2, e.to_string()))?;
    let set = doc.to_matrix_set().map_err(|e| fail(2, e.to_string()))?;
    Ok((doc, set, digest))
}

fn bounds_exit_code(e: &BoundsError) -> i32 {
    match e {
        BoundsError::InvalidArgument(_)
        | BoundsError::DimensionCapExceeded { .. }
        | BoundsError::WordCapExceeded { .. }
        | BoundsError::Symalg(_) => 2,
        _ => 3,
    }
}

fn eps_feas_from_env() -> Result<f64, Failure> {
    let raw = match std::env::var("JSRKIT_EPS_FEAS") {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return Ok(1e-8),
        Err(e) => return Err(fail(2, format!("JSRKIT_EPS_FEAS is unreadable: {e}"))),
    };
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| fail(2, format!("JSRKIT_EPS_FEAS must be a number, got '{raw}'")))?;
    if !(value > 0.0 && value < 1.0) {
        return Err(fail(2, format!("JSRKIT_EPS_FEAS must lie in (0, 1), got {value}")));
    }
    Ok(value)
}

fn run_method(
    method: BoundMethod,
    set: &MatrixSet,
    two_d: usize,
    k_max: usize,
    opts: &BoundOptions,
) -> Result<MethodResult, BoundsError> {
    let start = Instant::now();
    let report = match method {
        BoundMethod::LowerProducts => {
            let (value, word) = bounds::lower_bound_products(set, k_max, opts)?;
            BoundReport {
                method: BoundMethod::LowerProducts,
                two_d: None,
                value,
                bracket: None,
                quality_factor: None,
                bisection_tol: None,
                eps_feas: None,
                certificate: Some(Certificate::ProductWord { word, value }),
            }
        }
        BoundMethod::Sos => bounds::rho_sos(set, two_d, opts)?,
        BoundMethod::Cq => bounds::rho_cq(set, two_d, opts)?,
        BoundMethod::Sr => {
            let value = bounds::rho_sr(set, two_d, opts)?;
            BoundReport {
                method: BoundMethod::Sr,
                two_d: Some(two_d),
                value,
                bracket: None,
                quality_factor: None,
                bisection_tol: None,
                eps_feas: None,
                certificate: None,
            }
        }
    };
    Ok(MethodResult { wall_ms: start.elapsed().as_millis() as u64, report })
}

#[allow(clippy::too_many_arguments)]
fn cmd_bounds(
    input: &std::path::Path,
    format: InputFormat,
    degree: usize,
    method: MethodArg,
    tol: f64,
    max_product_length: usize,
    json: bool,
    certificate_out: Option<&std::path::Path>,
) -> Result<(), Failure> {
    if degree == 0 || !degree.is_multiple_of(2) {
        return Err(fail(2, format!("--degree must be a positive even integer, got {degree}")));
    }
    if max_product_length == 0 {
        return Err(fail(2, "--max-product-length must be at least 1"));
    }
    // Fixed evaluation and display order.
    let selected: Vec<BoundMethod> = match method {
        MethodArg::All => {
            vec![BoundMethod::LowerProducts, BoundMethod::Sos, BoundMethod::Cq, BoundMethod::Sr]
        }
        MethodArg::Lower => vec![BoundMethod::LowerProducts],
        MethodArg::Sos => vec![BoundMethod::Sos],
        MethodArg::Cq => vec![BoundMethod::Cq],
        MethodArg::Sr => vec![BoundMethod::Sr],
    };
    if certificate_out.is_some() && !selected.contains(&BoundMethod::Sos) {
        return Err(fail(2, "--certificate-out requires the sos method (--method sos or all)"));
    }

    let eps_feas = eps_feas_from_env()?;
    let (doc, set, digest) = load_input(input, format)?;
    let opts = BoundOptions { bisection_tol: tol, eps_feas, ..BoundOptions::default() };

    // The selected methods are independent; run them concurrently and
    // reassemble in the fixed order.
    let outcomes: Vec<Result<MethodResult, BoundsError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = selected
            .iter()
            .map(|&m| {
                let set = &set;
                let opts = &opts;
                scope.spawn(move || run_method(m, set, degree, max_product_length, opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bound worker panicked")).collect()
    });

    let mut results = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => return Err(fail(bounds_exit_code(&e), e.to_string())),
        }
    }

    if let Some(path) = certificate_out {
        let cert = results
            .iter()
            .find_map(|r| match &r.report.certificate {
                Some(Certificate::Sos(c)) => Some(c),
                _ => None,
            })
            .ok_or_else(|| fail(3, "the sos run produced no certificate (trivial zero bound)"))?;
        let text = serde_json::to_string_pretty(cert).expect("certificate serializes");
        std::fs::write(path, text + "\n")
            .map_err(|e| fail(2, format!("cannot write {}: {e}", path.display())))?;
    }

    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest: digest,
        input_name: doc.name.clone(),
        degree,
        bisection_tol: tol,
        eps_feas,
        max_product_length,
        results,
    };

    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print_bounds_table(&set, &report);
    }
    Ok(())
}

fn print_bounds_table(set: &MatrixSet, report: &RunReport) {
    match set.name() {
        Some(name) => println!("{name}: {n}x{n}, {m} matrices", n = set.n(), m = set.len()),
        None => println!("{n}x{n}, {m} matrices", n = set.n(), m = set.len()),
    }
    let headers = ["method", "degree", "value", "quality", "time"];
    let mut rows = Vec::new();
    for result in &report.results {
        let r = &result.report;
        let method = match r.method {
            BoundMethod::LowerProducts => "lower",
            BoundMethod::Sos => "sos",
            BoundMethod::Cq => "cq",
            BoundMethod::Sr => "sr",
        };
        rows.push(vec![
            method.to_string(),
            r.two_d.map_or_else(|| "-".to_string(), |d| d.to_string()),
            sig6(r.value),
            r.quality_factor.map_or_else(|| "-".to_string(), trunc3),
            format!("{} ms", result.wall_ms),
        ]);
    }
    print!("{}", render_table(&headers, &rows));
    for result in &report.results {
        if let Some(Certificate::ProductWord { word, .. }) = &result.report.certificate {
            let word: Vec<String> = word.iter().map(|w| w.to_string()).collect();
            println!("lower-bound witness word: {}", word.join(" "));
        }
    }
}

fn cmd_lift(
    input: &std::path::Path,
    format: InputFormat,
    degree: usize,
    index: usize,
) -> Result<(), Failure> {
    if degree == 0 {
        return Err(fail(2, "--degree must be at least 1"));
    }
    let (_, set, _) = load_input(input, format)?;
    if index == 0 || index > set.len() {
        return Err(fail(2, format!("--index must lie in 1..={}, got {index}", set.len())));
    }
    let basis = enumerate_basis(set.n(), degree).map_err(|e| fail(2, e.to_string()))?;
    let lifted =
        induced_matrix(set.matrix(index - 1), &basis).map_err(|e| fail(2, e.to_string()))?;
    println!("basis of degree {degree} in {} variables:", set.n());
    for (i, exps) in basis.exponents().iter().enumerate() {
        let parts: Vec<String> = exps.iter().map(|e| e.to_string()).collect();
        println!("  {i}: ({})", parts.join(", "));
    }
    println!("matrix {index} lifted to degree {degree} ({n}x{n}):", n = basis.len());
    print!("{}", render_matrix(&lifted));
    Ok(())
}

fn cmd_sizes(n: usize, steps: usize, m: usize) -> Result<(), Failure> {
    if n == 0 || steps == 0 || m == 0 {
        return Err(fail(2, "--n, --steps and --m must all be at least 1"));
    }
    let rows = bounds::lifting_size_table(n, steps).map_err(|e| fail(2, e.to_string()))?;
    let headers = ["step/2d", "kron", "semidef", "symalg", "accuracy"];
    let table: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let accuracy = (m as f64).powf(-1.0 / row.two_d as f64);
            vec![
                format!("{}/{}", i + 1, row.two_d),
                row.kron.to_string(),
                row.semidef.to_string(),
                row.symalg.to_string(),
                trunc3(accuracy),
            ]
        })
        .collect();
    print!("{}", render_table(&headers, &table));
    Ok(())
}

fn cmd_export_sdpa(
    input: &std::path::Path,
    format: InputFormat,
    degree: usize,
    gamma: f64,
    out: &std::path::Path,
) -> Result<(), Failure> {
    if degree == 0 || !degree.is_multiple_of(2) {
        return Err(fail(2, format!("--degree must be a positive even integer, got {degree}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(fail(2, format!("--gamma must be a positive number, got {gamma}")));
    }
    let (_, set, _) = load_input(input, format)?;
    let prog = bounds::build_sos_feasibility(&set, degree, gamma)
        .map_err(|e| fail(bounds_exit_code(&e), e.to_string()))?;
    let text = sdp::export_sdpa(&prog);
    std::fs::write(out, text)
        .map_err(|e| fail(2, format!("cannot write {}: {e}", out.display())))?;
    println!(
        "wrote {} constraints over {} blocks of size {} to {}",
        prog.constraints.len(),
        prog.block_sizes.len(),
        prog.block_sizes[0],
        out.display()
    );
    Ok(())
}

const CERT_COEFF_TOL: f64 = 1e-6;
const CERT_EIG_TOL: f64 = 1e-6;

fn cmd_certify(
    input: &std::path::Path,
    format: InputFormat,
    poly: &std::path::Path,
    gamma: Option<f64>,
) -> Result<(), Failure> {
    let (_, set, _) = load_input(input, format)?;
    let text = std::fs::read_to_string(poly)
        .map_err(|e| fail(2, format!("cannot read {}: {e}", poly.display())))?;
    let cert: SosCertificate =
        serde_json::from_str(&text).map_err(|e| fail(2, format!("malformed certificate: {e}")))?;
    if let Some(g) = gamma {
        if !(g.is_finite() && g > 0.0) {
            return Err(fail(2, format!("--gamma must be a positive number, got {g}")));
        }
        // A certificate at a smaller rate also proves the larger one, so
        // only an excessive stored rate fails the request.
        if cert.gamma > g * (1.0 + 1e-9) {
            return Err(fail(
                1,
                format!("certificate proves rate {}, larger than the requested {g}", cert.gamma),
            ));
        }
    }
    let report = match lyapunov::verify_certificate(&set, &cert, CERT_COEFF_TOL, CERT_EIG_TOL) {
        Ok(report) => report,
        Err(LyapunovError::InvalidArgument(msg)) => {
            return Err(fail(1, format!("certificate does not match the input set: {msg}")))
        }
        Err(e) => return Err(fail(3, e.to_string())),
    };
    let headers = ["block", "coeff residual", "min eigenvalue"];
    let mut rows = Vec::new();
    for (i, block) in report.blocks.iter().enumerate() {
        let label = if i == 0 { "p".to_string() } else { format!("constraint {i}") };
        rows.push(vec![
            label,
            format!("{:.3e}", block.coeff_residual),
            format!("{:.3e}", block.min_eigenvalue),
        ]);
    }
    print!("{}", render_table(&headers, &rows));
    if report.ok {
        println!("certificate verified: rate {} at degree {}", sig6(cert.gamma), 2 * cert.d);
        Ok(())
    } else {
        Err(fail(
            1,
            format!(
                "certificate verification failed (max coeff residual {:.3e}, min Gram eigenvalue {:.3e})",
                report.max_coeff_residual, report.min_gram_eigenvalue
            ),
        ))
    }
}

/// Formats a value with 6 significant digits, switching to scientific
/// notation outside a comfortable magnitude window.
fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.5e}")
    }
}

/// Formats a value truncated (not rounded) to three decimals, matching the
/// usual presentation of accuracy factors.
fn trunc3(v: f64) -> String {
    format!("{:.3}", (v * 1000.0).floor() / 1000.0)
}

fn render_matrix(m: &DenseMatrix) -> String {
    let cells: Vec<Vec<String>> =
        (0..m.rows()).map(|i| (0..m.cols()).map(|j| sig6(m.get(i, j))).collect()).collect();
    let mut widths = vec![0usize; m.cols()];
    for row in &cells {
        for (j, cell) in row.iter().enumerate() {
            widths[j] = widths[j].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &cells {
        out.push_str("  [");
        for (j, cell) in row.iter().enumerate() {
            if j > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{cell:>w$}", w = widths[j]));
        }
        out.push_str("]\n");
    }
    out
}

fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |cells: &[String], out: &mut String| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<w$}", w = widths[i]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    render_row(&header_cells, &mut out);
    for row in rows {
        render_row(row, &mut out);
    }
    out
}
