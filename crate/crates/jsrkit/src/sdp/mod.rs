//! Semidefinite feasibility solving over block-diagonal matrix variables.
//!
//! A program asks for block-diagonal X = (X_1, ..., X_B) with
//! <A_k, X> = b_k for every constraint k and every block positive
//! semidefinite. Feasibility is decided through a margin maximization: the
//! solver maximizes t such that X - tI is admissible, so a positive optimal
//! margin certifies strict feasibility and a clearly negative one proves that
//! no semidefinite solution exists.

mod ipm;
mod sdpa;

pub use sdpa::{export_sdpa, parse_sdpa};

use crate::linalg::{self, DenseMatrix, LinalgError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One linear constraint <A, X> = rhs, with one coefficient matrix per block.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<DenseMatrix>,
    pub rhs: f64,
}

/// min <C, X> subject to <A_k, X> = b_k and X block-wise PSD. The objective
/// is carried for export and reporting; `solve_feasibility` ignores it and
/// maximizes the feasibility margin instead.
#[derive(Debug, Clone)]
pub struct LinearMatrixProgram {
    pub block_sizes: Vec<usize>,
    pub objective: Vec<DenseMatrix>,
    pub constraints: Vec<Constraint>,
}

impl LinearMatrixProgram {
    /// A program with a zero objective.
    pub fn feasibility(block_sizes: Vec<usize>, constraints: Vec<Constraint>) -> Self {
        let objective = block_sizes.iter().map(|&s| DenseMatrix::zeros(s, s)).collect();
        LinearMatrixProgram { block_sizes, objective, constraints }
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.block_sizes.is_empty() {
            return Err(SdpError::Malformed("no blocks".into()));
        }
        if self.block_sizes.contains(&0) {
            return Err(SdpError::Malformed("zero-sized block".into()));
        }
        if self.constraints.is_empty() {
            return Err(SdpError::Malformed("no constraints".into()));
        }
        check_block_list(&self.objective, &self.block_sizes, "objective")?;
        for (k, c) in self.constraints.iter().enumerate() {
            check_block_list(&c.coeffs, &self.block_sizes, &format!("constraint {k}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("constraint {k}: rhs not finite")));
            }
            if c.coeffs.iter().all(|m| m.max_abs() == 0.0) {
                return Err(SdpError::Malformed(format!(
                    "constraint {k}: all coefficient blocks are zero"
                )));
            }
        }
        Ok(())
    }
}

fn check_block_list(blocks: &[DenseMatrix], sizes: &[usize], what: &str) -> Result<(), SdpError> {
    if blocks.len() != sizes.len() {
        return Err(SdpError::Malformed(format!(
            "{what}: {} blocks, program has {}",
            blocks.len(),
            sizes.len()
        )));
    }
    for (b, (m, &s)) in blocks.iter().zip(sizes).enumerate() {
        if m.rows() != s || m.cols() != s {
            return Err(SdpError::Malformed(format!(
                "{what}: block {b} is {}x{}, expected {s}x{s}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(SdpError::Malformed(format!("{what}: block {b} has non-finite entries")));
        }
        if m.max_asymmetry() > 1e-12 * (1.0 + m.max_abs()) {
            return Err(SdpError::Malformed(format!("{what}: block {b} is not symmetric")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// A solution with margin >= -eps_feas was found.
    Feasible,
    /// The optimal margin is provably below -eps_feas: no PSD solution.
    Infeasible,
    /// The interior-point iteration could not classify the program.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Candidate solution blocks (meaningful when status is Feasible; the
    /// best iterate otherwise, kept for diagnostics).
    pub blocks: Vec<DenseMatrix>,
    pub objective_value: f64,
    pub max_constraint_residual: f64,
    pub min_block_eigenvalue: f64,
    /// Optimal value of the margin maximization (how deep inside the cone a
    /// solution can sit; negative when constraints force eigenvalues below
    /// zero).
    pub phase1_margin: f64,
    pub iterations: usize,
}

/// Independently recomputed diagnostics for a candidate solution.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub objective_value: f64,
    pub max_constraint_residual: f64,
    pub min_block_eigenvalue: f64,
}

/// Recomputes residuals and eigenvalue bounds for `blocks` against `prog`
/// from scratch; shares no state with the solver.
pub fn check_solution(
    prog: &LinearMatrixProgram,
    blocks: &[DenseMatrix],
) -> Result<CheckReport, SdpError> {
    prog.validate()?;
    check_block_list(blocks, &prog.block_sizes, "candidate")?;
    let objective_value = dot_blocks(&prog.objective, blocks);
    let mut worst = 0.0f64;
    for c in &prog.constraints {
        let v = dot_blocks(&c.coeffs, blocks);
        worst = worst.max((v - c.rhs).abs());
    }
    let mut min_eig = f64::INFINITY;
    for b in blocks {
        min_eig = min_eig.min(linalg::min_eig_symmetric(b)?);
    }
    Ok(CheckReport {
        objective_value,
        max_constraint_residual: worst,
        min_block_eigenvalue: min_eig,
    })
}

fn dot_blocks(a: &[DenseMatrix], b: &[DenseMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

// The margin split t = t+ - t- uses slightly asymmetric objective weights;
// an exact split would leave the auxiliary problem's dual without interior
// points and the iteration would crawl.
const MARGIN_SKEW: f64 = 1e-7;

/// Decides feasibility of `prog` (its objective is ignored) by maximizing the
/// margin t such that some X with <A_k, X> = b_k satisfies X >= tI on every
/// block. `eps_feas` separates the verdicts: margins >= -eps_feas count as
/// feasible, margins < -eps_feas as infeasible, anything the iteration cannot
/// resolve as a numerical failure.
pub fn solve_feasibility(
    prog: &LinearMatrixProgram,
    eps_feas: f64,
) -> Result<SdpSolution, SdpError> {
    if !(eps_feas > 0.0 && eps_feas < 1.0) {
        return Err(SdpError::Malformed(format!("eps_feas must lie in (0, 1), got {eps_feas}")));
    }
    prog.validate()?;

    let aux = margin_program(prog);
    let opts =
        ipm::IpmOptions { gap_tol: 1e-9, feas_tol: (eps_feas * 0.1).min(1e-9), max_iter: 200 };
    let out = ipm::minimize(&aux, &opts)?;

    let nb = prog.block_sizes.len();
    let t_plus = out.x[nb].get(0, 0);
    let t_minus = out.x[nb + 1].get(0, 0);
    let margin = t_plus - t_minus;

    // Reassemble X = Y + tI and measure it against the original program.
    let blocks: Vec<DenseMatrix> = out.x[..nb]
        .iter()
        .map(|y| {
            let mut x = y.clone();
            for i in 0..x.rows() {
                x.add_to(i, i, margin);
            }
            x.symmetrize()
        })
        .collect();

    let objective_value = dot_blocks(&prog.objective, &blocks);
    let mut residual = 0.0f64;
    for c in &prog.constraints {
        residual = residual.max((dot_blocks(&c.coeffs, &blocks) - c.rhs).abs());
    }
    let mut min_eig = f64::INFINITY;
    for b in &blocks {
        min_eig = min_eig.min(linalg::min_eig_symmetric(b)?);
    }

    let b_scale = 1.0 + prog.constraints.iter().fold(0.0f64, |m, c| m.max(c.rhs.abs()));
    let residual_ok = residual <= eps_feas * b_scale;

    let status = if out.converged && residual_ok && margin >= -eps_feas {
        SolveStatus::Feasible
    } else if out.converged && margin < -eps_feas {
        SolveStatus::Infeasible
    } else {
        SolveStatus::NumericalFailure
    };

    Ok(SdpSolution {
        status,
        blocks,
        objective_value,
        max_constraint_residual: residual,
        min_block_eigenvalue: min_eig,
        phase1_margin: margin,
        iterations: out.iterations,
    })
}

// Builds min -(1-skew) t+ + (1+skew) t- over (Y, t+, t-) with
// <A_k, Y> + (t+ - t-) tr(A_k) = b_k, which maximizes the margin t of
// X = Y + tI while keeping both auxiliary scalars in the cone.
fn margin_program(prog: &LinearMatrixProgram) -> LinearMatrixProgram {
    let mut block_sizes = prog.block_sizes.clone();
    block_sizes.push(1);
    block_sizes.push(1);

    let mut objective: Vec<DenseMatrix> =
        prog.block_sizes.iter().map(|&s| DenseMatrix::zeros(s, s)).collect();
    let mut plus = DenseMatrix::zeros(1, 1);
    plus.set(0, 0, -(1.0 - MARGIN_SKEW));
    let mut minus = DenseMatrix::zeros(1, 1);
    minus.set(0, 0, 1.0 + MARGIN_SKEW);
    objective.push(plus);
    objective.push(minus);

    let constraints = prog
        .constraints
        .iter()
        .map(|c| {
            let tau: f64 = c.coeffs.iter().map(|m| m.trace()).sum();
            let mut coeffs = c.coeffs.clone();
            let mut cp = DenseMatrix::zeros(1, 1);
            cp.set(0, 0, tau);
            let mut cm = DenseMatrix::zeros(1, 1);
            cm.set(0, 0, -tau);
            coeffs.push(cp);
            coeffs.push(cm);
            Constraint { coeffs, rhs: c.rhs }
        })
        .collect();

    LinearMatrixProgram { block_sizes, objective, constraints }
}
