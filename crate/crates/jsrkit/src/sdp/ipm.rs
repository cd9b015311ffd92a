//! Primal-dual interior-point iteration for block-diagonal semidefinite
//! programs, using Nesterov-Todd scaling and a predictor-corrector step.
//!
//! Solves min <C, X> s.t. <A_k, X> = b_k, X PSD, from an infeasible start.
//! Each iteration factors one Schur complement; the predictor and corrector
//! directions reuse that factorization.

// Like the linalg kernels, the solver indexes parallel arrays from one loop
// counter; iterator rewrites obscure the recurrences.
#![allow(clippy::needless_range_loop)]

use super::{LinearMatrixProgram, SdpError};
use crate::linalg::{self, DenseMatrix};

pub(crate) struct IpmOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

pub(crate) struct IpmResult {
    pub x: Vec<DenseMatrix>,
    #[allow(dead_code)]
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[allow(dead_code)]
    pub mu: f64,
    #[allow(dead_code)]
    pub primal_residual: f64,
    #[allow(dead_code)]
    pub dual_residual: f64,
}

const STALL_STEP: f64 = 1e-12;

pub(crate) fn minimize(
    prog: &LinearMatrixProgram,
    opts: &IpmOptions,
) -> Result<IpmResult, SdpError> {
    let sizes = &prog.block_sizes;
    let nb = sizes.len();
    let m = prog.constraints.len();
    let n_total: usize = sizes.iter().sum();

    // Blocks each constraint actually touches; the Schur assembly and the
    // operator applications skip the rest.
    let nz: Vec<Vec<usize>> = prog
        .constraints
        .iter()
        .map(|c| (0..nb).filter(|&b| c.coeffs[b].max_abs() > 0.0).collect::<Vec<usize>>())
        .collect();
    let mut rows_on_block: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (k, blocks) in nz.iter().enumerate() {
        for &b in blocks {
            rows_on_block[b].push(k);
        }
    }

    let b_vec: Vec<f64> = prog.constraints.iter().map(|c| c.rhs).collect();
    let b_inf = b_vec.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let c_inf = prog.objective.iter().fold(0.0f64, |acc, m| acc.max(m.max_abs()));
    let a_inf = prog
        .constraints
        .iter()
        .fold(0.0f64, |acc, c| acc.max(c.coeffs.iter().fold(0.0, |a, m| a.max(m.max_abs()))));

    // Infeasible start on the central ray, scaled to the data.
    let xi = (1.0 + b_inf / (1.0 + a_inf)).max(n_total as f64 / nb as f64).min(1e4);
    let eta = (1.0 + c_inf).min(1e4);
    let mut x: Vec<DenseMatrix> =
        sizes.iter().map(|&s| DenseMatrix::identity(s).scale(xi)).collect();
    let mut z: Vec<DenseMatrix> =
        sizes.iter().map(|&s| DenseMatrix::identity(s).scale(eta)).collect();
    let mut y = vec![0.0f64; m];

    let mut last = Diagnostics { mu: f64::INFINITY, rp: f64::INFINITY, rd: f64::INFINITY };
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;

        // Residuals and the duality measure.
        let ax = apply_operator(prog, &nz, &x);
        let rp: Vec<f64> = b_vec.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let aty = apply_adjoint(prog, &rows_on_block, &y);
        let rd: Vec<DenseMatrix> =
            (0..nb).map(|b| prog.objective[b].sub(&z[b]).sub(&aty[b])).collect();
        let mu = dot_all(&x, &z) / n_total as f64;
        let rp_inf = rp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rd_inf = rd.iter().fold(0.0f64, |a, m| a.max(m.max_abs()));
        last = Diagnostics { mu, rp: rp_inf, rd: rd_inf };

        if !mu.is_finite() || !rp_inf.is_finite() || !rd_inf.is_finite() {
            return Ok(outcome(x, y, iterations, false, last));
        }

        let pobj = dot_all(&prog.objective, &x);
        let dobj: f64 = y.iter().zip(&b_vec).map(|(a, b)| a * b).sum();
        let scale = 1.0 + pobj.abs() + dobj.abs();
        if rp_inf <= opts.feas_tol * (1.0 + b_inf)
            && rd_inf <= opts.feas_tol * (1.0 + c_inf)
            && mu * n_total as f64 <= opts.gap_tol * scale
        {
            return Ok(outcome(x, y, iterations, true, last));
        }

        // Nesterov-Todd scaling point per block: W Z W = X.
        let mut w = Vec::with_capacity(nb);
        let mut lx = Vec::with_capacity(nb);
        let mut zinv = Vec::with_capacity(nb);
        let mut lz = Vec::with_capacity(nb);
        for b in 0..nb {
            let lxb = match linalg::cholesky(&x[b]) {
                Some(l) => l,
                None => return Ok(outcome(x, y, iterations, false, last)),
            };
            let lzb = match linalg::cholesky(&z[b]) {
                Some(l) => l,
                None => return Ok(outcome(x, y, iterations, false, last)),
            };
            let inner = lxb.transpose().matmul(&z[b]).matmul(&lxb).symmetrize();
            let (vals, vecs) = linalg::symmetric_eigen(&inner)?;
            if vals.iter().any(|&v| v <= 0.0) {
                return Ok(outcome(x, y, iterations, false, last));
            }
            // G = inner^{-1/2}, W = Lx G Lx^T.
            let g = rebuild(&vecs, &vals.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
            let wb = lxb.matmul(&g).matmul(&lxb.transpose()).symmetrize();
            let zinv_b = inverse_from_cholesky(&lzb);
            w.push(wb);
            lx.push(lxb);
            zinv.push(zinv_b);
            lz.push(lzb);
        }

        // Schur complement S_kl = sum_b <A_k, W A_l W> over shared blocks.
        let mut schur = DenseMatrix::zeros(m, m);
        for b in 0..nb {
            let rows = &rows_on_block[b];
            for (pos, &l) in rows.iter().enumerate() {
                let t = w[b].matmul(&prog.constraints[l].coeffs[b]).matmul(&w[b]);
                for &k in rows.iter().take(pos + 1) {
                    let v = prog.constraints[k].coeffs[b].dot(&t);
                    schur.add_to(k.min(l), k.max(l), v);
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                let v = schur.get(j, i);
                schur.set(i, j, v);
            }
        }
        let factor = match factor_schur(&schur) {
            Some(f) => f,
            None => return Ok(outcome(x, y, iterations, false, last)),
        };

        // Shared right-hand-side pieces.
        let wrw: Vec<DenseMatrix> =
            (0..nb).map(|b| w[b].matmul(&rd[b]).matmul(&w[b]).symmetrize()).collect();
        let a_wrw = apply_operator(prog, &nz, &wrw);
        let a_zinv = apply_operator(prog, &nz, &zinv);

        // Predictor: aim at mu = 0 (Rc = -X), so the reduced right side is
        // rp - A(-X) + A(W Rd W) = b + A(W Rd W).
        let rhs_aff: Vec<f64> = (0..m).map(|k| b_vec[k] + a_wrw[k]).collect();
        let dy_aff = factor.solve(&rhs_aff);
        let dz_aff = dual_step(prog, &rows_on_block, &rd, &dy_aff);
        let dx_aff: Vec<DenseMatrix> = (0..nb)
            .map(|b| x[b].scale(-1.0).sub(&w[b].matmul(&dz_aff[b]).matmul(&w[b])).symmetrize())
            .collect();

        let ap_aff = max_step(&lx, &dx_aff)?.min(1.0);
        let ad_aff = max_step(&lz, &dz_aff)?.min(1.0);
        let mu_aff = {
            let mut acc = 0.0;
            for b in 0..nb {
                let xs = x[b].add(&dx_aff[b].scale(ap_aff));
                let zs = z[b].add(&dz_aff[b].scale(ad_aff));
                acc += xs.dot(&zs);
            }
            (acc / n_total as f64).max(0.0)
        };
        let sigma = (mu_aff / mu).powi(3).clamp(1e-6, 1.0);

        // Corrector: Rc = sigma mu Z^{-1} - X, reduced right side
        // b - sigma mu A(Z^{-1}) + A(W Rd W).
        let rhs: Vec<f64> = (0..m).map(|k| b_vec[k] - sigma * mu * a_zinv[k] + a_wrw[k]).collect();
        let dy = factor.solve(&rhs);
        let dz = dual_step(prog, &rows_on_block, &rd, &dy);
        let dx: Vec<DenseMatrix> = (0..nb)
            .map(|b| {
                zinv[b]
                    .scale(sigma * mu)
                    .sub(&x[b])
                    .sub(&w[b].matmul(&dz[b]).matmul(&w[b]))
                    .symmetrize()
            })
            .collect();

        let tau = if iter < 10 {
            0.95
        } else if iter < 30 {
            0.98
        } else {
            0.99
        };
        let ap = (tau * max_step(&lx, &dx)?).min(1.0);
        let ad = (tau * max_step(&lz, &dz)?).min(1.0);
        if ap < STALL_STEP && ad < STALL_STEP {
            return Ok(outcome(x, y, iterations, false, last));
        }

        for b in 0..nb {
            x[b] = x[b].add(&dx[b].scale(ap)).symmetrize();
            z[b] = z[b].add(&dz[b].scale(ad)).symmetrize();
        }
        for k in 0..m {
            y[k] += ad * dy[k];
        }
    }

    Ok(outcome(x, y, iterations, false, last))
}

struct Diagnostics {
    mu: f64,
    rp: f64,
    rd: f64,
}

fn outcome(
    x: Vec<DenseMatrix>,
    y: Vec<f64>,
    iterations: usize,
    converged: bool,
    d: Diagnostics,
) -> IpmResult {
    IpmResult {
        x,
        y,
        iterations: iterations + 1,
        converged,
        mu: d.mu,
        primal_residual: d.rp,
        dual_residual: d.rd,
    }
}

/// <A_k, X> for every constraint.
fn apply_operator(prog: &LinearMatrixProgram, nz: &[Vec<usize>], x: &[DenseMatrix]) -> Vec<f64> {
    prog.constraints
        .iter()
        .zip(nz)
        .map(|(c, blocks)| blocks.iter().map(|&b| c.coeffs[b].dot(&x[b])).sum())
        .collect()
}

/// sum_k y_k A_k per block.
fn apply_adjoint(
    prog: &LinearMatrixProgram,
    rows_on_block: &[Vec<usize>],
    y: &[f64],
) -> Vec<DenseMatrix> {
    prog.block_sizes
        .iter()
        .enumerate()
        .map(|(b, &s)| {
            let mut acc = DenseMatrix::zeros(s, s);
            for &k in &rows_on_block[b] {
                if y[k] != 0.0 {
                    acc = acc.add(&prog.constraints[k].coeffs[b].scale(y[k]));
                }
            }
            acc
        })
        .collect()
}

/// dZ = Rd - A^T(dy) per block.
fn dual_step(
    prog: &LinearMatrixProgram,
    rows_on_block: &[Vec<usize>],
    rd: &[DenseMatrix],
    dy: &[f64],
) -> Vec<DenseMatrix> {
    let aty = apply_adjoint(prog, rows_on_block, dy);
    rd.iter().zip(&aty).map(|(r, a)| r.sub(a)).collect()
}

fn dot_all(a: &[DenseMatrix], b: &[DenseMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// V diag(d) V^T.
fn rebuild(vecs: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    let n = vecs.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (k, dk) in d.iter().enumerate() {
                acc += vecs.get(i, k) * dk * vecs.get(j, k);
            }
            out.set(i, j, acc);
        }
    }
    out.symmetrize()
}

/// Z^{-1} from its Cholesky factor, column by column.
fn inverse_from_cholesky(l: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut out = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0f64; n];
    for j in 0..n {
        e[j] = 1.0;
        let yv = linalg::forward_sub(l, &e);
        let col = linalg::backward_sub_t(l, &yv);
        for i in 0..n {
            out.set(i, j, col[i]);
        }
        e[j] = 0.0;
    }
    out.symmetrize()
}

/// Largest step a with P + a dP still positive definite, from the Cholesky
/// factor of P: a = 1 / max(0, -lambda_min(L^{-1} dP L^{-T})).
fn max_step(lfac: &[DenseMatrix], dp: &[DenseMatrix]) -> Result<f64, SdpError> {
    let mut best = f64::INFINITY;
    for (l, d) in lfac.iter().zip(dp) {
        let n = l.rows();
        // M = L^{-1} d L^{-T}: solve L column-wise twice.
        let mut half = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| d.get(i, j)).collect();
            let s = linalg::forward_sub(l, &col);
            for i in 0..n {
                half.set(i, j, s[i]);
            }
        }
        let mut m = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let row: Vec<f64> = (0..n).map(|i| half.get(j, i)).collect();
            let s = linalg::forward_sub(l, &row);
            for i in 0..n {
                m.set(j, i, s[i]);
            }
        }
        let lam = linalg::min_eig_symmetric(&m.symmetrize())?;
        if lam < -1e-14 {
            best = best.min(-1.0 / lam);
        }
    }
    Ok(best)
}

enum SchurFactor {
    Chol(DenseMatrix),
    Dense(DenseMatrix),
}

impl SchurFactor {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            SchurFactor::Chol(l) => {
                let y = linalg::forward_sub(l, rhs);
                linalg::backward_sub_t(l, &y)
            }
            SchurFactor::Dense(s) => {
                linalg::solve_linear(s, rhs).expect("factorability checked on construction")
            }
        }
    }
}

// Cholesky first; on failure add a tiny ridge and retry, then fall back to a
// pivoted dense solve for programs with dependent rows.
fn factor_schur(s: &DenseMatrix) -> Option<SchurFactor> {
    if let Some(l) = linalg::cholesky(s) {
        return Some(SchurFactor::Chol(l));
    }
    let m = s.rows();
    let diag_max = (0..m).fold(0.0f64, |a, i| a.max(s.get(i, i).abs()));
    let mut ridged = s.clone();
    let ridge = 1e-12 * (1.0 + diag_max);
    for i in 0..m {
        ridged.add_to(i, i, ridge);
    }
    if let Some(l) = linalg::cholesky(&ridged) {
        return Some(SchurFactor::Chol(l));
    }
    let stronger = 1e-9 * (1.0 + diag_max);
    for i in 0..m {
        ridged.add_to(i, i, stronger);
    }
    if linalg::solve_linear(&ridged, &vec![0.0; m]).is_ok() {
        return Some(SchurFactor::Dense(ridged));
    }
    None
}
