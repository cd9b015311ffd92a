//! Polynomial Lyapunov functions for switched linear systems: a fixed-point
//! construction that produces a candidate homogeneous polynomial, and an
//! independent certifier that checks the sum-of-squares decay conditions
//!
//!   p(x) is SOS,    gamma^{2d} p(x) - p(A_i x) is SOS for every i,
//!
//! by solving for explicit Gram matrices with p's coefficients held fixed.

use crate::bounds::MatrixSet;
use crate::linalg::{self, DenseMatrix, LinalgError};
use crate::sdp::{self, Constraint, LinearMatrixProgram, SdpError, SolveStatus};
use crate::symalg::{
    self, compose_coeffs, enumerate_basis, gram_to_coeffs, induced_matrix, LiftBasis, PolyCoeffs,
    SymalgError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LyapunovError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("beta {beta} does not exceed the summed-lift spectral radius {rho}; the fixed-point system is singular or the limit does not exist")]
    BetaTooSmall { beta: f64, rho: f64 },
    #[error("polynomial is not certifiable at gamma {gamma} (feasibility margin {margin:.3e})")]
    Infeasible { gamma: f64, margin: f64 },
    #[error("certification did not resolve numerically: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Symalg(#[from] SymalgError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// Diagnostics for one Gram matrix of a certificate: how far its induced
/// coefficients sit from the target polynomial, and its minimum eigenvalue.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GramResidual {
    pub coeff_residual: f64,
    pub min_eigenvalue: f64,
}

/// An SOS Lyapunov certificate for a matrix set: a homogeneous polynomial p
/// of degree 2d together with Gram matrices witnessing that p and every
/// decay polynomial gamma^{2d} p(x) - p(A_i x) are sums of squares.
///
/// The representation is self-contained and serializable: `exponents` lists
/// the degree-d monomial basis underlying the Gram matrices (entry g of the
/// basis is sqrt(d!/prod(alpha!)) x^alpha), `p_coeffs` gives p against the
/// analogous degree-2d basis, and the Gram matrices are stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SosCertificate {
    pub n: usize,
    /// Half-degree: the Gram matrices act on the degree-d lift, p has degree 2d.
    pub d: usize,
    pub gamma: f64,
    pub exponents: Vec<Vec<usize>>,
    pub p_coeffs: Vec<f64>,
    pub gram_p: Vec<f64>,
    pub gram_constraints: Vec<Vec<f64>>,
    /// Entry 0 describes `gram_p`, entry i+1 describes `gram_constraints[i]`.
    pub residuals: Vec<GramResidual>,
}

impl SosCertificate {
    pub fn gram_basis(&self) -> Result<LiftBasis, LyapunovError> {
        Ok(enumerate_basis(self.n, self.d)?)
    }

    /// Rebuilds p from the stored coefficient vector.
    pub fn p(&self) -> Result<PolyCoeffs, LyapunovError> {
        let basis = enumerate_basis(self.n, 2 * self.d)?;
        Ok(PolyCoeffs::new(basis, self.p_coeffs.clone())?)
    }

    pub fn gram_p_matrix(&self) -> Result<DenseMatrix, LyapunovError> {
        matrix_from_flat(&self.gram_p, self.exponents.len())
    }

    pub fn gram_constraint_matrix(&self, i: usize) -> Result<DenseMatrix, LyapunovError> {
        let flat = self.gram_constraints.get(i).ok_or_else(|| {
            LyapunovError::InvalidArgument(format!(
                "certificate has {} constraint Grams, index {i} requested",
                self.gram_constraints.len()
            ))
        })?;
        matrix_from_flat(flat, self.exponents.len())
    }
}

fn matrix_from_flat(data: &[f64], n: usize) -> Result<DenseMatrix, LyapunovError> {
    if data.len() != n * n {
        return Err(LyapunovError::InvalidArgument(format!(
            "flat matrix has {} entries, expected {}x{}",
            data.len(),
            n,
            n
        )));
    }
    let rows: Vec<Vec<f64>> = data.chunks(n).map(|r| r.to_vec()).collect();
    Ok(DenseMatrix::from_rows(&rows)?)
}

/// The polynomial (x_1^2 + ... + x_n^2)^d as a degree-2d coefficient vector.
/// This equals ||x^[d]||^2, i.e. the identity Gram matrix over the degree-d
/// lift, and is the canonical strictly-SOS seed for the fixed-point
/// iteration.
pub fn sum_of_squares_power(n: usize, d: usize) -> Result<PolyCoeffs, LyapunovError> {
    let basis_d = enumerate_basis(n, d)?;
    let basis_2d = enumerate_basis(n, 2 * d)?;
    let identity = DenseMatrix::identity(basis_d.len());
    Ok(gram_to_coeffs(&identity, &basis_d, &basis_2d)?)
}

fn check_seed(set: &MatrixSet, q: &PolyCoeffs) -> Result<(), LyapunovError> {
    if q.basis.n != set.n() {
        return Err(LyapunovError::InvalidArgument(format!(
            "polynomial in {} variables, matrices are {}x{}",
            q.basis.n,
            set.n(),
            set.n()
        )));
    }
    if q.basis.d == 0 || !q.basis.d.is_multiple_of(2) {
        return Err(LyapunovError::InvalidArgument(format!(
            "polynomial degree must be even and positive, got {}",
            q.basis.d
        )));
    }
    Ok(())
}

/// Sum of the degree-`basis.d` induced matrices of the set.
fn summed_lift(set: &MatrixSet, basis: &LiftBasis) -> Result<DenseMatrix, LyapunovError> {
    let mut sum = DenseMatrix::zeros(basis.len(), basis.len());
    for a in set.matrices() {
        sum = sum.add(&induced_matrix(a, basis)?);
    }
    Ok(sum)
}

/// Runs `steps` rounds of the value-iteration
///
///   V_0 = 0,   V_{k+1}(x) = Q(x) + (1/beta) sum_i V_k(A_i x),
///
/// expressed on coefficients as v_{k+1} = q + (1/beta) T^T v_k with T the sum
/// of the induced matrices on Q's basis. Divergence for beta at or below the
/// spectral radius of T is the caller's concern; entries may grow.
pub fn iterate(
    set: &MatrixSet,
    q: &PolyCoeffs,
    beta: f64,
    steps: usize,
) -> Result<PolyCoeffs, LyapunovError> {
    check_seed(set, q)?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(LyapunovError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let tt = summed_lift(set, &q.basis)?.transpose();
    let mut v = vec![0.0; q.coeffs.len()];
    for _ in 0..steps {
        let propagated = tt.matvec(&v);
        for (g, vg) in v.iter_mut().enumerate() {
            *vg = q.coeffs[g] + propagated[g] / beta;
        }
    }
    Ok(PolyCoeffs::new(q.basis.clone(), v)?)
}

/// Spectral radius of the summed degree-`two_d` lift of the set; the
/// iteration above converges for any seed exactly when beta exceeds this.
pub fn summed_lift_radius(set: &MatrixSet, two_d: usize) -> Result<f64, LyapunovError> {
    if two_d == 0 || !two_d.is_multiple_of(2) {
        return Err(LyapunovError::InvalidArgument(format!(
            "degree must be even and positive, got {two_d}"
        )));
    }
    let basis = enumerate_basis(set.n(), two_d)?;
    let t = summed_lift(set, &basis)?;
    Ok(linalg::spectral_radius(&t, 1e-9)?)
}

/// The tightest numerically safe contraction rate for the fixed-point solve:
/// the summed-lift spectral radius inflated by a relative 1e-6 (for a
/// nilpotent family, whose radius is 0, any positive beta works and 1 is
/// returned).
pub fn suggested_beta(set: &MatrixSet, two_d: usize) -> Result<f64, LyapunovError> {
    let rho = summed_lift_radius(set, two_d)?;
    if rho > 0.0 {
        Ok(rho * (1.0 + 1e-6))
    } else {
        Ok(1.0)
    }
}

/// Solves for the limit of the iteration directly: (I - (1/beta) T^T) v = q.
/// Requires beta strictly above the spectral radius of T (checked), which
/// makes the system nonsingular and the solution equal to the convergent
/// series sum_k (T^T/beta)^k q.
pub fn solve_fixed_point(
    set: &MatrixSet,
    q: &PolyCoeffs,
    beta: f64,
) -> Result<PolyCoeffs, LyapunovError> {
    check_seed(set, q)?;
    if !beta.is_finite() || beta <= 0.0 {
        return Err(LyapunovError::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let t = summed_lift(set, &q.basis)?;
    let rho = linalg::spectral_radius(&t, 1e-9)?;
    // The guard absorbs the eigensolver's own rounding: a beta sitting
    // exactly on the (true) spectral radius must be rejected even when the
    // computed radius lands a few ulps below it.
    if beta <= rho * (1.0 + 1e-7) {
        return Err(LyapunovError::BetaTooSmall { beta, rho });
    }
    let nb = q.basis.len();
    let mut system = DenseMatrix::zeros(nb, nb);
    for i in 0..nb {
        for j in 0..nb {
            let delta = if i == j { 1.0 } else { 0.0 };
            system.set(i, j, delta - t.get(j, i) / beta);
        }
    }
    let v = linalg::solve_linear(&system, &q.coeffs)?;
    Ok(PolyCoeffs::new(q.basis.clone(), v)?)
}

/// Certifies that `p` is an SOS Lyapunov function for the set at rate
/// `gamma`: finds Gram matrices for p and for every decay polynomial
/// gamma^{2d} p(x) - p(A_i x) with p's coefficients pinned by equality
/// constraints. Failure therefore indicts p (or gamma), not the relaxation.
///
/// Internally the decay polynomials are certified in the scaled form
/// p(x) - p(B_i x) with B_i = A_i/gamma, which keeps entry magnitudes near 1;
/// the returned Grams are rescaled by gamma^{2d} back to the nominal form.
///
/// Acceptance is decided by measuring the recovered Grams directly (residual
/// against the target coefficients and minimum eigenvalue), not by the
/// solver's own verdict: an interior-point run that stalls on its last steps
/// but leaves an iterate of certificate quality still certifies, and a run
/// that claims success is re-checked against the same thresholds.
pub fn certify(
    set: &MatrixSet,
    p: &PolyCoeffs,
    gamma: f64,
    eps_feas: f64,
) -> Result<SosCertificate, LyapunovError> {
    check_seed(set, p)?;
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(LyapunovError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let scale = p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(LyapunovError::InvalidArgument("polynomial is identically zero".into()));
    }
    let n = set.n();
    let two_d = p.basis.d;
    let d = two_d / 2;
    let basis_d = enumerate_basis(n, d)?;
    let nb = basis_d.len();
    let m = set.len();

    // Coefficient functionals: entry g of Lambda(Q) is <C_g, Q> where C_g is
    // assembled from the ordered pair table of the degree-d basis.
    let coeff_matrices = symalg::coefficient_matrices(&basis_d, &p.basis)?;

    // The program is solved for p/scale so the right-hand side is O(1)
    // regardless of how large p's coefficients are (fixed points near the
    // convergence threshold can be enormous); the recovered Grams are
    // rescaled afterwards.
    let mut constraints = Vec::new();

    // Rows pinning Lambda(G_0) = p.
    for (g, cg) in coeff_matrices.iter().enumerate() {
        let mut coeffs = vec![DenseMatrix::zeros(nb, nb); m + 1];
        coeffs[0] = cg.clone();
        constraints.push(Constraint { coeffs, rhs: p.coeffs[g] / scale });
    }
    // Rows pinning Lambda(G_i) = p - p(B_i x) in the scaled problem.
    let gamma_pow = gamma.powi(two_d as i32);
    for (i, a) in set.matrices().iter().enumerate() {
        let b = a.scale(1.0 / gamma);
        let composed = compose_coeffs(p, &b)?;
        for (g, cg) in coeff_matrices.iter().enumerate() {
            let mut coeffs = vec![DenseMatrix::zeros(nb, nb); m + 1];
            coeffs[i + 1] = cg.clone();
            constraints
                .push(Constraint { coeffs, rhs: (p.coeffs[g] - composed.coeffs[g]) / scale });
        }
    }

    let prog = LinearMatrixProgram::feasibility(vec![nb; m + 1], constraints);
    let sol = sdp::solve_feasibility(&prog, eps_feas)?;
    if let SolveStatus::Infeasible = sol.status {
        return Err(LyapunovError::Infeasible { gamma, margin: sol.phase1_margin });
    }

    let gram_p = sol.blocks[0].symmetrize().scale(scale);
    let gram_constraints: Vec<DenseMatrix> =
        sol.blocks[1..].iter().map(|g| g.symmetrize().scale(scale * gamma_pow)).collect();

    let mut residuals = Vec::with_capacity(m + 1);
    residuals.push(gram_residual(&gram_p, &basis_d, p, 1.0)?);
    for (i, a) in set.matrices().iter().enumerate() {
        let composed = compose_coeffs(p, a)?;
        let target: Vec<f64> =
            p.coeffs.iter().zip(&composed.coeffs).map(|(pc, cc)| gamma_pow * pc - cc).collect();
        let target = PolyCoeffs::new(p.basis.clone(), target)?;
        residuals.push(gram_residual(&gram_constraints[i], &basis_d, &target, 1.0)?);
    }

    // The thresholds mirror what a cleanly converged solve guarantees: the
    // scaled program bounds its row residuals by eps_feas * (1 + max|rhs|)
    // and its margin by -eps_feas, which after rescaling becomes a relative
    // coefficient residual and an eigenvalue floor amplified by gamma^{2d}.
    let rhs_scale = 1.0 + prog.constraints.iter().fold(0.0f64, |m, c| m.max(c.rhs.abs()));
    let amplification = gamma_pow.max(1.0);
    let coeff_gate = eps_feas * rhs_scale * amplification;
    let eig_gate = eps_feas * scale * amplification;
    let worst_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.coeff_residual)) / scale;
    let worst_eigenvalue = residuals.iter().fold(f64::INFINITY, |m, r| m.min(r.min_eigenvalue));
    if worst_residual > coeff_gate || worst_eigenvalue < -eig_gate {
        return Err(LyapunovError::NumericalFailure(format!(
            "solver unresolved at gamma {gamma} after {} iterations \
             (relative residual {:.3e}, minimum Gram eigenvalue {:.3e})",
            sol.iterations, worst_residual, worst_eigenvalue
        )));
    }

    Ok(SosCertificate {
        n,
        d,
        gamma,
        exponents: basis_d.exponents().to_vec(),
        p_coeffs: p.coeffs.clone(),
        gram_p: gram_p.data().to_vec(),
        gram_constraints: gram_constraints.iter().map(|g| g.data().to_vec()).collect(),
        residuals,
    })
}

pub(crate) fn gram_residual(
    gram: &DenseMatrix,
    basis_d: &LiftBasis,
    target: &PolyCoeffs,
    scale: f64,
) -> Result<GramResidual, LyapunovError> {
    let got = gram_to_coeffs(gram, basis_d, &target.basis)?;
    let coeff_residual =
        got.coeffs.iter().zip(&target.coeffs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
    let min_eigenvalue = linalg::min_eig_symmetric(gram)?;
    Ok(GramResidual { coeff_residual, min_eigenvalue })
}

/// Outcome of re-verifying a stored certificate from its own data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub max_coeff_residual: f64,
    pub min_gram_eigenvalue: f64,
    /// Entry 0 for the Gram of p, entry i+1 for constraint i.
    pub blocks: Vec<GramResidual>,
}

/// Re-verifies a certificate against a matrix set using only the stored
/// Grams and coefficients: every Gram must reproduce its target polynomial
/// to `coeff_tol` (relative to the largest |p| coefficient) and have minimum
/// eigenvalue at least -eig_tol. Shares no state with the certifying solver.
pub fn verify_certificate(
    set: &MatrixSet,
    cert: &SosCertificate,
    coeff_tol: f64,
    eig_tol: f64,
) -> Result<VerifyReport, LyapunovError> {
    if !(coeff_tol > 0.0 && eig_tol > 0.0) {
        return Err(LyapunovError::InvalidArgument(
            "verification tolerances must be positive".into(),
        ));
    }
    if cert.n != set.n() {
        return Err(LyapunovError::InvalidArgument(format!(
            "certificate is for {}-dimensional systems, set is {}-dimensional",
            cert.n,
            set.n()
        )));
    }
    if cert.gram_constraints.len() != set.len() {
        return Err(LyapunovError::InvalidArgument(format!(
            "certificate has {} constraint Grams, set has {} matrices",
            cert.gram_constraints.len(),
            set.len()
        )));
    }
    if !(cert.gamma.is_finite() && cert.gamma > 0.0) {
        return Err(LyapunovError::InvalidArgument(format!(
            "certificate gamma must be positive, got {}",
            cert.gamma
        )));
    }
    let basis_d = cert.gram_basis()?;
    if cert.exponents != basis_d.exponents() {
        return Err(LyapunovError::InvalidArgument(
            "certificate exponent list does not match the canonical basis order".into(),
        ));
    }
    let p = cert.p()?;
    let scale = p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Err(LyapunovError::InvalidArgument("certificate polynomial is zero".into()));
    }

    let gamma_pow = cert.gamma.powi(2 * cert.d as i32);
    let mut blocks = Vec::with_capacity(set.len() + 1);
    blocks.push(gram_residual(&cert.gram_p_matrix()?, &basis_d, &p, scale)?);
    for (i, a) in set.matrices().iter().enumerate() {
        let composed = compose_coeffs(&p, a)?;
        let target: Vec<f64> =
            p.coeffs.iter().zip(&composed.coeffs).map(|(pc, cc)| gamma_pow * pc - cc).collect();
        let target = PolyCoeffs::new(p.basis.clone(), target)?;
        blocks.push(gram_residual(&cert.gram_constraint_matrix(i)?, &basis_d, &target, scale)?);
    }

    let max_coeff_residual = blocks.iter().fold(0.0f64, |m, b| m.max(b.coeff_residual));
    let min_gram_eigenvalue = blocks.iter().fold(f64::INFINITY, |m, b| m.min(b.min_eigenvalue));
    Ok(VerifyReport {
        ok: max_coeff_residual <= coeff_tol && min_gram_eigenvalue >= -eig_tol,
        max_coeff_residual,
        min_gram_eigenvalue,
        blocks,
    })
}
