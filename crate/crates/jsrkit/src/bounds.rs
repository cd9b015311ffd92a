//! Bounds on the joint spectral radius of a finite matrix set.
//!
//! The joint spectral radius rho(A_1, ..., A_m) is the maximal asymptotic
//! growth rate of arbitrary long products drawn from the set. This module
//! computes:
//!
//! * lower bounds from periodic products, rho(A_w)^{1/|w|} over cyclic
//!   equivalence classes of words w;
//! * the summed-lift upper bound rho_SR,2d = rho(A_1^[2d] + ... + A_m^[2d])^{1/2d};
//! * the common-quadratic bound rho_CQ,2d: the least gamma admitting P > 0
//!   with gamma^{2d} P - (A_i^[d])^T P A_i^[d] PSD for all i;
//! * the sum-of-squares bound rho_SOS,2d: the least gamma admitting a
//!   homogeneous degree-2d SOS polynomial p with every
//!   gamma^{2d} p(x) - p(A_i x) SOS;
//!
//! together with the a-priori quality factor eta^{-1/2d},
//! eta = min(m, binom(n+d-1, d)), which bounds how far rho_SOS,2d can sit
//! above the true value. The bounds are ordered:
//! products <= rho <= rho_SOS,2d <= rho_CQ,2d <= rho_SR,2d.
//!
//! The two semidefinite bounds are computed by bisection over gamma, solving
//! one feasibility program per probe. Bisection always reports the certified
//! feasible endpoint, so returned values are true upper bounds up to solver
//! tolerance.

use crate::linalg::{self, DenseMatrix, LinalgError};
use crate::lyapunov::{self, LyapunovError, SosCertificate};
use crate::sdp::{self, Constraint, LinearMatrixProgram, SdpError, SdpSolution, SolveStatus};
use crate::symalg::{
    self, enumerate_basis, gram_to_coeffs, induced_matrix, PolyCoeffs, SymalgError,
};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lifted dimension for n = {n}, degree {degree} exceeds the cap {cap}")]
    DimensionCapExceeded { n: usize, degree: usize, cap: usize },
    #[error("enumerating {m}^{k_max} products exceeds the word cap {cap}")]
    WordCapExceeded { m: usize, k_max: usize, cap: usize },
    #[error("bisection bracket is inverted: lower bound {lo} exceeds upper bound {hi}")]
    BracketInversion { lo: f64, hi: f64 },
    #[error("upper bracket endpoint gamma = {gamma} was rejected; the bound ordering is numerically inconsistent")]
    UpperBracketRejected { gamma: f64 },
    #[error("feasibility probe at gamma = {gamma} failed: {detail}")]
    ProbeFailure { gamma: f64, detail: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Symalg(#[from] SymalgError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

/// A finite set of square matrices of a common dimension.
#[derive(Debug, Clone)]
pub struct MatrixSet {
    n: usize,
    matrices: Vec<DenseMatrix>,
    name: Option<String>,
}

impl MatrixSet {
    pub fn new(matrices: Vec<DenseMatrix>, name: Option<String>) -> Result<Self, BoundsError> {
        let first = matrices
            .first()
            .ok_or_else(|| BoundsError::InvalidArgument("matrix set is empty".into()))?;
        if !first.is_square() || first.rows() == 0 {
            return Err(BoundsError::InvalidArgument(format!(
                "matrices must be square and nonempty, got {}x{}",
                first.rows(),
                first.cols()
            )));
        }
        let n = first.rows();
        for (i, a) in matrices.iter().enumerate() {
            if a.rows() != n || a.cols() != n {
                return Err(BoundsError::InvalidArgument(format!(
                    "matrix {i} is {}x{}, expected {n}x{n}",
                    a.rows(),
                    a.cols()
                )));
            }
            if !a.is_finite() {
                return Err(BoundsError::InvalidArgument(format!(
                    "matrix {i} has non-finite entries"
                )));
            }
        }
        Ok(MatrixSet { n, matrices, name })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of matrices in the set.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least one matrix
    }

    pub fn matrices(&self) -> &[DenseMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, i: usize) -> &DenseMatrix {
        &self.matrices[i]
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// The set {c A_1, ..., c A_m}.
    pub fn scaled(&self, c: f64) -> MatrixSet {
        MatrixSet {
            n: self.n,
            matrices: self.matrices.iter().map(|a| a.scale(c)).collect(),
            name: self.name.clone(),
        }
    }
}

/// Tunable limits and tolerances for the bound computations.
#[derive(Debug, Clone)]
pub struct BoundOptions {
    /// Relative bisection width: iteration stops once hi - lo <= tol*(1+lo).
    pub bisection_tol: f64,
    /// Feasibility tolerance handed to the semidefinite solver.
    pub eps_feas: f64,
    /// Minimum eigenvalue the leading Gram block (the Gram of p, or P) must
    /// reach for a probe to count as feasible. The trace normalization admits
    /// solutions with a singular leading block that certify nothing (p or the
    /// quadratic form may vanish on a subspace), so probes are accepted only
    /// strictly inside the cone; the gate keeps bisection sound.
    pub interior_gate: f64,
    /// Largest admissible lifted dimension binom(n+2d-1, 2d).
    pub dim_cap: usize,
    /// Largest admissible m^k_max when enumerating periodic products.
    pub word_cap: usize,
    /// Optional inflation: certifies p(x) - eps*||x||^{2d} SOS instead of p,
    /// useful for degenerate (e.g. jointly nilpotent) families. Off by
    /// default; the probes are already normalized.
    pub epsilon_inflation: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            bisection_tol: 1e-6,
            eps_feas: 1e-8,
            interior_gate: 1e-7,
            dim_cap: 20_000,
            word_cap: 1_000_000,
            epsilon_inflation: 0.0,
        }
    }
}

fn validate_options(opts: &BoundOptions) -> Result<(), BoundsError> {
    if !(opts.bisection_tol > 0.0 && opts.bisection_tol < 0.5) {
        return Err(BoundsError::InvalidArgument(format!(
            "bisection tolerance must lie in (0, 0.5), got {}",
            opts.bisection_tol
        )));
    }
    if !(opts.eps_feas > 0.0 && opts.eps_feas < 1.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "eps_feas must lie in (0, 1), got {}",
            opts.eps_feas
        )));
    }
    if !(opts.interior_gate >= 0.0 && opts.interior_gate < 1.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "interior gate must lie in [0, 1), got {}",
            opts.interior_gate
        )));
    }
    if !(opts.epsilon_inflation >= 0.0 && opts.epsilon_inflation.is_finite()) {
        return Err(BoundsError::InvalidArgument(format!(
            "epsilon inflation must be a finite nonnegative number, got {}",
            opts.epsilon_inflation
        )));
    }
    if opts.dim_cap == 0 || opts.word_cap == 0 {
        return Err(BoundsError::InvalidArgument("caps must be positive".into()));
    }
    Ok(())
}

fn check_two_d(two_d: usize) -> Result<(), BoundsError> {
    if two_d == 0 || !two_d.is_multiple_of(2) {
        return Err(BoundsError::InvalidArgument(format!(
            "degree must be a positive even integer, got {two_d}"
        )));
    }
    Ok(())
}

/// binom(n + degree - 1, degree), guarded against the cap; the computation
/// itself cannot overflow because it exits as soon as the cap is passed.
fn lifted_dimension(n: usize, degree: usize, cap: usize) -> Result<usize, BoundsError> {
    let a = (n + degree - 1) as u128;
    let b = degree.min(n - 1) as u128;
    let mut val: u128 = 1;
    for i in 1..=b {
        val = val * (a - b + i) / i;
        if val > cap as u128 {
            return Err(BoundsError::DimensionCapExceeded { n, degree, cap });
        }
    }
    Ok(val as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Sos,
    Cq,
    Sr,
    LowerProducts,
}

/// The artifact attached to a bound: evidence a checker can re-verify.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// Full SOS Lyapunov certificate (polynomial plus Gram matrices).
    Sos(SosCertificate),
    /// Common quadratic certificate on the d-lift: P is size x size
    /// row-major, positive definite, with gamma^{2d} P - (A_i^[d])^T P A_i^[d]
    /// PSD for every i.
    CommonQuadratic { gamma: f64, size: usize, p: Vec<f64> },
    /// Periodic product witnessing the lower bound: value =
    /// rho(A_{w_k} ... A_{w_1})^{1/k} with 1-based indices into the set.
    ProductWord { word: Vec<usize>, value: f64 },
}

/// Outcome of one bound computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: BoundMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_d: Option<usize>,
    pub value: f64,
    /// Final bisection interval (lo certified infeasible-or-unresolved,
    /// hi certified feasible); absent for non-bisection methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
    /// A-priori accuracy eta^{-1/2d}: value * quality_factor <= rho.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisection_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_feas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

/// rho_SR,2d: the 2d-th root of the spectral radius of the summed 2d-lifts.
/// Always an upper bound on the joint spectral radius, with no optimization
/// involved; it also seeds the bisection bracket for the tighter bounds.
pub fn rho_sr(set: &MatrixSet, two_d: usize, opts: &BoundOptions) -> Result<f64, BoundsError> {
    check_two_d(two_d)?;
    validate_options(opts)?;
    lifted_dimension(set.n(), two_d, opts.dim_cap)?;
    let basis = enumerate_basis(set.n(), two_d)?;
    let mut sum = DenseMatrix::zeros(basis.len(), basis.len());
    for a in set.matrices() {
        sum = sum.add(&induced_matrix(a, &basis)?);
    }
    let rho = linalg::spectral_radius(&sum, 1e-9)?;
    Ok(rho.powf(1.0 / two_d as f64))
}

/// Builds the degree-2d SOS feasibility program at rate gamma: blocks
/// Q_0, Q_1, ..., Q_m of size binom(n+d-1, d), where Q_0 is the Gram of the
/// candidate p and Q_i the Gram of gamma^{2d} p(x) - p(A_i x). The free
/// coefficient vector of p is eliminated by coefficient matching against
/// Lambda(Q_0), and trace(Q_0) = size(Q_0) cuts the scaling freedom.
/// Matrices are pre-scaled by 1/gamma, so Q_i certifies p(x) - p(B_i x)
/// with B_i = A_i/gamma; multiplying Q_i by gamma^{2d} recovers the nominal
/// constraint Gram.
pub fn build_sos_feasibility(
    set: &MatrixSet,
    two_d: usize,
    gamma: f64,
) -> Result<LinearMatrixProgram, BoundsError> {
    build_sos_probe(set, two_d, gamma, 0.0)
}

fn build_sos_probe(
    set: &MatrixSet,
    two_d: usize,
    gamma: f64,
    epsilon: f64,
) -> Result<LinearMatrixProgram, BoundsError> {
    check_two_d(two_d)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(BoundsError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let n = set.n();
    let d = two_d / 2;
    let m = set.len();
    let basis_d = enumerate_basis(n, d)?;
    let basis_2d = enumerate_basis(n, two_d)?;
    let nb = basis_d.len();
    let nc = basis_2d.len();
    let table = symalg::gram_pair_table(&basis_d, &basis_2d)?;

    // With inflation, p is represented as (x^[d])^T (Q_0 + eps I) x^[d], so
    // c = Lambda(Q_0) + eps u with u = Lambda(I); the rows below then pick up
    // the constant shift eps (u - M^T u) on their right-hand side.
    let u: Vec<f64> = if epsilon > 0.0 {
        gram_to_coeffs(&DenseMatrix::identity(nb), &basis_d, &basis_2d)?.coeffs
    } else {
        Vec::new()
    };

    let mut constraints = Vec::with_capacity(1 + m * nc);
    let mut trace_row = vec![DenseMatrix::zeros(nb, nb); m + 1];
    trace_row[0] = DenseMatrix::identity(nb);
    constraints.push(Constraint { coeffs: trace_row, rhs: nb as f64 });

    for (i, a) in set.matrices().iter().enumerate() {
        let b = a.scale(1.0 / gamma);
        let lift = induced_matrix(&b, &basis_2d)?;
        let shift: Vec<f64> = if epsilon > 0.0 { lift.transpose().matvec(&u) } else { Vec::new() };
        for g in 0..nc {
            // Lambda(Q_i)_g - Lambda(Q_0)_g + (M^T Lambda(Q_0))_g = rhs.
            let mut q0 = DenseMatrix::zeros(nb, nb);
            for &(r, c, w) in &table[g] {
                q0.add_to(r, c, -w);
            }
            for (h, row) in table.iter().enumerate() {
                let mg = lift.get(h, g);
                if mg != 0.0 {
                    for &(r, c, w) in row {
                        q0.add_to(r, c, mg * w);
                    }
                }
            }
            let mut qi = DenseMatrix::zeros(nb, nb);
            for &(r, c, w) in &table[g] {
                qi.add_to(r, c, w);
            }
            let mut coeffs = vec![DenseMatrix::zeros(nb, nb); m + 1];
            coeffs[0] = q0.symmetrize();
            coeffs[i + 1] = qi;
            let rhs = if epsilon > 0.0 { epsilon * (u[g] - shift[g]) } else { 0.0 };
            constraints.push(Constraint { coeffs, rhs });
        }
    }
    Ok(LinearMatrixProgram::feasibility(vec![nb; m + 1], constraints))
}

/// Builds the common-quadratic feasibility program on the d-lift at rate
/// gamma: blocks P, S_1, ..., S_m of size binom(n+d-1, d) with
/// S_i = P - (B_i^[d])^T P B_i^[d], B_i = A_i/gamma, and trace(P) = size(P).
pub fn build_cq_feasibility(
    set: &MatrixSet,
    two_d: usize,
    gamma: f64,
) -> Result<LinearMatrixProgram, BoundsError> {
    check_two_d(two_d)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(BoundsError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let n = set.n();
    let d = two_d / 2;
    let m = set.len();
    let basis_d = enumerate_basis(n, d)?;
    let nb = basis_d.len();

    let mut constraints = Vec::with_capacity(1 + m * nb * (nb + 1) / 2);
    let mut trace_row = vec![DenseMatrix::zeros(nb, nb); m + 1];
    trace_row[0] = DenseMatrix::identity(nb);
    constraints.push(Constraint { coeffs: trace_row, rhs: nb as f64 });

    for (i, a) in set.matrices().iter().enumerate() {
        let lift = induced_matrix(&a.scale(1.0 / gamma), &basis_d)?;
        for row in 0..nb {
            for col in row..nb {
                // S_i[row,col] - P[row,col] + (L^T P L)[row,col] = 0.
                let mut p_coeff = DenseMatrix::zeros(nb, nb);
                if row == col {
                    p_coeff.add_to(row, row, -1.0);
                } else {
                    p_coeff.add_to(row, col, -0.5);
                    p_coeff.add_to(col, row, -0.5);
                }
                for r in 0..nb {
                    for c in 0..nb {
                        let w = 0.5
                            * (lift.get(r, row) * lift.get(c, col)
                                + lift.get(r, col) * lift.get(c, row));
                        if w != 0.0 {
                            p_coeff.add_to(r, c, w);
                        }
                    }
                }
                let mut s_coeff = DenseMatrix::zeros(nb, nb);
                if row == col {
                    s_coeff.add_to(row, row, 1.0);
                } else {
                    s_coeff.add_to(row, col, 0.5);
                    s_coeff.add_to(col, row, 0.5);
                }
                let mut coeffs = vec![DenseMatrix::zeros(nb, nb); m + 1];
                coeffs[0] = p_coeff;
                coeffs[i + 1] = s_coeff;
                constraints.push(Constraint { coeffs, rhs: 0.0 });
            }
        }
    }
    Ok(LinearMatrixProgram::feasibility(vec![nb; m + 1], constraints))
}

enum ProbeVerdict {
    Accepted(SdpSolution),
    Rejected,
}

/// Solves one feasibility probe. A probe is accepted only when the solver
/// reports feasibility AND the leading block clears the interior gate; an
/// unresolved solve is retried once at a 10x looser feasibility tolerance,
/// after which the probe aborts the bisection.
fn probe_gamma<F>(build: &F, gamma: f64, opts: &BoundOptions) -> Result<ProbeVerdict, BoundsError>
where
    F: Fn(f64) -> Result<LinearMatrixProgram, BoundsError>,
{
    let prog = build(gamma)?;
    let mut eps = opts.eps_feas;
    for attempt in 0..2 {
        let sol = sdp::solve_feasibility(&prog, eps)?;
        match sol.status {
            SolveStatus::Feasible => {
                let lead = linalg::min_eig_symmetric(&sol.blocks[0])?;
                if lead >= opts.interior_gate {
                    return Ok(ProbeVerdict::Accepted(sol));
                }
                return Ok(ProbeVerdict::Rejected);
            }
            SolveStatus::Infeasible => return Ok(ProbeVerdict::Rejected),
            SolveStatus::NumericalFailure => {
                // A decisively negative margin needs no retry.
                if attempt == 0 && sol.phase1_margin >= -100.0 * opts.eps_feas {
                    eps = (eps * 10.0).min(0.999);
                    continue;
                }
                // Unresolved after the retry: reject. Near the feasibility
                // boundary the maximum margin shrinks toward zero and the
                // solver can stall before resolving it; accepting would
                // require trusting a solution whose residual is comparable
                // to its margin. Rejection only raises the bracket's lower
                // end — the reported bound is always the last fully
                // certified feasible endpoint — so a stall can loosen the
                // answer but never corrupt its validity.
                return Ok(ProbeVerdict::Rejected);
            }
        }
    }
    unreachable!("probe loop returns within two attempts")
}

struct BisectionOutcome {
    lo: f64,
    hi: f64,
    solution: SdpSolution,
}

/// Bisects the least gamma accepted by `build`'s feasibility program,
/// starting from a bracket [lo0, hi0] with hi0 known-feasible up to
/// numerics. Returns the certified-feasible endpoint hi together with the
/// probe solution obtained there.
fn bisect_upper<F>(
    build: F,
    lo0: f64,
    hi0: f64,
    opts: &BoundOptions,
) -> Result<BisectionOutcome, BoundsError>
where
    F: Fn(f64) -> Result<LinearMatrixProgram, BoundsError>,
{
    if lo0 > hi0 * (1.0 + 1e-9) {
        return Err(BoundsError::BracketInversion { lo: lo0, hi: hi0 });
    }
    let mut lo = lo0.min(hi0);
    let mut hi = hi0;

    // The upper endpoint can sit exactly on the feasibility boundary (the
    // theory guarantees feasibility at hi0, not strict feasibility); inflate
    // once before concluding the bracket is broken.
    let mut top = probe_gamma(&build, hi, opts)?;
    if matches!(top, ProbeVerdict::Rejected) {
        hi *= 1.001;
        top = probe_gamma(&build, hi, opts)?;
    }
    let mut solution = match top {
        ProbeVerdict::Accepted(sol) => sol,
        ProbeVerdict::Rejected => return Err(BoundsError::UpperBracketRejected { gamma: hi }),
    };

    let mut guard = 0usize;
    while hi - lo > opts.bisection_tol * (1.0 + lo) {
        guard += 1;
        if guard > 200 {
            return Err(BoundsError::ProbeFailure {
                gamma: 0.5 * (lo + hi),
                detail: "bisection failed to contract".into(),
            });
        }
        let mid = 0.5 * (lo + hi);
        match probe_gamma(&build, mid, opts)? {
            ProbeVerdict::Accepted(sol) => {
                hi = mid;
                solution = sol;
            }
            ProbeVerdict::Rejected => lo = mid,
        }
    }
    Ok(BisectionOutcome { lo, hi, solution })
}

/// Shared bracket construction: the best available lower bound (single
/// matrices and length-2 products) and the summed-lift upper bound.
fn initial_bracket(
    set: &MatrixSet,
    two_d: usize,
    opts: &BoundOptions,
) -> Result<(f64, f64), BoundsError> {
    let mut lo = 0.0f64;
    for a in set.matrices() {
        lo = lo.max(linalg::spectral_radius(a, 1e-9)?);
    }
    // Length-2 products tighten the bracket when affordable; they are an
    // optional refinement, so an oversized set simply skips them.
    if set.len().checked_mul(set.len()).is_some_and(|w| w <= opts.word_cap) {
        let (products, _) = lower_bound_products(set, 2, opts)?;
        lo = lo.max(products);
    }
    let hi = rho_sr(set, two_d, opts)?;
    Ok((lo, hi))
}

/// rho_SOS,2d by bisection, with the certificate extracted at the certified
/// endpoint. The reported value is always the feasible (upper) end of the
/// final bracket.
pub fn rho_sos(
    set: &MatrixSet,
    two_d: usize,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundsError> {
    check_two_d(two_d)?;
    validate_options(opts)?;
    let d = two_d / 2;
    let qf = quality_factor(set.n(), set.len(), d);
    let (lo0, hi0) = initial_bracket(set, two_d, opts)?;
    if hi0 == 0.0 {
        // The summed lift is nilpotent, so the whole chain collapses to zero;
        // no probe at gamma > 0 is needed (or meaningful).
        return Ok(BoundReport {
            method: BoundMethod::Sos,
            two_d: Some(two_d),
            value: 0.0,
            bracket: Some((0.0, 0.0)),
            quality_factor: Some(qf),
            bisection_tol: Some(opts.bisection_tol),
            eps_feas: Some(opts.eps_feas),
            certificate: None,
        });
    }
    let outcome = bisect_upper(
        |gamma| build_sos_probe(set, two_d, gamma, opts.epsilon_inflation),
        lo0,
        hi0,
        opts,
    )?;
    let certificate = extract_sos_certificate(set, two_d, outcome.hi, &outcome.solution)?;
    Ok(BoundReport {
        method: BoundMethod::Sos,
        two_d: Some(two_d),
        value: outcome.hi,
        bracket: Some((outcome.lo, outcome.hi)),
        quality_factor: Some(qf),
        bisection_tol: Some(opts.bisection_tol),
        eps_feas: Some(opts.eps_feas),
        certificate: Some(Certificate::Sos(certificate)),
    })
}

/// rho_CQ,2d by bisection: the common-quadratic Lyapunov bound evaluated on
/// the d-lifted matrices. Coincides with rho_SOS,2 for two_d = 2 and with
/// rho_SOS applied to the lifted family in general.
pub fn rho_cq(
    set: &MatrixSet,
    two_d: usize,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundsError> {
    check_two_d(two_d)?;
    validate_options(opts)?;
    let d = two_d / 2;
    let qf = quality_factor(set.n(), set.len(), d);
    let (lo0, hi0) = initial_bracket(set, two_d, opts)?;
    if hi0 == 0.0 {
        return Ok(BoundReport {
            method: BoundMethod::Cq,
            two_d: Some(two_d),
            value: 0.0,
            bracket: Some((0.0, 0.0)),
            quality_factor: Some(qf),
            bisection_tol: Some(opts.bisection_tol),
            eps_feas: Some(opts.eps_feas),
            certificate: None,
        });
    }
    let outcome = bisect_upper(|gamma| build_cq_feasibility(set, two_d, gamma), lo0, hi0, opts)?;
    let p = outcome.solution.blocks[0].symmetrize();
    Ok(BoundReport {
        method: BoundMethod::Cq,
        two_d: Some(two_d),
        value: outcome.hi,
        bracket: Some((outcome.lo, outcome.hi)),
        quality_factor: Some(qf),
        bisection_tol: Some(opts.bisection_tol),
        eps_feas: Some(opts.eps_feas),
        certificate: Some(Certificate::CommonQuadratic {
            gamma: outcome.hi,
            size: p.rows(),
            p: p.data().to_vec(),
        }),
    })
}

/// Packages the probe solution at the certified gamma as a standalone SOS
/// certificate: p is read off the leading Gram block, and the constraint
/// Grams are rescaled from the normalized probe (B_i = A_i/gamma) back to
/// the nominal form gamma^{2d} p(x) - p(A_i x).
fn extract_sos_certificate(
    set: &MatrixSet,
    two_d: usize,
    gamma: f64,
    sol: &SdpSolution,
) -> Result<SosCertificate, BoundsError> {
    let n = set.n();
    let d = two_d / 2;
    let basis_d = enumerate_basis(n, d)?;
    let basis_2d = enumerate_basis(n, two_d)?;
    let gram_p = sol.blocks[0].symmetrize();
    let p = gram_to_coeffs(&gram_p, &basis_d, &basis_2d)?;
    let gamma_pow = gamma.powi(two_d as i32);
    let gram_constraints: Vec<DenseMatrix> =
        sol.blocks[1..].iter().map(|g| g.symmetrize().scale(gamma_pow)).collect();

    let mut residuals = Vec::with_capacity(set.len() + 1);
    residuals.push(lyapunov::gram_residual(&gram_p, &basis_d, &p, 1.0)?);
    for (i, a) in set.matrices().iter().enumerate() {
        let composed = symalg::compose_coeffs(&p, a)?;
        let target: Vec<f64> =
            p.coeffs.iter().zip(&composed.coeffs).map(|(pc, cc)| gamma_pow * pc - cc).collect();
        let target = PolyCoeffs::new(basis_2d.clone(), target)?;
        residuals.push(lyapunov::gram_residual(&gram_constraints[i], &basis_d, &target, 1.0)?);
    }

    Ok(SosCertificate {
        n,
        d,
        gamma,
        exponents: basis_d.exponents().to_vec(),
        p_coeffs: p.coeffs,
        gram_p: gram_p.data().to_vec(),
        gram_constraints: gram_constraints.iter().map(|g| g.data().to_vec()).collect(),
        residuals,
    })
}

/// True when `word` is the lexicographically smallest among its rotations,
/// i.e. the canonical representative of its cyclic equivalence class.
fn is_minimal_rotation(word: &[usize]) -> bool {
    let k = word.len();
    for r in 1..k {
        for i in 0..k {
            let rotated = word[(r + i) % k];
            match rotated.cmp(&word[i]) {
                std::cmp::Ordering::Less => return false,
                std::cmp::Ordering::Greater => break,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    true
}

/// Advances `word` to the lexicographically next word over {0, ..., m-1};
/// returns false once the enumeration wraps around.
fn next_word(word: &mut [usize], m: usize) -> bool {
    for slot in word.iter_mut().rev() {
        *slot += 1;
        if *slot < m {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Best lower bound from periodic products up to length `k_max`:
/// max over words w of rho(A_{w_k} ... A_{w_1})^{1/k}. Words are enumerated
/// once per cyclic equivalence class (canonical minimal rotation), since
/// rotations share a spectral radius. Returns the bound and the 1-based
/// witness word, ties resolved toward the shortest and lexicographically
/// first word.
pub fn lower_bound_products(
    set: &MatrixSet,
    k_max: usize,
    opts: &BoundOptions,
) -> Result<(f64, Vec<usize>), BoundsError> {
    if k_max == 0 {
        return Err(BoundsError::InvalidArgument("k_max must be at least 1".into()));
    }
    validate_options(opts)?;
    let m = set.len();
    // Enumeration cost check: m^k_max words before deduplication.
    let mut words: u128 = 1;
    for _ in 0..k_max {
        words = words.saturating_mul(m as u128);
        if words > opts.word_cap as u128 {
            return Err(BoundsError::WordCapExceeded { m, k_max, cap: opts.word_cap });
        }
    }

    let mut best_value = f64::NEG_INFINITY;
    let mut best_word: Vec<usize> = Vec::new();
    for k in 1..=k_max {
        let mut word = vec![0usize; k];
        loop {
            if is_minimal_rotation(&word) {
                let mut product = DenseMatrix::identity(set.n());
                for &s in &word {
                    product = set.matrix(s).matmul(&product);
                }
                let rho = linalg::spectral_radius(&product, 1e-9)?;
                let value = rho.powf(1.0 / k as f64);
                if value > best_value {
                    best_value = value;
                    best_word = word.iter().map(|&s| s + 1).collect();
                }
            }
            if !next_word(&mut word, m) {
                break;
            }
        }
    }
    Ok((best_value, best_word))
}

/// The a-priori accuracy eta^{-1/(2d)} with eta = min(m, binom(n+d-1, d)):
/// multiplying an SOS bound of degree 2d by this factor gives a guaranteed
/// lower bound on the joint spectral radius.
pub fn quality_factor(n: usize, m: usize, d: usize) -> f64 {
    assert!(n >= 1 && m >= 1 && d >= 1, "quality_factor arguments must be at least 1");
    let eta = eta(n, m, d);
    (eta as f64).powf(-1.0 / (2.0 * d as f64))
}

/// min(m, binom(n+d-1, d)), with the binomial computed incrementally and
/// clamped at m (the min makes larger values irrelevant, so no overflow).
fn eta(n: usize, m: usize, d: usize) -> usize {
    let a = (n + d - 1) as u128;
    let b = d.min(n - 1) as u128;
    let mut val: u128 = 1;
    for i in 1..=b {
        val = val * (a - b + i) / i;
        if val >= m as u128 {
            return m;
        }
    }
    (val as usize).min(m)
}

/// One row of the size-comparison table: dimensions of the three lifting
/// procedures at degree two_d = 2^step.
#[derive(Debug, Clone)]
pub struct SizeRow {
    pub two_d: u64,
    /// Kronecker (tensor) power: n^{2d}.
    pub kron: BigUint,
    /// Iterated semidefinite lifting: s_{2k} = binom(s_k + 1, 2), s_1 = n.
    pub semidef: BigUint,
    /// Symmetric-algebra lift: binom(n + 2d - 1, 2d).
    pub symalg: BigUint,
}

/// Exact sizes of the three lifting procedures for two_d = 2, 4, ..., 2^steps.
/// Big-integer arithmetic keeps every entry exact; steps is capped at 20 to
/// keep the doubly exponential semidefinite column to a sane size.
pub fn lifting_size_table(n: usize, steps: usize) -> Result<Vec<SizeRow>, BoundsError> {
    if n == 0 {
        return Err(BoundsError::InvalidArgument("n must be at least 1".into()));
    }
    if steps == 0 || steps > 20 {
        return Err(BoundsError::InvalidArgument(format!("steps must lie in 1..=20, got {steps}")));
    }
    let mut rows = Vec::with_capacity(steps);
    let mut semidef = BigUint::from(n);
    for step in 1..=steps {
        let two_d: u64 = 1u64 << step;
        semidef = &semidef * (&semidef + 1u32) / 2u32;
        let kron = BigUint::from(n).pow(two_d as u32);
        let symalg_size = big_binomial(n as u64 + two_d - 1, (n as u64 - 1).min(two_d));
        rows.push(SizeRow { two_d, kron, semidef: semidef.clone(), symalg: symalg_size });
    }
    Ok(rows)
}

fn big_binomial(a: u64, b: u64) -> BigUint {
    let mut r = BigUint::from(1u32);
    for i in 1..=b {
        r = r * BigUint::from(a - b + i) / BigUint::from(i);
    }
    r
}
