//! Symmetric-algebra machinery: scaled monomial bases, vector lifts x -> x^[d],
//! induced matrices on the lifted space, and conversions between Gram-matrix
//! and coefficient representations of homogeneous polynomials.

use crate::linalg::DenseMatrix;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymalgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size limit exceeded: {what} requires {requested}, cap is {cap}")]
    SizeLimitExceeded { what: &'static str, requested: usize, cap: usize },
}

/// Binomial coefficient as usize; panics on overflow (callers cap sizes first).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i).expect("binomial overflow") / (i + 1);
    }
    acc
}

/// Basis of the space of homogeneous degree-`d` polynomials in `n` variables,
/// in the scaled monomial convention: basis element for exponent alpha is
/// sqrt(d!/prod(alpha_i!)) x^alpha. Exponent tuples are ordered
/// lexicographically descending, so for n=2, d=2 the order is
/// (2,0), (1,1), (0,2).
#[derive(Debug, Clone)]
pub struct LiftBasis {
    pub n: usize,
    pub d: usize,
    exponents: Vec<Vec<usize>>,
    scalings: Vec<f64>,
    index: HashMap<Vec<usize>, usize>,
}

impl LiftBasis {
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponent(&self, i: usize) -> &[usize] {
        &self.exponents[i]
    }

    pub fn exponents(&self) -> &[Vec<usize>] {
        &self.exponents
    }

    pub fn scaling(&self, i: usize) -> f64 {
        self.scalings[i]
    }

    pub fn position(&self, exponent: &[usize]) -> Option<usize> {
        self.index.get(exponent).copied()
    }
}

/// Enumerates the scaled monomial basis for degree `d` in `n` variables.
pub fn enumerate_basis(n: usize, d: usize) -> Result<LiftBasis, SymalgError> {
    if n == 0 {
        return Err(SymalgError::InvalidArgument("need at least one variable".into()));
    }
    if d == 0 {
        return Err(SymalgError::InvalidArgument("degree must be positive".into()));
    }
    let mut exponents = Vec::with_capacity(binomial(n + d - 1, d));
    let mut current = vec![0usize; n];
    fill_exponents(n, d, 0, &mut current, &mut exponents);
    let d_fact = factorial(d);
    let scalings: Vec<f64> = exponents.iter().map(|e| (d_fact / multiplicity(e)).sqrt()).collect();
    let index: HashMap<Vec<usize>, usize> =
        exponents.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
    Ok(LiftBasis { n, d, exponents, scalings, index })
}

// Descending lexicographic enumeration: the leading variable takes the
// largest remaining exponent first.
fn fill_exponents(
    n: usize,
    remaining: usize,
    pos: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill_exponents(n, remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// mu(alpha) = prod(alpha_i!).
fn multiplicity(exponent: &[usize]) -> f64 {
    exponent.iter().map(|&e| factorial(e)).product()
}

/// Lift of a vector: (x^[d])_alpha = sqrt(d!/mu(alpha)) x^alpha. Satisfies
/// ||x^[d]|| = ||x||^d.
pub fn lift_vector(x: &[f64], basis: &LiftBasis) -> Result<Vec<f64>, SymalgError> {
    if x.len() != basis.n {
        return Err(SymalgError::InvalidArgument(format!(
            "vector has {} entries, basis is over {} variables",
            x.len(),
            basis.n
        )));
    }
    Ok(basis.exponents.iter().zip(&basis.scalings).map(|(e, s)| s * monomial_value(x, e)).collect())
}

fn monomial_value(x: &[f64], exponent: &[usize]) -> f64 {
    x.iter().zip(exponent).map(|(&xi, &ei)| xi.powi(ei as i32)).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermanentMethod {
    /// Ryser's inclusion-exclusion formula with Gray-code subset updates,
    /// O(2^d d); usable up to d = 20.
    Ryser,
    /// Direct sum over permutations, O(d!); usable up to d = 8. Exists as an
    /// independent check on Ryser.
    Naive,
}

/// Permanent of a square matrix.
pub fn permanent(m: &DenseMatrix, method: PermanentMethod) -> Result<f64, SymalgError> {
    if !m.is_square() {
        return Err(SymalgError::InvalidArgument(format!(
            "permanent needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let d = m.rows();
    match method {
        PermanentMethod::Ryser => {
            if d > 20 {
                return Err(SymalgError::SizeLimitExceeded {
                    what: "Ryser permanent",
                    requested: d,
                    cap: 20,
                });
            }
            Ok(permanent_ryser(m))
        }
        PermanentMethod::Naive => {
            if d > 8 {
                return Err(SymalgError::SizeLimitExceeded {
                    what: "naive permanent",
                    requested: d,
                    cap: 8,
                });
            }
            Ok(permanent_naive(m))
        }
    }
}

// per(A) = (-1)^d sum_{nonempty S} (-1)^|S| prod_i sum_{j in S} a_ij,
// visiting subsets in Gray-code order so each step updates the row sums by a
// single column.
fn permanent_ryser(m: &DenseMatrix) -> f64 {
    let d = m.rows();
    if d == 0 {
        return 1.0;
    }
    let mut sums = vec![0.0f64; d];
    let mut total = 0.0;
    let mut prev_gray: usize = 0;
    for k in 1usize..(1 << d) {
        let gray = k ^ (k >> 1);
        let changed = gray ^ prev_gray;
        let j = changed.trailing_zeros() as usize;
        if gray & changed != 0 {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += m.get(i, j);
            }
        } else {
            for (i, s) in sums.iter_mut().enumerate() {
                *s -= m.get(i, j);
            }
        }
        prev_gray = gray;
        let prod: f64 = sums.iter().product();
        if (d - (gray.count_ones() as usize)).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

fn permanent_naive(m: &DenseMatrix) -> f64 {
    let d = m.rows();
    let mut cols: Vec<usize> = (0..d).collect();
    let mut total = 0.0;
    permute_and_sum(m, &mut cols, 0, &mut total);
    total
}

fn permute_and_sum(m: &DenseMatrix, cols: &mut Vec<usize>, row: usize, total: &mut f64) {
    let d = cols.len();
    if row == d {
        let prod: f64 = (0..d).map(|i| m.get(i, cols[i])).product();
        *total += prod;
        return;
    }
    for i in row..d {
        cols.swap(row, i);
        permute_and_sum(m, cols, row + 1, total);
        cols.swap(row, i);
    }
}

/// Matrix induced by `a` on the d-lifted space: entry (alpha, beta) equals
/// per A(alpha, beta) / sqrt(mu(alpha) mu(beta)), where A(alpha, beta) repeats
/// row i of `a` alpha_i times and column j beta_j times. The result satisfies
/// induced(a) x^[d] = (a x)^[d].
pub fn induced_matrix(a: &DenseMatrix, basis: &LiftBasis) -> Result<DenseMatrix, SymalgError> {
    if !a.is_square() || a.rows() != basis.n {
        return Err(SymalgError::InvalidArgument(format!(
            "matrix is {}x{}, basis is over {} variables",
            a.rows(),
            a.cols(),
            basis.n
        )));
    }
    let d = basis.d;
    if d > 20 {
        return Err(SymalgError::SizeLimitExceeded {
            what: "induced matrix degree",
            requested: d,
            cap: 20,
        });
    }
    let nb = basis.len();
    let row_indices: Vec<Vec<usize>> =
        basis.exponents.iter().map(|e| repeat_by_multiplicity(e)).collect();
    let mut out = DenseMatrix::zeros(nb, nb);
    let mut small = DenseMatrix::zeros(d.max(1), d.max(1));
    for (r, alpha) in basis.exponents.iter().enumerate() {
        let rows_of_a = &row_indices[r];
        let mu_a = multiplicity(alpha);
        for (c, beta) in basis.exponents.iter().enumerate() {
            let cols_of_a = &row_indices[c];
            for (ri, &ia) in rows_of_a.iter().enumerate() {
                for (ci, &ja) in cols_of_a.iter().enumerate() {
                    small.set(ri, ci, a.get(ia, ja));
                }
            }
            let per = permanent_ryser(&small);
            let mu_b = multiplicity(beta);
            out.set(r, c, per / (mu_a * mu_b).sqrt());
        }
    }
    Ok(out)
}

fn repeat_by_multiplicity(exponent: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, &e) in exponent.iter().enumerate() {
        out.extend(std::iter::repeat_n(i, e));
    }
    out
}

/// Homogeneous polynomial of degree `basis.d` stored as coefficients against
/// the scaled monomial basis, i.e. p(x) = sum_g coeffs[g] * (x^[d])_g.
#[derive(Debug, Clone)]
pub struct PolyCoeffs {
    pub basis: LiftBasis,
    pub coeffs: Vec<f64>,
}

impl PolyCoeffs {
    pub fn new(basis: LiftBasis, coeffs: Vec<f64>) -> Result<Self, SymalgError> {
        if coeffs.len() != basis.len() {
            return Err(SymalgError::InvalidArgument(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(PolyCoeffs { basis, coeffs })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, SymalgError> {
        let lifted = lift_vector(x, &self.basis)?;
        Ok(self.coeffs.iter().zip(&lifted).map(|(c, v)| c * v).sum())
    }

    /// Coefficient of the plain monomial x^g, i.e. coeffs[g] * scaling(g).
    pub fn monomial_coefficient(&self, exponent: &[usize]) -> Option<f64> {
        self.basis.position(exponent).map(|i| self.coeffs[i] * self.basis.scaling(i))
    }

    /// Builds the representation from plain-monomial coefficients.
    pub fn from_monomials(
        basis: LiftBasis,
        terms: &[(Vec<usize>, f64)],
    ) -> Result<Self, SymalgError> {
        let mut coeffs = vec![0.0; basis.len()];
        for (exp, c) in terms {
            let i = basis.position(exp).ok_or_else(|| {
                SymalgError::InvalidArgument(format!(
                    "exponent {exp:?} is not homogeneous of degree {} in {} variables",
                    basis.d, basis.n
                ))
            })?;
            coeffs[i] += c / basis.scaling(i);
        }
        PolyCoeffs::new(basis, coeffs)
    }
}

/// Coefficients of p(Ax) given those of p(x): since p(x) = <c, x^[d]> and
/// (Ax)^[d] = induced(A) x^[d], the new coefficient vector is induced(A)^T c.
pub fn compose_coeffs(p: &PolyCoeffs, a: &DenseMatrix) -> Result<PolyCoeffs, SymalgError> {
    let lifted = induced_matrix(a, &p.basis)?;
    let coeffs = lifted.transpose().matvec(&p.coeffs);
    PolyCoeffs::new(p.basis.clone(), coeffs)
}

/// Coefficients of the degree-2d polynomial (x^[d])^T Q x^[d], where Q is a
/// symmetric matrix over `gram_basis`. Entry g of the result is
/// sum over ordered pairs (alpha, beta) with alpha + beta = g of
/// Q[alpha][beta] s_alpha s_beta / s'_g.
pub fn gram_to_coeffs(
    q: &DenseMatrix,
    gram_basis: &LiftBasis,
    target: &LiftBasis,
) -> Result<PolyCoeffs, SymalgError> {
    if q.rows() != gram_basis.len() || q.cols() != gram_basis.len() {
        return Err(SymalgError::InvalidArgument(format!(
            "Gram matrix is {}x{}, basis has {} elements",
            q.rows(),
            q.cols(),
            gram_basis.len()
        )));
    }
    let table = gram_pair_table(gram_basis, target)?;
    let mut coeffs = vec![0.0; target.len()];
    for (g, pairs) in table.iter().enumerate() {
        coeffs[g] = pairs.iter().map(|&(i, j, w)| q.get(i, j) * w).sum();
    }
    PolyCoeffs::new(target.clone(), coeffs)
}

/// One row per target monomial: the ordered Gram index pairs contributing to
/// it, each with its weight.
pub(crate) type GramPairRows = Vec<Vec<(usize, usize, f64)>>;

/// For each element g of `target` (degree 2d), the ordered pairs (i, j) of
/// `gram_basis` elements (degree d) with exponent sum g, weighted by
/// s_i s_j / s'_g. Summing Q[i][j] * w over a row of this table yields the
/// scaled coefficient of g in (x^[d])^T Q x^[d].
pub(crate) fn gram_pair_table(
    gram_basis: &LiftBasis,
    target: &LiftBasis,
) -> Result<GramPairRows, SymalgError> {
    if target.n != gram_basis.n || target.d != 2 * gram_basis.d {
        return Err(SymalgError::InvalidArgument(format!(
            "target basis must have degree {} in {} variables",
            2 * gram_basis.d,
            gram_basis.n
        )));
    }
    let nb = gram_basis.len();
    let mut table: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); target.len()];
    let mut sum = vec![0usize; gram_basis.n];
    for i in 0..nb {
        for j in 0..nb {
            for (k, s) in sum.iter_mut().enumerate() {
                *s = gram_basis.exponents[i][k] + gram_basis.exponents[j][k];
            }
            let g = target
                .position(&sum)
                .expect("sum of two degree-d exponents is a degree-2d exponent");
            let w = gram_basis.scaling(i) * gram_basis.scaling(j) / target.scaling(g);
            table[g].push((i, j, w));
        }
    }
    Ok(table)
}

/// The symmetric matrices C_g with <C_g, Q> equal to coefficient g of
/// (x^[d])^T Q x^[d] against the degree-2d scaled basis: the Gram-to-
/// coefficient map Lambda as a list of Frobenius functionals.
pub(crate) fn coefficient_matrices(
    gram_basis: &LiftBasis,
    target: &LiftBasis,
) -> Result<Vec<DenseMatrix>, SymalgError> {
    let table = gram_pair_table(gram_basis, target)?;
    let nb = gram_basis.len();
    Ok(table
        .iter()
        .map(|pairs| {
            let mut c = DenseMatrix::zeros(nb, nb);
            for &(i, j, w) in pairs {
                c.add_to(i, j, w);
            }
            c
        })
        .collect())
}

/// Polynomial in plain (unscaled) monomials, used where a caller supplies an
/// explicit monomial list rather than a full homogeneous basis.
#[derive(Debug, Clone)]
pub struct MonomialPoly {
    pub n: usize,
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl MonomialPoly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * monomial_value(x, e)).sum()
    }
}

/// Expands m(x)^T Q m(x) for an explicit monomial list m (plain, unscaled
/// monomials), merging equal exponent sums.
pub fn gram_from_monomial_list(
    q: &DenseMatrix,
    monomials: &[Vec<usize>],
    n: usize,
) -> Result<MonomialPoly, SymalgError> {
    if q.rows() != monomials.len() || q.cols() != monomials.len() {
        return Err(SymalgError::InvalidArgument(format!(
            "Gram matrix is {}x{}, monomial list has {} entries",
            q.rows(),
            q.cols(),
            monomials.len()
        )));
    }
    if monomials.iter().any(|e| e.len() != n) {
        return Err(SymalgError::InvalidArgument(format!(
            "every monomial must have {n} exponents"
        )));
    }
    let mut acc: HashMap<Vec<usize>, f64> = HashMap::new();
    for (i, mi) in monomials.iter().enumerate() {
        for (j, mj) in monomials.iter().enumerate() {
            let sum: Vec<usize> = mi.iter().zip(mj).map(|(a, b)| a + b).collect();
            *acc.entry(sum).or_insert(0.0) += q.get(i, j);
        }
    }
    let mut terms: Vec<(Vec<usize>, f64)> = acc.into_iter().collect();
    terms.sort_by(|a, b| b.0.cmp(&a.0));
    Ok(MonomialPoly { n, terms })
}
