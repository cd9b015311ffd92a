//! Dense real linear algebra: matrix storage, LU solves, and eigenvalue
//! computations (general via balanced Hessenberg QR, symmetric via
//! tridiagonalization). Everything is f64 and deterministic.

// The factorization kernels index several parallel arrays from one loop
// counter; iterator rewrites obscure the recurrences they implement.
#![allow(clippy::needless_range_loop)]

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("relative tolerance {0} outside (0, 1e-2]")]
    InvalidTolerance(f64),
    #[error("matrix is singular to working precision (pivot {pivot:.3e} in column {col})")]
    Singular { pivot: f64, col: usize },
    #[error("matrix is not symmetric (max asymmetry {0:.3e} exceeds tolerance)")]
    NotSymmetric(f64),
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(LinalgError::DimensionMismatch("empty matrix".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(DenseMatrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o += b;
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o -= b;
        }
        out
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= c;
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product <A, B> = sum_ij A_ij B_ij.
    pub fn dot(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&self) -> DenseMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
            }
        }
        out
    }
}

fn require_square(m: &DenseMatrix) -> Result<usize, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(m.rows)
}

/// Eigenvalues of a general real square matrix as (re, im) pairs, computed by
/// balancing, Householder reduction to Hessenberg form, and the implicitly
/// shifted double QR iteration. Order is as produced by the deflation.
pub fn eigenvalues(m: &DenseMatrix) -> Result<Vec<(f64, f64)>, LinalgError> {
    let n = require_square(m)?;
    if n == 1 {
        return Ok(vec![(m.get(0, 0), 0.0)]);
    }
    let mut h = m.clone();
    balance(&mut h);
    hessenberg(&mut h);
    francis_qr(&mut h)
}

/// Largest eigenvalue modulus of a square matrix.
///
/// `rel_tol` is the accepted relative error and must lie in (0, 1e-2]; the
/// iteration itself converges to machine precision, so the parameter acts as
/// a validated contract rather than a knob.
pub fn spectral_radius(m: &DenseMatrix, rel_tol: f64) -> Result<f64, LinalgError> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(LinalgError::InvalidTolerance(rel_tol));
    }
    let eig = eigenvalues(m)?;
    Ok(eig.iter().map(|&(re, im)| re.hypot(im)).fold(0.0, f64::max))
}

/// Solves M x = b by LU factorization with partial pivoting.
pub fn solve_linear(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = require_square(m)?;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} entries, matrix is {}x{}",
            b.len(),
            n,
            n
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = m.max_abs().max(1.0);
    for k in 0..n {
        let mut p = k;
        let mut best = lu.get(k, k).abs();
        for i in (k + 1)..n {
            let v = lu.get(i, k).abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= f64::EPSILON * (n as f64) * scale {
            return Err(LinalgError::Singular { pivot: best, col: k });
        }
        if p != k {
            for j in 0..n {
                let a = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, a);
            }
            perm.swap(k, p);
        }
        let piv = lu.get(k, k);
        for i in (k + 1)..n {
            let f = lu.get(i, k) / piv;
            lu.set(i, k, f);
            if f != 0.0 {
                for j in (k + 1)..n {
                    lu.add_to(i, j, -f * lu.get(k, j));
                }
            }
        }
    }
    let mut x: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
    for i in 1..n {
        let mut s = x[i];
        for j in 0..i {
            s -= lu.get(i, j) * x[j];
        }
        x[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= lu.get(i, j) * x[j];
        }
        x[i] = s / lu.get(i, i);
    }
    Ok(x)
}

/// Minimum eigenvalue of a symmetric matrix. Rejects inputs whose asymmetry
/// exceeds 1e-12 relative to the largest entry; the remainder is symmetrized
/// before the tridiagonal iteration.
pub fn min_eig_symmetric(s: &DenseMatrix) -> Result<f64, LinalgError> {
    let vals = symmetric_eigenvalues(s)?;
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(s: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    let (vals, _) = symmetric_eigen_inner(s, false)?;
    Ok(vals)
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
/// orthogonal matrix of column eigenvectors.
pub(crate) fn symmetric_eigen(s: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), LinalgError> {
    let (vals, vecs) = symmetric_eigen_inner(s, true)?;
    Ok((vals, vecs.expect("eigenvectors requested")))
}

fn symmetric_eigen_inner(
    s: &DenseMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<DenseMatrix>), LinalgError> {
    let n = require_square(s)?;
    let asym = s.max_asymmetry();
    if asym > 1e-12 * (1.0 + s.max_abs()) {
        return Err(LinalgError::NotSymmetric(asym));
    }
    let mut v = s.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, want_vectors);
    tql2(&mut v, &mut d, &mut e, want_vectors)?;
    Ok((d, want_vectors.then_some(v)))
}

/// Cholesky factor L (lower triangular, S = L L^T), or None when S is not
/// positive definite to working precision.
pub(crate) fn cholesky(s: &DenseMatrix) -> Option<DenseMatrix> {
    let n = s.rows();
    if !s.is_square() {
        return None;
    }
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = s.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            diag -= v * v;
        }
        if !(diag.is_finite() && diag > 0.0) {
            return None;
        }
        let dj = diag.sqrt();
        l.set(j, j, dj);
        for i in (j + 1)..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / dj);
        }
    }
    Some(l)
}

/// Solves L y = b for lower-triangular L.
pub(crate) fn forward_sub(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for j in 0..i {
            s -= l.get(i, j) * y[j];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Solves L^T x = y for lower-triangular L.
pub(crate) fn backward_sub_t(l: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = y.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= l.get(j, i) * x[j];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

// ── Balancing ────────────────────────────────────────────────────────────

// Iterative diagonal similarity scaling with radix-2 factors so that row and
// column norms agree; eigenvalues are unchanged and the QR iteration sees a
// better conditioned matrix.
fn balance(a: &mut DenseMatrix) {
    let n = a.rows();
    let radix = 2.0f64;
    let sqrdx = radix * radix;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a.get(j, i).abs();
                    r += a.get(i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 && c.is_finite() && r.is_finite() {
                let mut g = r / radix;
                let mut f = 1.0;
                let s = c + r;
                let mut c2 = c;
                while c2 < g {
                    f *= radix;
                    c2 *= sqrdx;
                }
                g = r * radix;
                while c2 > g {
                    f /= radix;
                    c2 /= sqrdx;
                }
                if (c2 + r) / f < 0.95 * s && f != 1.0 {
                    done = false;
                    for j in 0..n {
                        let v = a.get(i, j) / f;
                        a.set(i, j, v);
                    }
                    for j in 0..n {
                        let v = a.get(j, i) * f;
                        a.set(j, i, v);
                    }
                }
            }
        }
    }
}

// ── Hessenberg reduction ─────────────────────────────────────────────────

// Householder reduction to upper Hessenberg form, in place. Eigenvectors are
// never needed here so the transform is not accumulated.
fn hessenberg(h: &mut DenseMatrix) {
    let n = h.rows();
    if n <= 2 {
        return;
    }
    let mut ort = vec![0.0; n];
    for m in 1..(n - 1) {
        let mut scale = 0.0;
        for i in m..n {
            scale += h.get(i, m - 1).abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..n).rev() {
            ort[i] = h.get(i, m - 1) / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;
        // Apply the Householder similarity transform: H <- (I-uu'/h) H (I-uu'/h).
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h.get(i, j);
            }
            f /= hsum;
            for i in m..n {
                h.add_to(i, j, -f * ort[i]);
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * h.get(i, j);
            }
            f /= hsum;
            for j in m..n {
                h.add_to(i, j, -f * ort[j]);
            }
        }
        h.set(m, m - 1, scale * g);
        for i in (m + 1)..n {
            h.set(i, m - 1, 0.0);
        }
    }
}

// ── Francis double-shift QR ──────────────────────────────────────────────

// Eigenvalues of an upper Hessenberg matrix by the implicit double-shift QR
// iteration with deflation, following the classic EISPACK hqr organization.
fn francis_qr(h: &mut DenseMatrix) -> Result<Vec<(f64, f64)>, LinalgError> {
    let nn = h.rows();
    let mut eig = vec![(0.0, 0.0); nn];
    let eps = f64::EPSILON;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h.get(i, j).abs();
        }
    }
    if norm == 0.0 {
        return Ok(eig);
    }

    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut s, mut z): (f64, f64);
    let (mut x, mut y, mut w): (f64, f64, f64);

    while n >= 0 {
        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > 0 {
            s = h.get(l as usize - 1, l as usize - 1).abs() + h.get(l as usize, l as usize).abs();
            if s == 0.0 {
                s = norm;
            }
            if h.get(l as usize, l as usize - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            let v = h.get(n as usize, n as usize) + exshift;
            eig[n as usize] = (v, 0.0);
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found (real pair or complex conjugates).
            let nu = n as usize;
            w = h.get(nu, nu - 1) * h.get(nu - 1, nu);
            p = (h.get(nu - 1, nu - 1) - h.get(nu, nu)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h.get(nu, nu) + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let e1 = x + z;
                let e2 = if z != 0.0 { x - w / z } else { e1 };
                eig[nu - 1] = (e1, 0.0);
                eig[nu] = (e2, 0.0);
            } else {
                eig[nu - 1] = (x + p, z);
                eig[nu] = (x + p, -z);
            }
            n -= 2;
            iter = 0;
        } else {
            // Form shift.
            let nu = n as usize;
            let lu = l as usize;
            x = h.get(nu, nu);
            y = h.get(nu - 1, nu - 1);
            w = h.get(nu, nu - 1) * h.get(nu - 1, nu);

            if iter == 10 || iter == 20 {
                // Exceptional shift.
                exshift += x;
                for i in lu..=nu {
                    let v = h.get(i, i) - x;
                    h.set(i, i, v);
                }
                s = h.get(nu, nu - 1).abs() + h.get(nu - 1, nu - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence);
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            while m >= l {
                let mu = m as usize;
                z = h.get(mu, mu);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h.get(mu + 1, mu) + h.get(mu, mu + 1);
                q = h.get(mu + 1, mu + 1) - z - r - s;
                r = h.get(mu + 2, mu + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h.get(mu, mu - 1).abs() * (q.abs() + r.abs());
                let rhs =
                    p.abs() * (h.get(mu - 1, mu - 1).abs() + z.abs() + h.get(mu + 1, mu + 1).abs());
                if lhs < eps * rhs {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in (mu + 2)..=nu {
                h.set(i, i - 2, 0.0);
                if i > mu + 2 {
                    h.set(i, i - 3, 0.0);
                }
            }

            // Double QR step on rows l..n and columns m..n; p, q, r carry
            // the shift column from the search above into the first step.
            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h.get(k, k - 1);
                    q = h.get(k + 1, k - 1);
                    r = if notlast { h.get(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != mu {
                        h.set(k, k - 1, -s * x);
                    } else if l != m {
                        let v = -h.get(k, k - 1);
                        h.set(k, k - 1, v);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    // Row modification.
                    for j in k..nn {
                        let mut f = h.get(k, j) + q * h.get(k + 1, j);
                        if notlast {
                            f += r * h.get(k + 2, j);
                            h.add_to(k + 2, j, -f * z);
                        }
                        h.add_to(k + 1, j, -f * y);
                        h.add_to(k, j, -f * x);
                        let _ = f;
                    }

                    // Column modification.
                    let upper = if n < k as isize + 3 { n as usize } else { k + 3 };
                    for i in 0..=upper {
                        let mut f = x * h.get(i, k) + y * h.get(i, k + 1);
                        if notlast {
                            f += z * h.get(i, k + 2);
                            h.add_to(i, k + 2, -f * r);
                        }
                        h.add_to(i, k + 1, -f * q);
                        h.add_to(i, k, -f);
                        let _ = f;
                    }
                }
            }
        }
    }
    Ok(eig)
}

// ── Symmetric path ───────────────────────────────────────────────────────

// Householder tridiagonalization; when vectors are requested, v accumulates
// the transform, otherwise only d (diagonal) and e (subdiagonal) matter.
fn tred2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    let n = v.rows();
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
                v.set(j, i, 0.0);
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.get(j, j) * f;
                for k in (j + 1)..i {
                    g += v.get(k, j) * d[k];
                    e[k] += v.get(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let val = v.get(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, val);
                }
                d[j] = v.get(i - 1, j);
                v.set(i, j, 0.0);
            }
        }
        d[i] = h;
    }

    if want_vectors {
        // Accumulate the Householder transforms into v; the tridiagonal
        // diagonal is stashed into row n-1 before each column is rebuilt.
        for i in 0..(n - 1) {
            v.set(n - 1, i, v.get(i, i));
            v.set(i, i, 1.0);
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v.get(k, i + 1) / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v.get(k, i + 1) * v.get(k, j);
                    }
                    for k in 0..=i {
                        let val = v.get(k, j) - g * d[k];
                        v.set(k, j, val);
                    }
                }
            }
            for k in 0..=i {
                v.set(k, i + 1, 0.0);
            }
        }
        for j in 0..n {
            d[j] = v.get(n - 1, j);
            v.set(n - 1, j, 0.0);
        }
        v.set(n - 1, n - 1, 1.0);
    } else {
        // Without accumulation the reduced diagonal still sits on v's
        // diagonal; read it directly.
        for j in 0..n {
            d[j] = v.get(j, j);
        }
    }
    e[0] = 0.0;
}

// Symmetric tridiagonal QL iteration with implicit shifts.
fn tql2(
    v: &mut DenseMatrix,
    d: &mut [f64],
    e: &mut [f64],
    want_vectors: bool,
) -> Result<(), LinalgError> {
    let n = v.rows();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 50 {
                    return Err(LinalgError::NoConvergence);
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if want_vectors {
                        for k in 0..n {
                            h = v.get(k, i + 1);
                            v.set(k, i + 1, s * v.get(k, i) + c * h);
                            v.set(k, i, c * v.get(k, i) - s * h);
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Sort eigenvalues (and vectors) ascending.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if want_vectors {
                for j in 0..n {
                    let t = v.get(j, i);
                    v.set(j, i, v.get(j, k));
                    v.set(j, k, t);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn spectral_radius_one_by_one_is_abs() {
        let m = mat(&[&[-3.5]]);
        assert_eq!(spectral_radius(&m, 1e-10).unwrap(), 3.5);
    }

    #[test]
    fn spectral_radius_column_projector() {
        let m = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let r = spectral_radius(&m, 1e-10).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn spectral_radius_lifted_pair_sum() {
        let s = 2.0f64.sqrt();
        let m = mat(&[&[1.0, 0.0, 1.0], &[s, 0.0, -s], &[1.0, 0.0, 1.0]]);
        let r = spectral_radius(&m, 1e-10).unwrap();
        assert!((r - 2.0).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn spectral_radius_rotation_keeps_modulus() {
        // Complex pair 0.6 +- 0.8i has modulus exactly 1.
        let m = mat(&[&[0.6, -0.8], &[0.8, 0.6]]);
        let r = spectral_radius(&m, 1e-10).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn spectral_radius_rejects_bad_tolerance() {
        let m = mat(&[&[1.0]]);
        assert!(matches!(spectral_radius(&m, 0.0), Err(LinalgError::InvalidTolerance(_))));
        assert!(matches!(spectral_radius(&m, 0.5), Err(LinalgError::InvalidTolerance(_))));
    }

    #[test]
    fn solve_scalar_system() {
        let m = mat(&[&[0.75]]);
        let x = solve_linear(&m, &[1.0]).unwrap();
        assert!((x[0] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn solve_reports_singularity() {
        let m = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(solve_linear(&m, &[1.0, 1.0]), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn solve_residual_is_small() {
        let m = mat(&[&[4.0, 1.0, -2.0], &[1.0, 5.0, 0.5], &[-2.0, 0.5, 6.0]]);
        let b = [1.0, -2.0, 3.0];
        let x = solve_linear(&m, &b).unwrap();
        let r = m.matvec(&x);
        let bn = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() <= 1e-9 * (1.0 + bn));
        }
    }

    #[test]
    fn min_eig_quartic_gram_matrix_is_psd() {
        let m = mat(&[&[2.0, -3.0, 1.0], &[-3.0, 5.0, 0.0], &[1.0, 0.0, 5.0]]);
        let v = min_eig_symmetric(&m).unwrap();
        assert!(v >= -1e-10, "got {v}");
        assert!(v <= 1e-10, "this matrix is singular, got {v}");
    }

    #[test]
    fn min_eig_exchange_matrix() {
        let m = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let v = min_eig_symmetric(&m).unwrap();
        assert!((v + 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_eig_rejects_asymmetric() {
        let m = mat(&[&[0.0, 1.0], &[0.5, 0.0]]);
        assert!(matches!(min_eig_symmetric(&m), Err(LinalgError::NotSymmetric(_))));
    }

    #[test]
    fn shift_moves_min_eig_by_t() {
        let s = mat(&[&[2.0, -1.0, 0.3], &[-1.0, 1.5, 0.2], &[0.3, 0.2, -0.7]]);
        let base = min_eig_symmetric(&s).unwrap();
        let t = 0.37;
        let shifted = s.add(&DenseMatrix::identity(3).scale(t));
        let moved = min_eig_symmetric(&shifted).unwrap();
        assert!((moved - (base + t)).abs() < 1e-12);
    }

    #[test]
    fn cholesky_round_trip() {
        let s = mat(&[&[4.0, 2.0, 0.6], &[2.0, 5.0, 1.0], &[0.6, 1.0, 3.0]]);
        let l = cholesky(&s).unwrap();
        let back = l.matmul(&l.transpose());
        assert!(back.sub(&s).max_abs() < 1e-14);
        let not_pd = mat(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(cholesky(&not_pd).is_none());
    }

    #[test]
    fn triangular_solves_invert_cholesky() {
        let s = mat(&[&[4.0, 2.0], &[2.0, 5.0]]);
        let l = cholesky(&s).unwrap();
        let b = [1.0, -2.0];
        let y = forward_sub(&l, &b);
        let x = backward_sub_t(&l, &y);
        let r = s.matvec(&x);
        assert!((r[0] - b[0]).abs() < 1e-14 && (r[1] - b[1]).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_defective_block() {
        // Jordan block: double eigenvalue 2, no diagonalization possible.
        let m = mat(&[&[2.0, 1.0], &[0.0, 2.0]]);
        let mut eig = eigenvalues(&m).unwrap();
        eig.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (re, im) in eig {
            assert!((re - 2.0).abs() < 1e-8 && im.abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant() {
        let m = mat(&[&[1.0, 4.0, -2.0], &[0.5, -3.0, 1.0], &[2.0, 0.0, 2.5]]);
        let eig = eigenvalues(&m).unwrap();
        let tr: f64 = eig.iter().map(|e| e.0).sum();
        assert!((tr - m.trace()).abs() < 1e-10);
        // Product of eigenvalues = determinant (complex product stays real).
        let (mut re, mut im) = (1.0, 0.0);
        for (a, b) in eig {
            let nre = re * a - im * b;
            im = re * b + im * a;
            re = nre;
        }
        // det by cofactor expansion
        let det = 1.0 * (-3.0 * 2.5 - 1.0 * 0.0) - 4.0 * (0.5 * 2.5 - 1.0 * 2.0)
            + (-2.0) * (0.5 * 0.0 - (-3.0) * 2.0);
        assert!((re - det).abs() < 1e-9 && im.abs() < 1e-9);
    }
}
