//! Dense linear-algebra kernels shared by the solvers.
//!
//! The factorizations here are written against `nalgebra`'s dynamic matrices.
//! The blocked Cholesky exists because the log-determinant path factors
//! matrices with thousands of rows per quadrature node; routing the trailing
//! updates through `gemm` keeps that at matrix-multiply speed and lets rayon
//! split the update across cores.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::{Error, Real, Result};

/// Width of the panel used by the blocked Cholesky.
const CHOL_PANEL: usize = 96;
/// Column-block width of the parallel trailing update.
const CHOL_UPDATE_BLOCK: usize = 192;

/// Lower-triangular Cholesky factor together with its log-determinant.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T: Real> {
    lower: DMatrix<T>,
    log_det: T,
}

impl<T: Real> CholeskyFactor<T> {
    /// Factor a symmetric positive-definite matrix as `L L^T`.
    ///
    /// Fails with [`Error::Numerical`] when a non-positive pivot is met,
    /// which is how callers detect loss of positive definiteness.
    pub fn new(a: &DMatrix<T>) -> Result<Self> {
        let mut l = a.clone();
        factor_lower_blocked(&mut l)?;
        let n = l.nrows();
        // compensated sum: the log-determinant difference downstream cancels
        // two large totals, so per-term rounding must stay tiny
        let mut log_det = T::zero();
        let mut comp = T::zero();
        for i in 0..n {
            let term = l[(i, i)].ln() - comp;
            let next = log_det + term;
            comp = (next - log_det) - term;
            log_det = next;
        }
        log_det *= T::c(2.0);
        // zero strict upper part so the factor can be used directly
        for j in 1..n {
            for i in 0..j {
                l[(i, j)] = T::zero();
            }
        }
        Ok(Self { lower: l, log_det })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log det(A) = 2 sum_i log L_ii`.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    pub fn lower(&self) -> &DMatrix<T> {
        &self.lower
    }

    /// Solve `A x = b` in place for each column of `b`.
    pub fn solve_in_place(&self, b: &mut DMatrix<T>) {
        solve_lower_in_place(&self.lower, b);
        solve_lower_transpose_in_place(&self.lower, b);
    }

    pub fn solve_vec(&self, b: &DVector<T>) -> DVector<T> {
        let mut x = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        self.solve_in_place(&mut x);
        DVector::from_column_slice(x.as_slice())
    }

    /// Forward substitution `L y = b`, overwriting `b`.
    pub fn solve_lower_in_place(&self, b: &mut DMatrix<T>) {
        solve_lower_in_place(&self.lower, b);
    }

    /// Back substitution `L^T x = b`, overwriting `b`.
    pub fn solve_lower_transpose_in_place(&self, b: &mut DMatrix<T>) {
        solve_lower_transpose_in_place(&self.lower, b);
    }
}

/// Blocked in-place lower Cholesky of the symmetric matrix stored in `a`.
fn factor_lower_blocked<T: Real>(a: &mut DMatrix<T>) -> Result<()> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut k = 0;
    while k < n {
        let w = CHOL_PANEL.min(n - k);
        factor_lower_unblocked(a, k, w)?;
        if k + w == n {
            break;
        }
        trsm_right_lower_transpose(a, k, w);
        trailing_update(a, k, w);
        k += w;
    }
    Ok(())
}

/// Unblocked Cholesky of the `w x w` diagonal block at `(k, k)`, updating the
/// panel below it is left to the caller.
fn factor_lower_unblocked<T: Real>(a: &mut DMatrix<T>, k: usize, w: usize) -> Result<()> {
    for j in k..k + w {
        let mut d = a[(j, j)];
        for p in k..j {
            d -= a[(j, p)] * a[(j, p)];
        }
        if d <= T::zero() {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let ljj = d.sqrt();
        a[(j, j)] = ljj;
        let inv = T::one() / ljj;
        for i in j + 1..k + w {
            let mut s = a[(i, j)];
            for p in k..j {
                s -= a[(i, p)] * a[(j, p)];
            }
            a[(i, j)] = s * inv;
        }
    }
    Ok(())
}

/// Compute `L21 = A21 L11^-T` for the panel below the freshly factored
/// diagonal block.
fn trsm_right_lower_transpose<T: Real>(a: &mut DMatrix<T>, k: usize, w: usize) {
    let n = a.nrows();
    for j in k..k + w {
        let inv = T::one() / a[(j, j)];
        for p in k..j {
            let ljp = a[(j, p)];
            if ljp != T::zero() {
                for i in k + w..n {
                    let v = a[(i, p)] * ljp;
                    a[(i, j)] -= v;
                }
            }
        }
        for i in k + w..n {
            a[(i, j)] *= inv;
        }
    }
}

/// `A22 -= L21 L21^T`, lower triangle only, split over column blocks.
fn trailing_update<T: Real>(a: &mut DMatrix<T>, k: usize, w: usize) {
    let n = a.nrows();
    let start = k + w;
    let m = n - start;
    // Snapshot of the panel L21 (m x w).
    let panel = a.view((start, k), (m, w)).into_owned();
    let nblocks = m.div_ceil(CHOL_UPDATE_BLOCK);

    // Column blocks of the trailing matrix are disjoint column ranges of the
    // backing storage, so the update parallelizes without locking.
    let ptr = SendPtr(a.as_mut_slice().as_mut_ptr());
    (0..nblocks).into_par_iter().for_each(|b| {
        let jb = b * CHOL_UPDATE_BLOCK;
        let cb = CHOL_UPDATE_BLOCK.min(m - jb);
        // rows jb.. of the panel times (rows jb..jb+cb of the panel)^T
        let rows = m - jb;
        let left = panel.view((jb, 0), (rows, w));
        let right = panel.view((jb, 0), (cb, w)).transpose();
        let mut prod = DMatrix::<T>::zeros(rows, cb);
        prod.gemm(T::one(), &left, &right, T::zero());
        let base = ptr.get();
        for c in 0..cb {
            let col = start + jb + c;
            unsafe {
                let colptr = base.add(col * n + start + jb);
                for r in 0..rows {
                    *colptr.add(r) -= prod[(r, c)];
                }
            }
        }
    });
}

struct SendPtr<T>(*mut T);
unsafe impl<T> Send for SendPtr<T> {}
unsafe impl<T> Sync for SendPtr<T> {}
impl<T> SendPtr<T> {
    fn get(&self) -> *mut T {
        self.0
    }
}

/// Forward substitution with a lower-triangular factor, multi-RHS.
pub fn solve_lower_in_place<T: Real>(l: &DMatrix<T>, b: &mut DMatrix<T>) {
    let n = l.nrows();
    for rhs in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[(i, rhs)];
            for p in 0..i {
                s -= l[(i, p)] * b[(p, rhs)];
            }
            b[(i, rhs)] = s / l[(i, i)];
        }
    }
}

/// Back substitution with the transpose of a lower-triangular factor.
pub fn solve_lower_transpose_in_place<T: Real>(l: &DMatrix<T>, b: &mut DMatrix<T>) {
    let n = l.nrows();
    for rhs in 0..b.ncols() {
        for ii in 0..n {
            let i = n - 1 - ii;
            let mut s = b[(i, rhs)];
            for p in i + 1..n {
                s -= l[(p, i)] * b[(p, rhs)];
            }
            b[(i, rhs)] = s / l[(i, i)];
        }
    }
}

/// `log |det A|` through a partially pivoted LU, for symmetric-indefinite
/// fallbacks. Returns the log of the absolute determinant and its sign.
pub fn lu_log_abs_det<T: Real>(a: &DMatrix<T>) -> Result<(T, i8)> {
    let lu = a.clone().lu();
    let n = a.nrows();
    let mut log = T::zero();
    let mut sign = 1i8;
    let u = lu.u();
    for i in 0..n {
        let d = u[(i, i)];
        if d == T::zero() {
            return Err(Error::Numerical("exactly singular matrix in LU".into()));
        }
        if d < T::zero() {
            sign = -sign;
        }
        log += d.abs().ln();
    }
    // each actual row swap flips the determinant sign
    let p = lu.p();
    if p.len() % 2 == 1 {
        sign = -sign;
    }
    Ok((log, sign))
}

/// Eigenpairs of the symmetric-definite pencil `(A, B)`: values ascending,
/// vectors B-orthonormal (`x^T B x = 1`).
///
/// When `B` is numerically rank-deficient the pencil is restricted to the
/// numerical range of `B` and the reduced dimension is reported.
pub struct PencilEigen<T: Real> {
    pub values: Vec<T>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: DMatrix<T>,
    /// Dimension actually solved (less than `A.nrows()` after rank reduction).
    pub dim: usize,
    pub rank_reduced: bool,
}

fn bounded_symmetric_eigen<T: Real>(
    m: DMatrix<T>,
) -> Result<nalgebra::linalg::SymmetricEigen<T, nalgebra::Dyn>> {
    let n = m.nrows().max(1);
    m.try_symmetric_eigen(T::default_epsilon(), 50 * n + 1000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver failed to converge".into()))
}

pub fn sym_pencil_eigen<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<PencilEigen<T>> {
    let n = a.nrows();
    if b.nrows() != n || a.ncols() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil blocks {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    match CholeskyFactor::new(b) {
        Ok(chol) => {
            // C = L^-1 A L^-T stays symmetric; its eigenvectors map back
            // through L^-T and come out B-orthonormal.
            let mut y = a.clone();
            chol.solve_lower_in_place(&mut y);
            let mut c = y.transpose();
            chol.solve_lower_in_place(&mut c);
            let c = symmetrize(&c);
            let se = bounded_symmetric_eigen(c)?;
            let mut x = se.eigenvectors.clone();
            chol.solve_lower_transpose_in_place(&mut x);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| {
                se.eigenvalues[i]
                    .partial_cmp(&se.eigenvalues[j])
                    .expect("NaN eigenvalue")
            });
            let values: Vec<T> = order.iter().map(|&i| se.eigenvalues[i]).collect();
            let mut vectors = DMatrix::zeros(n, n);
            for (c_out, &c_in) in order.iter().enumerate() {
                vectors.set_column(c_out, &x.column(c_in));
            }
            Ok(PencilEigen {
                values,
                vectors,
                dim: n,
                rank_reduced: false,
            })
        }
        Err(_) => {
            // Restrict to the numerically positive eigenspace of B.
            let se_b = bounded_symmetric_eigen(symmetrize(b))?;
            let max = se_b
                .eigenvalues
                .iter()
                .fold(T::zero(), |m, &v| if v > m { v } else { m });
            if max <= T::zero() {
                return Err(Error::Numerical(
                    "projected metric matrix has no positive directions".into(),
                ));
            }
            let tol = max * T::c(1e-12);
            let keep: Vec<usize> = (0..n).filter(|&i| se_b.eigenvalues[i] > tol).collect();
            let r = keep.len();
            let mut basis = DMatrix::zeros(n, r);
            for (c_out, &c_in) in keep.iter().enumerate() {
                let scale = T::one() / se_b.eigenvalues[c_in].sqrt();
                basis.set_column(c_out, &(se_b.eigenvectors.column(c_in) * scale));
            }
            // reduced problem is an ordinary symmetric eigenproblem
            let ar = symmetrize(&(basis.transpose() * a * &basis));
            let se = bounded_symmetric_eigen(ar)?;
            let mut order: Vec<usize> = (0..r).collect();
            order.sort_by(|&i, &j| {
                se.eigenvalues[i]
                    .partial_cmp(&se.eigenvalues[j])
                    .expect("NaN eigenvalue")
            });
            let values: Vec<T> = order.iter().map(|&i| se.eigenvalues[i]).collect();
            let full = &basis * &se.eigenvectors;
            let mut vectors = DMatrix::zeros(n, r);
            for (c_out, &c_in) in order.iter().enumerate() {
                vectors.set_column(c_out, &full.column(c_in));
            }
            Ok(PencilEigen {
                values,
                vectors,
                dim: r,
                rank_reduced: true,
            })
        }
    }
}

pub fn symmetrize<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    let half = T::c(0.5);
    let mut s = a.clone();
    for j in 0..a.ncols() {
        for i in 0..j {
            let v = (a[(i, j)] + a[(j, i)]) * half;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Orthonormalize `v` against the first `k` columns of `basis` by modified
/// Gram-Schmidt with one reorthogonalization pass. Returns the remaining
/// norm; `v` is normalized when that norm is nonzero.
pub fn orthonormalize_against<T: Real>(basis: &DMatrix<T>, k: usize, v: &mut DVector<T>) -> T {
    for _ in 0..2 {
        for j in 0..k {
            let col = basis.column(j);
            let c = col.dot(v);
            v.axpy(-c, &col.into_owned(), T::one());
        }
    }
    let norm = v.norm();
    if norm > T::zero() {
        *v /= norm;
    }
    norm
}

/// Eigenvalues of an upper-Hessenberg matrix by the Francis double-shift QR
/// iteration with deflation (EISPACK `hqr`). Iteration counts are bounded,
/// so this cannot spin on hard matrices.
pub fn hessenberg_eigenvalues<T: Real>(h: &DMatrix<T>) -> Result<Vec<nalgebra::Complex<T>>> {
    use nalgebra::Complex;
    let n = h.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = h.clone();
    let mut eig = vec![Complex::new(T::zero(), T::zero()); n];
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == T::zero() {
        return Ok(eig);
    }
    let eps = T::default_epsilon();
    let mut nn = n as isize - 1;
    let mut t = T::zero();
    'outer: while nn >= 0 {
        let mut its = 0usize;
        loop {
            // look for a negligible subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = a[(l as usize - 1, l as usize - 1)].abs()
                    + a[(l as usize, l as usize)].abs();
                let s = if s == T::zero() { anorm } else { s };
                if a[(l as usize, l as usize - 1)].abs() <= eps * s {
                    a[(l as usize, l as usize - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let x = a[(nn as usize, nn as usize)];
            if l == nn {
                // single real root
                eig[nn as usize] = Complex::new(x + t, T::zero());
                nn -= 1;
                continue 'outer;
            }
            let y = a[(nn as usize - 1, nn as usize - 1)];
            let w = a[(nn as usize, nn as usize - 1)] * a[(nn as usize - 1, nn as usize)];
            if l == nn - 1 {
                // 2x2 block: real pair or complex conjugate pair
                let p = (y - x) * T::c(0.5);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x_t = x + t;
                if q >= T::zero() {
                    let z = if p >= T::zero() { p + z } else { p - z };
                    eig[nn as usize - 1] = Complex::new(x_t + z, T::zero());
                    eig[nn as usize] = if z != T::zero() {
                        Complex::new(x_t - w / z, T::zero())
                    } else {
                        Complex::new(x_t + z, T::zero())
                    };
                } else {
                    eig[nn as usize - 1] = Complex::new(x_t + p, z);
                    eig[nn as usize] = Complex::new(x_t + p, -z);
                }
                nn -= 2;
                continue 'outer;
            }
            if its >= 60 {
                return Err(Error::Numerical(
                    "Hessenberg QR iteration failed to converge".into(),
                ));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    a[(i, i)] -= x;
                }
                let s = a[(nn as usize, nn as usize - 1)].abs()
                    + a[(nn as usize - 1, nn as usize - 2)].abs();
                x = T::c(0.75) * s;
                y = x;
                w = T::c(-0.4375) * s * s;
            }
            its += 1;
            // two consecutive small subdiagonals
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (T::zero(), T::zero(), T::zero());
            while m >= l {
                let z = a[(m as usize, m as usize)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m as usize + 1, m as usize)] + a[(m as usize, m as usize + 1)];
                q = a[(m as usize + 1, m as usize + 1)] - z - rr - ss;
                r = a[(m as usize + 2, m as usize + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m as usize, m as usize - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[(m as usize - 1, m as usize - 1)].abs()
                        + z.abs()
                        + a[(m as usize + 1, m as usize + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[(i as usize, i as usize - 2)] = T::zero();
                if i > m + 2 {
                    a[(i as usize, i as usize - 3)] = T::zero();
                }
            }
            // double QR sweep over rows m..nn
            for k in m..=(nn - 1) {
                let ku = k as usize;
                if k != m {
                    p = a[(ku, ku - 1)];
                    q = a[(ku + 1, ku - 1)];
                    r = if k != nn - 1 {
                        a[(ku + 2, ku - 1)]
                    } else {
                        T::zero()
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x == T::zero() {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                let s = {
                    let m2 = (p * p + q * q + r * r).sqrt();
                    if p >= T::zero() {
                        m2
                    } else {
                        -m2
                    }
                };
                if s == T::zero() {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(ku, ku - 1)] = -a[(ku, ku - 1)];
                    }
                } else {
                    a[(ku, ku - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                // row modification
                for j in ku..=(nn as usize) {
                    let pp = a[(ku, j)] + q * a[(ku + 1, j)]
                        + if k != nn - 1 { r * a[(ku + 2, j)] } else { T::zero() };
                    a[(ku, j)] -= pp * x;
                    a[(ku + 1, j)] -= pp * y;
                    if k != nn - 1 {
                        a[(ku + 2, j)] -= pp * z;
                    }
                }
                // column modification
                let upper = if nn < k + 3 { nn as usize } else { ku + 3 };
                for i in (l as usize)..=upper {
                    let pp = x * a[(i, ku)] + y * a[(i, ku + 1)]
                        + if k != nn - 1 { z * a[(i, ku + 2)] } else { T::zero() };
                    a[(i, ku)] -= pp;
                    a[(i, ku + 1)] -= pp * q;
                    if k != nn - 1 {
                        a[(i, ku + 2)] -= pp * r;
                    }
                }
            }
        }
    }
    Ok(eig)
}

/// Right eigenvector of `h` for the (possibly complex) eigenvalue `lambda`,
/// by two steps of inverse iteration on the shifted matrix.
pub fn hessenberg_eigenvector<T: Real>(
    h: &DMatrix<T>,
    lambda: nalgebra::Complex<T>,
) -> (DVector<T>, DVector<T>) {
    use nalgebra::Complex;
    let n = h.nrows();
    // tiny shift keeps the shifted matrix invertible for converged values
    let scale = h.iter().fold(T::zero(), |m, &v| if v.abs() > m { v.abs() } else { m });
    let eps = scale * T::c(1e-13) + T::c(1e-300);
    let mut shifted = DMatrix::<Complex<T>>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            shifted[(i, j)] = Complex::new(h[(i, j)], T::zero());
        }
        shifted[(j, j)] -= lambda + Complex::new(eps, eps);
    }
    let lu = shifted.lu();
    let mut y = DVector::<Complex<T>>::from_element(n, Complex::new(T::one(), T::zero()));
    y /= Complex::new(T::c((n as f64).sqrt()), T::zero());
    for _ in 0..2 {
        if let Some(sol) = lu.solve(&y) {
            let norm = sol.norm();
            if norm > T::zero() && norm.is_finite() {
                y = sol / Complex::new(norm, T::zero());
            }
        }
    }
    (y.map(|c| c.re), y.map(|c| c.im))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[0, 1]`,
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre_01<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    // map [-1,1] -> [0,1]
    let nodes = nodes.iter().map(|&x| T::c(0.5 * (x + 1.0))).collect();
    let weights = weights.iter().map(|&w| T::c(0.5 * w)).collect();
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
