//! Standard Arnoldi iteration on `M = Vt^-1 V`.
//!
//! Each application of `M` is one forward product with `V` plus one factored
//! solve with `Vt` (two counted operations). A subspace of dimension `m`
//! costs `m` applications for the square Hessenberg projection, and explicit
//! residuals for the `m - 2` most extremal Ritz pairs cost `m - 2` more, so
//! a full call spends exactly `4m - 4` counted operations. The remaining two
//! pairs keep the free Arnoldi-relation residual bound.

use nalgebra::{DMatrix, DVector};

use super::{EigenPairSet, OperatorPair};
use crate::linalg::{hessenberg_eigenvalues, hessenberg_eigenvector};
use crate::{Error, Real, Result};

pub fn arnoldi_eigs<T: Real>(
    pair: &OperatorPair<'_, T>,
    m: usize,
    start: &DVector<T>,
) -> Result<EigenPairSet<T>> {
    let n = pair.dim();
    if m < 1 || m > n {
        return Err(Error::Config(format!(
            "Krylov dimension m={m} must satisfy 1 <= m <= n={n}"
        )));
    }
    if start.len() != n || start.norm() == T::zero() {
        return Err(Error::Config("start vector must be nonzero of matching dimension".into()));
    }
    let chol = pair.vt_factor()?;

    let mut basis = DMatrix::<T>::zeros(n, m);
    basis.set_column(0, &(start / start.norm()));
    let mut h = DMatrix::<T>::zeros(m, m);
    let mut overflow = T::zero();
    let mut scale = T::zero();
    let mut m_eff = m;
    let mut broke_down = false;

    for j in 0..m {
        let vj = basis.column(j).into_owned();
        let mut w = chol.solve_vec(&pair.v.matvec(&vj)?)?;
        if j == 0 {
            scale = w.norm();
        }
        // modified Gram-Schmidt with one reorthogonalization pass
        for _ in 0..2 {
            for i in 0..=j {
                let c = basis.column(i).dot(&w);
                h[(i, j)] += c;
                w.axpy(-c, &basis.column(i), T::one());
            }
        }
        let beta = w.norm();
        if j + 1 < m {
            if beta <= scale * T::c(1e-14) {
                // happy breakdown: the Krylov space is invariant and the
                // Ritz pairs of the square block are exact
                m_eff = j + 1;
                broke_down = true;
                break;
            }
            basis.set_column(j + 1, &(w / beta));
            h[(j + 1, j)] = beta;
        } else {
            overflow = beta;
        }
    }

    let h_eff = h.view((0, 0), (m_eff, m_eff)).into_owned();
    let eigs = hessenberg_eigenvalues(&h_eff)?;
    let basis_eff = basis.view((0, 0), (n, m_eff));

    // Ritz vectors for every eigenvalue; a complex conjugate pair yields the
    // real and imaginary parts as two real basis vectors for its plane.
    let im_tol = T::c(1e-12);
    let mut values = Vec::with_capacity(m_eff);
    let mut vectors = DMatrix::<T>::zeros(n, m_eff);
    let mut relation_resid = Vec::with_capacity(m_eff);
    let mut is_complex = vec![false; m_eff];
    let mut partner = vec![usize::MAX; m_eff];
    let mut re_part = vec![(T::zero(), T::zero()); m_eff];
    let mut dropped = 0usize;
    let mut complex_count = 0usize;
    for lam in eigs.iter() {
        let magnitude = (lam.re * lam.re + lam.im * lam.im).sqrt();
        let complex = lam.im.abs() > im_tol * magnitude.max(T::one());
        let value = if complex { magnitude } else { lam.re };
        if value <= T::zero() {
            dropped += 1;
            continue;
        }
        let (yre, yim) = hessenberg_eigenvector(&h_eff, *lam);
        let y = if complex && lam.im < T::zero() {
            &yim
        } else {
            &yre
        };
        let tail = (yre[m_eff - 1] * yre[m_eff - 1] + yim[m_eff - 1] * yim[m_eff - 1]).sqrt();
        let mut x = basis_eff * y;
        let xn = x.norm();
        if xn > T::zero() {
            x /= xn;
        }
        let slot = values.len();
        vectors.set_column(slot, &x);
        values.push(value);
        relation_resid.push(overflow * tail);
        is_complex[slot] = complex;
        re_part[slot] = (lam.re, lam.im.abs());
        if complex {
            complex_count += 1;
        }
    }
    let kept = values.len();
    // pair up complex conjugates among kept slots
    for a in 0..kept {
        if is_complex[a] && partner[a] == usize::MAX {
            for b in a + 1..kept {
                if is_complex[b]
                    && partner[b] == usize::MAX
                    && (re_part[a].0 - re_part[b].0).abs()
                        <= T::c(1e-10) * (T::one() + re_part[a].0.abs())
                    && (re_part[a].1 - re_part[b].1).abs()
                        <= T::c(1e-10) * (T::one() + re_part[a].1)
                {
                    partner[a] = b;
                    partner[b] = a;
                    break;
                }
            }
        }
    }

    // extremal ordering
    let mut order: Vec<usize> = (0..kept).collect();
    order.sort_by(|&i, &j| {
        let a = values[i].ln().abs();
        let b = values[j].ln().abs();
        b.partial_cmp(&a).expect("NaN Ritz value")
    });

    // explicit residual pass: budget of m_eff - 2 applications, skipped
    // entirely after a breakdown (the relation residuals are already exact)
    let mut residuals = relation_resid.clone();
    if !broke_down {
        let budget = m_eff.saturating_sub(2);
        let mut mx: Vec<Option<DVector<T>>> = vec![None; kept];
        for &idx in order.iter().take(budget) {
            let x = vectors.column(idx).into_owned();
            let prod = chol.solve_vec(&pair.v.matvec(&x)?)?;
            mx[idx] = Some(prod);
        }
        for idx in 0..kept {
            if let Some(prod) = &mx[idx] {
                let x = vectors.column(idx).into_owned();
                if !is_complex[idx] {
                    residuals[idx] = (prod - &x * values[idx]).norm();
                } else {
                    let p = partner[idx];
                    let (a, b) = re_part[idx];
                    if p != usize::MAX {
                        // which member holds the real part: the one built
                        // from yre (im >= 0 convention)
                        let (xr, xi_) = if re_part[idx].1 >= T::zero() && p > idx {
                            (vectors.column(idx).into_owned(), vectors.column(p).into_owned())
                        } else {
                            (vectors.column(p).into_owned(), vectors.column(idx).into_owned())
                        };
                        let target = if p > idx {
                            // prod = M x_re; expected a x_re - b x_im
                            &xr * a - &xi_ * b
                        } else {
                            // prod = M x_im; expected b x_re + a x_im
                            &xr * b + &xi_ * a
                        };
                        residuals[idx] = (prod - target).norm();
                    } else {
                        residuals[idx] = (prod - &x * values[idx]).norm();
                    }
                }
            }
        }
    }

    let mut notes = Vec::new();
    if broke_down {
        notes.push(format!(
            "happy breakdown at Krylov dimension {m_eff}; invariant-subspace pairs returned"
        ));
    }
    if complex_count > 0 {
        notes.push(format!(
            "{complex_count} complex Ritz values folded to modulus (conjugate planes kept as real vector pairs)"
        ));
    }
    if dropped > 0 {
        notes.push(format!("{dropped} nonpositive Ritz values discarded"));
    }

    let mut set = EigenPairSet {
        values,
        vectors: vectors.view((0, 0), (n, kept)).into_owned(),
        residuals,
        notes,
    };
    set.sort_extremal();
    Ok(set)
}
