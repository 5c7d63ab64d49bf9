//! Inverse-free Krylov eigensolver for the symmetric-definite pencil.
//!
//! Builds an orthonormal basis of the Krylov space of the shifted operator
//! `C = V - rho Vt`, projects both pencil matrices onto it, solves the small
//! pencil and reverses the shift. No full-size matrix is ever inverted. The
//! spend is exact: `2(m-1)` basis applications, `2m` projection products,
//! `2m` residual products, so `6m - 2` counted operations per call.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use super::{EigenPairSet, OperatorPair};
use crate::linalg::{orthonormalize_against, sym_pencil_eigen, symmetrize};
use crate::{Error, Real, Result};

pub fn inverse_free_eigs<T: Real>(
    pair: &OperatorPair<'_, T>,
    m: usize,
    rho: T,
    start: &DVector<T>,
) -> Result<EigenPairSet<T>> {
    let n = pair.dim();
    if m < 1 || m > n {
        return Err(Error::Config(format!(
            "Krylov dimension m={m} must satisfy 1 <= m <= n={n}"
        )));
    }
    if start.len() != n || start.norm() == T::zero() {
        return Err(Error::Config(
            "start vector must be nonzero of matching dimension".into(),
        ));
    }

    let mut basis = DMatrix::<T>::zeros(n, m);
    basis.set_column(0, &(start / start.norm()));
    let mut scale = T::zero();
    let mut continuation_rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED_C0DE);
    for j in 0..m - 1 {
        let zj = basis.column(j).into_owned();
        let vz = pair.v.matvec(&zj)?;
        let btz = pair.vt.matvec(&zj)?;
        let mut w = vz - btz * rho;
        if j == 0 {
            scale = w.norm().max(T::c(1e-300));
        }
        let mut norm = orthonormalize_against(&basis, j + 1, &mut w);
        // Krylov saturation: keep the basis full rank with a fresh random
        // direction so a full-dimension call still spans the whole space
        while norm <= scale * T::c(1e-13) {
            w = DVector::from_fn(n, |_, _| T::c(continuation_rng.random::<f64>() * 2.0 - 1.0));
            norm = orthonormalize_against(&basis, j + 1, &mut w);
        }
        basis.set_column(j + 1, &w);
    }

    // projection pass (2m counted applications)
    let vz = pair.v.apply_mat(&basis)?;
    let bz = pair.vt.apply_mat(&basis)?;
    let b_small = symmetrize(&(basis.transpose() * &bz));
    let a_small = symmetrize(&(basis.transpose() * &vz)) - &b_small * rho;

    let pe = sym_pencil_eigen(&a_small, &b_small)?;
    let mut notes = Vec::new();
    if pe.rank_reduced {
        notes.push(format!(
            "projected metric numerically singular; reduced subspace to rank {}",
            pe.dim
        ));
    }
    // reverse the shift
    let mut values: Vec<T> = pe.values.iter().map(|&mu| mu + rho).collect();
    let mut x = &basis * &pe.vectors;

    // residual/refinement pass (2 * dim counted applications)
    let rv = pair.v.apply_mat(&x)?;
    let rb = pair.vt.apply_mat(&x)?;
    let mut residuals = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let r = rv.column(i) - rb.column(i) * values[i];
        residuals.push(r.norm());
    }

    // positivity: the pencil is definite, so nonpositive values only arise
    // from severe loss of accuracy; drop them with a note
    let bad: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] <= T::zero())
        .collect();
    if !bad.is_empty() {
        notes.push(format!("{} nonpositive pencil values discarded", bad.len()));
        let keep: Vec<usize> = (0..values.len()).filter(|i| !bad.contains(i)).collect();
        values = keep.iter().map(|&i| values[i]).collect();
        residuals = keep.iter().map(|&i| residuals[i]).collect();
        let mut kept = DMatrix::zeros(n, keep.len());
        for (out, &inp) in keep.iter().enumerate() {
            kept.set_column(out, &x.column(inp));
        }
        x = kept;
    }

    let mut set = EigenPairSet {
        values,
        vectors: x,
        residuals,
        notes,
    };
    set.sort_extremal();
    Ok(set)
}
