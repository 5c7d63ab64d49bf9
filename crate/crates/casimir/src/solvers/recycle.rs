//! Subspace recycling across a sequence of wavenumbers.
//!
//! The first wavenumber is solved by the configured base method at full
//! Krylov dimension. For each later wavenumber the eigenvectors whose
//! `|log lambda|` passed the threshold are orthonormalized into a starting
//! basis, the pencil is projected onto it, the basis is extended once by the
//! eigen-residuals, and the extended projection is solved again. Counted
//! spend per recycled wavenumber with `s` carried vectors: `12 s` for the
//! inverse-free variant (explicit final residuals), `8 s` for the Arnoldi
//! variant (final residuals from the cached projection products).

use nalgebra::DMatrix;

use super::{
    arnoldi_eigs, inverse_free_eigs, start_vector, xi_from_pairs, EigenPairSet, KrylovKind,
    MethodTag, OperatorPair, SolverReport,
};
use crate::bem::{assemble, AssemblyConfig, ImagWavenumber, P1Space};
use crate::linalg::{orthonormalize_against, sym_pencil_eigen, symmetrize};
use crate::{Error, Real, Result};

/// Eigenvectors carried from one wavenumber to the next.
#[derive(Debug, Clone)]
pub struct RecycleState<T: Real> {
    basis: DMatrix<T>,
    pub s_exp: u32,
}

impl<T: Real> RecycleState<T> {
    pub fn count(&self) -> usize {
        self.basis.ncols()
    }
}

/// Carry forward the eigenvectors passing the `|log lambda|` threshold.
/// Returns `None` when nothing passes (threshold exhaustion).
pub fn recycle_from<T: Real>(pairs: &EigenPairSet<T>, s_exp: u32) -> Option<RecycleState<T>> {
    let keep = pairs.above_threshold(s_exp);
    if keep.is_empty() {
        return None;
    }
    let n = pairs.vectors.nrows();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (out, &idx) in keep.iter().enumerate() {
        basis.set_column(out, &pairs.vectors.column(idx));
    }
    Some(RecycleState { basis, s_exp })
}

/// Solve one wavenumber with the configured base method.
pub fn base_eigs<T: Real>(
    pair: &OperatorPair<'_, T>,
    kind: KrylovKind,
    m: usize,
    rho: T,
    seed: u64,
) -> Result<EigenPairSet<T>> {
    let start = start_vector(pair.dim(), seed);
    match kind {
        KrylovKind::Arnoldi => arnoldi_eigs(pair, m, &start),
        KrylovKind::InverseFree => inverse_free_eigs(pair, m, rho, &start),
    }
}

/// Outcome of one recycled wavenumber.
pub struct RecycledOutcome<T: Real> {
    pub pairs: EigenPairSet<T>,
    /// Extended-subspace dimension (recycled vectors plus residuals).
    pub subspace_dim: usize,
    /// Vectors actually recycled into this step.
    pub s_in: usize,
}

/// One recycled step: project, extend by residuals, re-solve.
pub fn recycled_step<T: Real>(
    pair: &OperatorPair<'_, T>,
    state: &RecycleState<T>,
    kind: KrylovKind,
) -> Result<RecycledOutcome<T>> {
    let n = pair.dim();
    let s_raw = state.basis.ncols();
    if s_raw == 0 {
        return Err(Error::Numerical("recycle state is empty".into()));
    }
    // orthonormalize the carried vectors
    let mut w = DMatrix::<T>::zeros(n, s_raw);
    let mut s = 0usize;
    for c in 0..s_raw {
        let mut col = state.basis.column(c).into_owned();
        let before = col.norm();
        let after = orthonormalize_against(&w, s, &mut col);
        if after > before * T::c(1e-12) {
            w.set_column(s, &col);
            s += 1;
        }
    }
    if s == 0 {
        return Err(Error::Numerical("recycled vectors are rank deficient".into()));
    }
    let w = w.view((0, 0), (n, s)).into_owned();

    // project the pencil onto the carried basis (2s applications)
    let aw = pair.v.apply_mat(&w)?;
    let bw = pair.vt.apply_mat(&w)?;
    let a_s = symmetrize(&(w.transpose() * &aw));
    let b_s = symmetrize(&(w.transpose() * &bw));
    let pe = sym_pencil_eigen(&a_s, &b_s)?;
    let x = &w * &pe.vectors;

    // eigen-residuals (2s applications)
    let rv = pair.v.apply_mat(&x)?;
    let rb = pair.vt.apply_mat(&x)?;
    let mut residual_scale = T::zero();
    let mut resid_cols = DMatrix::<T>::zeros(n, pe.dim);
    for i in 0..pe.dim {
        let r = rv.column(i) - rb.column(i) * pe.values[i];
        residual_scale = residual_scale.max(r.norm());
        resid_cols.set_column(i, &r);
    }

    // extend the basis by the orthonormalized residuals
    let mut w2 = DMatrix::<T>::zeros(n, s + pe.dim);
    w2.view_mut((0, 0), (n, s)).copy_from(&w);
    let mut dim2 = s;
    for i in 0..pe.dim {
        let mut col = resid_cols.column(i).into_owned();
        let after = orthonormalize_against(&w2, dim2, &mut col);
        if after > residual_scale * T::c(1e-13) {
            w2.set_column(dim2, &col);
            dim2 += 1;
        }
    }
    let w2 = w2.view((0, 0), (n, dim2)).into_owned();

    // re-project on the extended basis (2 * dim2 applications)
    let aw2 = pair.v.apply_mat(&w2)?;
    let bw2 = pair.vt.apply_mat(&w2)?;
    let a_2 = symmetrize(&(w2.transpose() * &aw2));
    let b_2 = symmetrize(&(w2.transpose() * &bw2));
    let pe2 = sym_pencil_eigen(&a_2, &b_2)?;
    let x2 = &w2 * &pe2.vectors;

    let mut notes = Vec::new();
    if pe.rank_reduced || pe2.rank_reduced {
        notes.push("projected metric rank-reduced during recycling".into());
    }
    let mut values = pe2.values.clone();
    let mut residuals;
    match kind {
        KrylovKind::InverseFree => {
            // explicit final residuals (2 * dim2 applications)
            let rv2 = pair.v.apply_mat(&x2)?;
            let rb2 = pair.vt.apply_mat(&x2)?;
            residuals = Vec::with_capacity(pe2.dim);
            for i in 0..pe2.dim {
                let r = rv2.column(i) - rb2.column(i) * values[i];
                residuals.push(r.norm());
            }
        }
        KrylovKind::Arnoldi => {
            // residuals from the cached projection products, no extra spend
            residuals = Vec::with_capacity(pe2.dim);
            for i in 0..pe2.dim {
                let y = pe2.vectors.column(i);
                let r = &aw2 * y - (&bw2 * y) * values[i];
                residuals.push(r.norm());
            }
        }
    }

    // positivity guard, as in the base solvers
    let bad: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] <= T::zero())
        .collect();
    let mut x2 = x2;
    if !bad.is_empty() {
        notes.push(format!("{} nonpositive pencil values discarded", bad.len()));
        let keep: Vec<usize> = (0..values.len()).filter(|i| !bad.contains(i)).collect();
        values = keep.iter().map(|&i| values[i]).collect();
        residuals = keep.iter().map(|&i| residuals[i]).collect();
        let mut kept = DMatrix::zeros(n, keep.len());
        for (out, &inp) in keep.iter().enumerate() {
            kept.set_column(out, &x2.column(inp));
        }
        x2 = kept;
    }

    let mut pairs = EigenPairSet {
        values,
        vectors: x2,
        residuals,
        notes,
    };
    pairs.sort_extremal();
    Ok(RecycledOutcome {
        pairs,
        subspace_dim: dim2,
        s_in: s,
    })
}

/// Krylov sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepConfig<T: Real> {
    pub kind: KrylovKind,
    pub recycle: bool,
    pub m: usize,
    pub s_exp: u32,
    pub rho: T,
    pub seed: u64,
}

/// Evaluate `xi(i k)` over an ascending wavenumber list, assembling the
/// operators per wavenumber and recycling thresholded eigenvectors between
/// consecutive wavenumbers when enabled. If recycling exhausts (no vector
/// passes the threshold) the base method restarts at full dimension.
pub fn krylov_sweep<T: Real>(
    space: &P1Space<'_, T>,
    assembly: &AssemblyConfig,
    ks: &[T],
    cfg: &SweepConfig<T>,
) -> Result<Vec<SolverReport<T>>> {
    if ks.is_empty() {
        return Err(Error::Config("wavenumber list is empty".into()));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "wavenumbers must be strictly ascending".into(),
        ));
    }
    let groups = space.scene().group_ids().to_vec();
    let mut reports = Vec::with_capacity(ks.len());
    let mut state: Option<RecycleState<T>> = None;
    for (idx, &k) in ks.iter().enumerate() {
        let v = assemble(space, ImagWavenumber::new(k)?, assembly)?;
        let vt = v.diagonal_part();
        let pair = OperatorPair::new(&v, &vt, &groups)?;
        let mut notes = Vec::new();
        let (pairs, subspace_dim, s_in, recycled_here) = match (&state, cfg.recycle, idx) {
            (Some(st), true, i) if i > 0 => {
                let out = recycled_step(&pair, st, cfg.kind)?;
                (out.pairs, out.subspace_dim, out.s_in, true)
            }
            _ => {
                if cfg.recycle && idx > 0 {
                    notes.push(
                        "threshold exhausted; restarted base method at full dimension".into(),
                    );
                }
                let pairs = base_eigs(&pair, cfg.kind, cfg.m, cfg.rho, cfg.seed)?;
                let dim = pairs.len().max(cfg.m.min(pair.dim()));
                (pairs, dim, 0, false)
            }
        };
        let xi = xi_from_pairs(&pairs.values, cfg.s_exp);
        let retained_idx = pairs.above_threshold(cfg.s_exp);
        let retained = subset(&pairs, &retained_idx);
        if cfg.recycle {
            state = recycle_from(&pairs, cfg.s_exp);
        }
        notes.extend(pairs.notes.iter().cloned());
        reports.push(SolverReport {
            k,
            xi,
            retained,
            matvecs: pair.matvec_count(),
            method: MethodTag::Krylov {
                kind: cfg.kind,
                recycled: cfg.recycle && recycled_here,
            },
            seed: Some(cfg.seed),
            subspace_dim,
            recycled_in: s_in,
            notes,
        });
    }
    Ok(reports)
}

/// Spec-named entry point: sweep with recycling enabled.
pub fn recycled_sweep<T: Real>(
    space: &P1Space<'_, T>,
    assembly: &AssemblyConfig,
    ks: &[T],
    kind: KrylovKind,
    m: usize,
    s_exp: u32,
    rho: T,
    seed: u64,
) -> Result<Vec<SolverReport<T>>> {
    krylov_sweep(
        space,
        assembly,
        ks,
        &SweepConfig {
            kind,
            recycle: true,
            m,
            s_exp,
            rho,
            seed,
        },
    )
}

fn subset<T: Real>(set: &EigenPairSet<T>, idx: &[usize]) -> EigenPairSet<T> {
    let n = set.vectors.nrows();
    let mut vectors = DMatrix::zeros(n, idx.len());
    for (out, &inp) in idx.iter().enumerate() {
        vectors.set_column(out, &set.vectors.column(inp));
    }
    EigenPairSet {
        values: idx.iter().map(|&i| set.values[i]).collect(),
        vectors,
        residuals: idx.iter().map(|&i| set.residuals[i]).collect(),
        notes: Vec::new(),
    }
}
