//! Galerkin discretization of the single-layer operator on a P1 space.
//!
//! [`assemble`] produces the operator as an N x N [`BlockMatrix`] of dense
//! real blocks (body-by-body); [`BlockMatrix::diagonal_part`] extracts the
//! reference operator with only the self-interaction blocks. Every operator
//! application — forward products and factored solves alike — bumps an
//! atomic counter, which is the cost unit the Krylov solvers are budgeted in.

mod assembly;
mod kernel;
mod rules;

pub use assembly::{assemble, assemble_block, AssemblyConfig};
pub use kernel::{kernel, kernel_of_distance, ImagWavenumber};
pub use rules::{simplex_hats, Contact, PairNode, RegularOrder, SingularRules, TriangleRule};

use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::Scene;
use crate::linalg::CholeskyFactor;
use crate::{Error, Real, Result};

/// Continuous piecewise-linear boundary-element space over a scene: one
/// degree of freedom per vertex, bodies stacked in scene order.
#[derive(Debug, Clone)]
pub struct P1Space<'a, T: Real> {
    scene: &'a Scene<T>,
    offsets: Vec<usize>,
    total: usize,
}

impl<'a, T: Real> P1Space<'a, T> {
    pub fn new(scene: &'a Scene<T>) -> Self {
        let mut offsets = Vec::with_capacity(scene.body_count() + 1);
        let mut total = 0;
        for body in scene.bodies() {
            offsets.push(total);
            total += body.vertex_count();
        }
        offsets.push(total);
        Self {
            scene,
            offsets,
            total,
        }
    }

    pub fn scene(&self) -> &'a Scene<T> {
        self.scene
    }

    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn body_count(&self) -> usize {
        self.scene.body_count()
    }

    pub fn body_dim(&self, body: usize) -> usize {
        self.offsets[body + 1] - self.offsets[body]
    }

    pub fn body_offset(&self, body: usize) -> usize {
        self.offsets[body]
    }

    /// Global index of `(body, vertex)`.
    pub fn global_index(&self, body: usize, vertex: usize) -> usize {
        debug_assert!(vertex < self.body_dim(body));
        self.offsets[body] + vertex
    }

    /// Inverse of [`P1Space::global_index`].
    pub fn body_vertex(&self, global: usize) -> (usize, usize) {
        debug_assert!(global < self.total);
        let body = self
            .offsets
            .partition_point(|&off| off <= global)
            .saturating_sub(1);
        (body, global - self.offsets[body])
    }

    pub fn layout(&self) -> Vec<usize> {
        (0..self.body_count()).map(|b| self.body_dim(b)).collect()
    }
}

/// N x N grid of dense blocks with an instrumented application counter.
///
/// Off-diagonal blocks may be structurally absent (`None`), which is how the
/// block-diagonal reference operator is represented.
#[derive(Debug)]
pub struct BlockMatrix<T: Real> {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    n: usize,
    blocks: Vec<Option<DMatrix<T>>>,
    counter: AtomicU64,
}

impl<T: Real> Clone for BlockMatrix<T> {
    fn clone(&self) -> Self {
        Self {
            sizes: self.sizes.clone(),
            offsets: self.offsets.clone(),
            n: self.n,
            blocks: self.blocks.clone(),
            counter: AtomicU64::new(0),
        }
    }
}

impl<T: Real> BlockMatrix<T> {
    pub fn empty(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut n = 0;
        for &s in &sizes {
            offsets.push(n);
            n += s;
        }
        offsets.push(n);
        let blocks = vec![None; sizes.len() * sizes.len()];
        Self {
            sizes,
            offsets,
            n,
            blocks,
            counter: AtomicU64::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&DMatrix<T>> {
        self.blocks[i * self.sizes.len() + j].as_ref()
    }

    pub fn set_block(&mut self, i: usize, j: usize, block: DMatrix<T>) -> Result<()> {
        if block.nrows() != self.sizes[i] || block.ncols() != self.sizes[j] {
            return Err(Error::DimensionMismatch(format!(
                "block ({i},{j}) must be {}x{}, got {}x{}",
                self.sizes[i],
                self.sizes[j],
                block.nrows(),
                block.ncols()
            )));
        }
        self.blocks[i * self.sizes.len() + j] = Some(block);
        Ok(())
    }

    /// Block-diagonal part; off-diagonal blocks are structurally absent.
    pub fn diagonal_part(&self) -> Self {
        let mut out = Self::empty(self.sizes.clone());
        for i in 0..self.sizes.len() {
            if let Some(b) = self.block(i, i) {
                out.set_block(i, i, b.clone()).expect("diagonal shape");
            }
        }
        out
    }

    pub fn is_block_diagonal(&self) -> bool {
        let nb = self.sizes.len();
        (0..nb).all(|i| (0..nb).all(|j| i == j || self.block(i, j).is_none()))
    }

    /// Number of operator applications so far (forward products and, for the
    /// block-diagonal part, factored solves).
    pub fn matvec_count(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }

    pub fn reset_matvec_count(&self) {
        self.counter.store(0, Ordering::Relaxed);
    }

    pub(crate) fn bump(&self, by: u64) {
        self.counter.fetch_add(by, Ordering::Relaxed);
    }

    /// Dense block-wise product; one counted application per vector.
    pub fn matvec(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs vector dim {}",
                self.n,
                x.len()
            )));
        }
        self.bump(1);
        let mut y = DVector::zeros(self.n);
        let nb = self.sizes.len();
        for i in 0..nb {
            let mut yi = y.rows_mut(self.offsets[i], self.sizes[i]);
            for j in 0..nb {
                if let Some(block) = self.block(i, j) {
                    let xj = x.rows(self.offsets[j], self.sizes[j]);
                    yi.gemv(T::one(), block, &xj, T::one());
                }
            }
        }
        Ok(y)
    }

    /// Apply to every column; counts one application per column.
    pub fn apply_mat(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.nrows() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs matrix rows {}",
                self.n,
                x.nrows()
            )));
        }
        self.bump(x.ncols() as u64);
        let mut y = DMatrix::zeros(self.n, x.ncols());
        let nb = self.sizes.len();
        for i in 0..nb {
            for j in 0..nb {
                if let Some(block) = self.block(i, j) {
                    let xj = x.rows(self.offsets[j], self.sizes[j]);
                    let mut yi = y.rows_mut(self.offsets[i], self.sizes[i]);
                    yi.gemm(T::one(), block, &xj, T::one());
                }
            }
        }
        Ok(y)
    }

    /// Copy into one dense matrix (absent blocks are zero).
    pub fn to_dense(&self) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.n, self.n);
        let nb = self.sizes.len();
        for i in 0..nb {
            for j in 0..nb {
                if let Some(b) = self.block(i, j) {
                    out.view_mut((self.offsets[i], self.offsets[j]), (b.nrows(), b.ncols()))
                        .copy_from(b);
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.blocks
            .iter()
            .flatten()
            .flat_map(|b| b.iter())
            .fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Symmetric factorization of a block-diagonal operator, one Cholesky factor
/// per body with identical bodies sharing a factor. Solves count as
/// applications of the factored operator.
pub struct BlockCholesky<'a, T: Real> {
    matrix: &'a BlockMatrix<T>,
    factors: Vec<Arc<CholeskyFactor<T>>>,
}

impl<'a, T: Real> BlockCholesky<'a, T> {
    /// Factor every diagonal block. `group_ids` declares identical bodies
    /// (see [`Scene::group_ids`]); their blocks are factored once.
    pub fn new(matrix: &'a BlockMatrix<T>, group_ids: &[usize]) -> Result<Self> {
        if !matrix.is_block_diagonal() {
            return Err(Error::Numerical(
                "block factorization requires a block-diagonal operator".into(),
            ));
        }
        let nb = matrix.block_count();
        if group_ids.len() != nb {
            return Err(Error::DimensionMismatch(
                "group id list does not match block count".into(),
            ));
        }
        let mut factors: Vec<Option<Arc<CholeskyFactor<T>>>> = vec![None; nb];
        for i in 0..nb {
            let rep = group_ids[i];
            if factors[rep].is_none() {
                let block = matrix.block(rep, rep).ok_or_else(|| {
                    Error::Numerical(format!("diagonal block {rep} missing"))
                })?;
                factors[rep] = Some(Arc::new(CholeskyFactor::new(block).map_err(|e| {
                    Error::Numerical(format!("diagonal block {rep} not positive definite: {e}"))
                })?));
            }
            if i != rep {
                factors[i] = factors[rep].clone();
            }
        }
        Ok(Self {
            matrix,
            factors: factors.into_iter().map(|f| f.unwrap()).collect(),
        })
    }

    /// `sum_j log det(block_jj)` (compensated summation).
    pub fn log_det(&self) -> T {
        let mut total = T::zero();
        let mut comp = T::zero();
        for f in &self.factors {
            let term = f.log_det() - comp;
            let next = total + term;
            comp = (next - total) - term;
            total = next;
        }
        total
    }

    /// Solve the block-diagonal system; one counted application per vector.
    pub fn solve_vec(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.matrix.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs vector dim {}",
                self.matrix.dim(),
                x.len()
            )));
        }
        self.matrix.bump(1);
        let mut y = x.clone();
        for (i, factor) in self.factors.iter().enumerate() {
            let off = self.matrix.block_offset(i);
            let len = self.matrix.block_sizes()[i];
            let mut col = DMatrix::from_column_slice(len, 1, y.rows(off, len).as_slice());
            factor.solve_in_place(&mut col);
            y.rows_mut(off, len).copy_from(&col.column(0));
        }
        Ok(y)
    }

    /// Multi-column solve; counts one application per column.
    pub fn solve_mat(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.nrows() != self.matrix.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs matrix rows {}",
                self.matrix.dim(),
                x.nrows()
            )));
        }
        self.matrix.bump(x.ncols() as u64);
        let mut y = x.clone();
        for (i, factor) in self.factors.iter().enumerate() {
            let off = self.matrix.block_offset(i);
            let len = self.matrix.block_sizes()[i];
            let mut sub = y.rows(off, len).into_owned();
            factor.solve_in_place(&mut sub);
            y.rows_mut(off, len).copy_from(&sub);
        }
        Ok(y)
    }
}

const DUMP_MAGIC: &[u8; 8] = b"CBEM1\0\0\0";

/// Binary dump of an assembled operator: 32-byte header (`CBEM1\0\0\0`,
/// `n: u64`, `N: u64`, `k: f64`, all little endian) followed by the N^2
/// blocks in block-row-major order, each block's entries row-major `f64`
/// (absent blocks are written as zeros). Debug and test-fixture format only.
pub fn write_block_dump<T: Real>(
    path: impl AsRef<Path>,
    matrix: &BlockMatrix<T>,
    k: T,
) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(DUMP_MAGIC)?;
    file.write_all(&(matrix.dim() as u64).to_le_bytes())?;
    file.write_all(&(matrix.block_count() as u64).to_le_bytes())?;
    file.write_all(&k.f64().to_le_bytes())?;
    let nb = matrix.block_count();
    for i in 0..nb {
        for j in 0..nb {
            let (rows, cols) = (matrix.block_sizes()[i], matrix.block_sizes()[j]);
            match matrix.block(i, j) {
                Some(b) => {
                    for r in 0..rows {
                        for c in 0..cols {
                            file.write_all(&b[(r, c)].f64().to_le_bytes())?;
                        }
                    }
                }
                None => {
                    let zeros = vec![0u8; 8 * cols];
                    for _ in 0..rows {
                        file.write_all(&zeros)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Read a dump written by [`write_block_dump`]. Block sizes must be supplied
/// by the caller (the header records only the total dimension and count).
pub fn read_block_dump(
    path: impl AsRef<Path>,
    sizes: Vec<usize>,
) -> Result<(BlockMatrix<f64>, f64)> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 32];
    file.read_exact(&mut header)?;
    if &header[0..8] != DUMP_MAGIC {
        return Err(Error::Parse {
            line: 0,
            msg: "bad magic in block dump".into(),
        });
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let nb = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let k = f64::from_le_bytes(header[24..32].try_into().unwrap());
    if sizes.len() != nb || sizes.iter().sum::<usize>() != n {
        return Err(Error::DimensionMismatch(
            "supplied block sizes do not match dump header".into(),
        ));
    }
    let mut out = BlockMatrix::<f64>::empty(sizes.clone());
    for i in 0..nb {
        for j in 0..nb {
            let (rows, cols) = (sizes[i], sizes[j]);
            let mut block = DMatrix::<f64>::zeros(rows, cols);
            let mut buf = vec![0u8; 8 * cols];
            for r in 0..rows {
                file.read_exact(&mut buf)?;
                for c in 0..cols {
                    block[(r, c)] =
                        f64::from_le_bytes(buf[8 * c..8 * c + 8].try_into().unwrap());
                }
            }
            out.set_block(i, j, block)?;
        }
    }
    Ok((out, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_box, make_sphere, transform, Scene};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};

    fn two_body_scene() -> Scene<f64> {
        let s = make_sphere(1.0f64, 0.9).unwrap();
        let t = transform(&s, &Matrix3::identity(), &Vector3::new(0.0, 0.0, -2.5)).unwrap();
        Scene::with_groups(vec![s, t], vec![0, 0]).unwrap()
    }

    #[test]
    fn space_index_bijection() {
        let scene = two_body_scene();
        let space = P1Space::new(&scene);
        assert_eq!(space.dim(), 2 * scene.body(0).vertex_count());
        for g in 0..space.dim() {
            let (b, v) = space.body_vertex(g);
            assert_eq!(space.global_index(b, v), g);
        }
    }

    #[test]
    fn matvec_counting_and_block_structure() {
        let mut m = BlockMatrix::<f64>::empty(vec![2, 2]);
        m.set_block(0, 0, DMatrix::identity(2, 2) * 2.0).unwrap();
        m.set_block(1, 1, DMatrix::identity(2, 2) * 3.0).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        let y = m.matvec(&x).unwrap();
        assert_eq!(m.matvec_count(), 1);
        // block-diagonal operator keeps support on body 1
        assert_eq!(y[2], 0.0);
        assert_eq!(y[3], 0.0);
        assert_eq!(y[0], 2.0);
        let zero = DVector::zeros(4);
        let z = m.matvec(&zero).unwrap();
        assert_eq!(z.norm(), 0.0);
        assert_eq!(m.matvec_count(), 2);
        for _ in 0..5 {
            m.matvec(&x).unwrap();
        }
        assert_eq!(m.matvec_count(), 7);
        assert!(m.matvec(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn block_cholesky_shares_identical_factors() {
        let b = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let mut m = BlockMatrix::<f64>::empty(vec![2, 2]);
        m.set_block(0, 0, b.clone()).unwrap();
        m.set_block(1, 1, b.clone()).unwrap();
        let chol = BlockCholesky::new(&m, &[0, 0]).unwrap();
        assert!(Arc::ptr_eq(&chol.factors[0], &chol.factors[1]));
        let single = CholeskyFactor::new(&b).unwrap();
        assert_relative_eq!(chol.log_det(), 2.0 * single.log_det(), epsilon = 1e-14);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let y = chol.solve_vec(&x).unwrap();
        assert_eq!(m.matvec_count(), 1);
        let back = m.matvec(&y).unwrap();
        assert_relative_eq!((back - x).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let mut m = BlockMatrix::<f64>::empty(vec![2, 3]);
        m.set_block(0, 0, DMatrix::from_fn(2, 2, |i, j| (i + 2 * j) as f64))
            .unwrap();
        m.set_block(0, 1, DMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 * 0.5))
            .unwrap();
        m.set_block(1, 0, DMatrix::from_fn(3, 2, |i, j| (i + j) as f64))
            .unwrap();
        m.set_block(1, 1, DMatrix::identity(3, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.cbem");
        write_block_dump(&path, &m, 0.8f64).unwrap();
        let (back, k) = read_block_dump(&path, vec![2, 3]).unwrap();
        assert_eq!(k, 0.8);
        assert_eq!(back.to_dense(), m.to_dense());
        let _ = make_box([1.0f64, 1.0, 1.0], 1.0).unwrap();
    }
}
