//! Parallel Galerkin assembly of the block operator matrix.
//!
//! Within a body, unordered panel pairs are integrated once and written to
//! both `(m, n)` and `(n, m)`, so assembled matrices are exactly symmetric.
//! Cross-body blocks contain only disjoint pairs (bodies do not touch) and
//! the mirrored block is stored as an explicit transpose. Work is chunked
//! over row panels and scattered in panel order, which keeps results
//! bit-deterministic under any thread count.

use nalgebra::{DMatrix, Point3};
use rayon::prelude::*;

use super::kernel::{kernel_of_distance, ImagWavenumber};
use super::rules::{simplex_hats, Contact, PairNode, RegularOrder, SingularRules, TriangleRule};
use super::{BlockMatrix, P1Space};
use crate::geometry::SurfaceMesh;
use crate::{Real, Result};

/// Quadrature configuration of the assembler.
#[derive(Debug, Clone)]
pub struct AssemblyConfig {
    /// Rule for disjoint panel pairs.
    pub regular_order: RegularOrder,
    /// Gauss points per dimension of the regularized tensor rules.
    pub singular_points: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            regular_order: RegularOrder::Degree4,
            singular_points: 4,
        }
    }
}

/// Row panels per parallel work item.
const PANEL_CHUNK: usize = 32;

struct PanelData<T: Real> {
    verts: [Point3<T>; 3],
    dofs: [u32; 3],
    area: T,
    qpoints: Vec<Point3<T>>,
}

fn precompute_panels<T: Real>(mesh: &SurfaceMesh<T>, rule: &TriangleRule<T>) -> Vec<PanelData<T>> {
    (0..mesh.triangle_count())
        .map(|t| {
            let verts = mesh.triangle_points(t);
            let qpoints = rule
                .points
                .iter()
                .map(|l| {
                    Point3::from(
                        verts[0].coords * l[0] + verts[1].coords * l[1] + verts[2].coords * l[2],
                    )
                })
                .collect();
            PanelData {
                verts,
                dofs: mesh.triangles()[t],
                area: mesh.triangle_area(t),
                qpoints,
            }
        })
        .collect()
}

/// 3x3 local Galerkin matrix of a disjoint panel pair in the panels' natural
/// vertex order.
#[inline]
fn regular_pair<T: Real>(
    pa: &PanelData<T>,
    pb: &PanelData<T>,
    rule: &TriangleRule<T>,
    k: T,
) -> [[T; 3]; 3] {
    let mut out = [[T::zero(); 3]; 3];
    for (qa, xa) in pa.qpoints.iter().enumerate() {
        let la = rule.points[qa];
        let wa = rule.weights[qa];
        let mut s = [T::zero(); 3];
        for (qb, yb) in pb.qpoints.iter().enumerate() {
            let r = (xa - yb).norm();
            let g = rule.weights[qb] * kernel_of_distance(k, r);
            let lb = rule.points[qb];
            s[0] += g * lb[0];
            s[1] += g * lb[1];
            s[2] += g * lb[2];
        }
        for m in 0..3 {
            let c = wa * la[m];
            out[m][0] += c * s[0];
            out[m][1] += c * s[1];
            out[m][2] += c * s[2];
        }
    }
    let scale = pa.area * pb.area;
    for row in &mut out {
        for v in row {
            *v *= scale;
        }
    }
    out
}

/// Chart point `V0 + u (V1 - V0) + v (V2 - V1)` for ordered vertices.
#[inline(always)]
fn chart<T: Real>(v: &[Point3<T>; 3], p: [T; 2]) -> Point3<T> {
    Point3::from(v[0].coords + (v[1] - v[0]) * p[0] + (v[2] - v[1]) * p[1])
}

/// 3x3 local matrix of a touching pair, indexed in the ordered-vertex space
/// of the given node list.
fn singular_pair<T: Real>(
    va: &[Point3<T>; 3],
    vb: &[Point3<T>; 3],
    area_a: T,
    area_b: T,
    nodes: &[PairNode<T>],
    k: T,
) -> [[T; 3]; 3] {
    let mut out = [[T::zero(); 3]; 3];
    for node in nodes {
        let xp = chart(va, node.x);
        let yp = chart(vb, node.y);
        let r = (xp - yp).norm();
        let g = node.weight * kernel_of_distance(k, r);
        let hx = simplex_hats(node.x);
        let hy = simplex_hats(node.y);
        for m in 0..3 {
            let c = g * hx[m];
            out[m][0] += c * hy[0];
            out[m][1] += c * hy[1];
            out[m][2] += c * hy[2];
        }
    }
    let scale = T::c(4.0) * area_a * area_b;
    for row in &mut out {
        for v in row {
            *v *= scale;
        }
    }
    out
}

/// Shared-vertex classification with the vertex orders the singular rules
/// require: shared vertices first and, for edges, in the same order on both
/// panels. Returned permutations map ordered slots to natural local slots.
fn classify<T: Real>(a: &PanelData<T>, b: &PanelData<T>) -> (Contact, [usize; 3], [usize; 3]) {
    let mut shared: Vec<(usize, usize)> = Vec::with_capacity(3);
    for (ia, da) in a.dofs.iter().enumerate() {
        for (ib, db) in b.dofs.iter().enumerate() {
            if da == db {
                shared.push((ia, ib));
            }
        }
    }
    match shared.len() {
        3 => (Contact::Coincident, [0, 1, 2], [0, 1, 2]),
        2 => {
            // order the edge by ascending global id on both sides
            let (mut e0, mut e1) = (shared[0], shared[1]);
            if a.dofs[e0.0] > a.dofs[e1.0] {
                std::mem::swap(&mut e0, &mut e1);
            }
            let oa = 3 - e0.0 - e1.0;
            let ob = 3 - e0.1 - e1.1;
            (Contact::SharedEdge, [e0.0, e1.0, oa], [e0.1, e1.1, ob])
        }
        1 => {
            let (sa, sb) = shared[0];
            let pa = [sa, (sa + 1) % 3, (sa + 2) % 3];
            let pb = [sb, (sb + 1) % 3, (sb + 2) % 3];
            (Contact::SharedVertex, pa, pb)
        }
        _ => (Contact::Disjoint, [0, 1, 2], [0, 1, 2]),
    }
}

struct Strip<T: Real> {
    panel: usize,
    /// 3 x ncols accumulated rows of the panel's vertices.
    rows: DMatrix<T>,
    /// (column panel, ordered-space transpose block) to mirror below the
    /// diagonal; only populated on the self block.
    mirror: Vec<(usize, [[T; 3]; 3])>,
}

/// Assemble one block of the operator.
pub fn assemble_block<T: Real>(
    space: &P1Space<T>,
    k: ImagWavenumber<T>,
    i: usize,
    j: usize,
    cfg: &AssemblyConfig,
) -> Result<DMatrix<T>> {
    let rule = TriangleRule::new(cfg.regular_order);
    if i == j {
        let singular = SingularRules::new(cfg.singular_points);
        let panels = precompute_panels(space.scene().body(i), &rule);
        Ok(self_block(&panels, &rule, &singular, k.modulus(), space.body_dim(i)))
    } else {
        let pa = precompute_panels(space.scene().body(i), &rule);
        let pb = precompute_panels(space.scene().body(j), &rule);
        Ok(cross_block(
            &pa,
            &pb,
            &rule,
            k.modulus(),
            space.body_dim(i),
            space.body_dim(j),
        ))
    }
}

fn cross_block<T: Real>(
    pa: &[PanelData<T>],
    pb: &[PanelData<T>],
    rule: &TriangleRule<T>,
    k: T,
    rows: usize,
    cols: usize,
) -> DMatrix<T> {
    let mut out = DMatrix::zeros(rows, cols);
    let chunks: Vec<&[PanelData<T>]> = pa.chunks(PANEL_CHUNK).collect();
    let mut base = 0usize;
    for chunk in chunks {
        let strips: Vec<Strip<T>> = chunk
            .par_iter()
            .enumerate()
            .map(|(off, a)| {
                let mut strip = DMatrix::zeros(3, cols);
                for b in pb {
                    let local = regular_pair(a, b, rule, k);
                    for (m, row) in local.iter().enumerate() {
                        for (n, &v) in row.iter().enumerate() {
                            strip[(m, b.dofs[n] as usize)] += v;
                        }
                    }
                }
                Strip {
                    panel: base + off,
                    rows: strip,
                    mirror: Vec::new(),
                }
            })
            .collect();
        for strip in strips {
            let a = &pa[strip.panel];
            for m in 0..3 {
                let r = a.dofs[m] as usize;
                for c in 0..cols {
                    out[(r, c)] += strip.rows[(m, c)];
                }
            }
        }
        base += chunk.len();
    }
    out
}

fn self_block<T: Real>(
    panels: &[PanelData<T>],
    rule: &TriangleRule<T>,
    singular: &SingularRules<T>,
    k: T,
    dim: usize,
) -> DMatrix<T> {
    let mut out = DMatrix::zeros(dim, dim);
    let nchunks = panels.len().div_ceil(PANEL_CHUNK);
    for chunk_idx in 0..nchunks {
        let lo = chunk_idx * PANEL_CHUNK;
        let hi = (lo + PANEL_CHUNK).min(panels.len());
        let strips: Vec<Strip<T>> = (lo..hi)
            .into_par_iter()
            .map(|ia| {
                let a = &panels[ia];
                let mut rows = DMatrix::zeros(3, dim);
                let mut mirror = Vec::new();
                for (ib, b) in panels.iter().enumerate().skip(ia) {
                    let (contact, perm_a, perm_b) = classify(a, b);
                    let local_natural: [[T; 3]; 3] = match contact {
                        Contact::Disjoint => regular_pair(a, b, rule, k),
                        _ => {
                            let va = [
                                a.verts[perm_a[0]],
                                a.verts[perm_a[1]],
                                a.verts[perm_a[2]],
                            ];
                            let vb = [
                                b.verts[perm_b[0]],
                                b.verts[perm_b[1]],
                                b.verts[perm_b[2]],
                            ];
                            let nodes = match contact {
                                Contact::Coincident => &singular.coincident,
                                Contact::SharedEdge => &singular.edge,
                                Contact::SharedVertex => &singular.vertex,
                                Contact::Disjoint => unreachable!(),
                            };
                            let ordered = singular_pair(&va, &vb, a.area, b.area, nodes, k);
                            let mut nat = [[T::zero(); 3]; 3];
                            for m in 0..3 {
                                for n in 0..3 {
                                    nat[perm_a[m]][perm_b[n]] = ordered[m][n];
                                }
                            }
                            nat
                        }
                    };
                    for (m, row) in local_natural.iter().enumerate() {
                        for (n, &v) in row.iter().enumerate() {
                            rows[(m, b.dofs[n] as usize)] += v;
                        }
                    }
                    if ib != ia {
                        mirror.push((ib, local_natural));
                    }
                }
                Strip {
                    panel: ia,
                    rows,
                    mirror,
                }
            })
            .collect();
        for strip in strips {
            let a = &panels[strip.panel];
            for m in 0..3 {
                let r = a.dofs[m] as usize;
                for c in 0..dim {
                    out[(r, c)] += strip.rows[(m, c)];
                }
            }
            for (ib, local) in strip.mirror {
                let b = &panels[ib];
                for m in 0..3 {
                    for n in 0..3 {
                        out[(b.dofs[n] as usize, a.dofs[m] as usize)] += local[m][n];
                    }
                }
            }
        }
    }
    out
}

/// Assemble the full block operator at wavenumber `i k`.
pub fn assemble<T: Real>(
    space: &P1Space<T>,
    k: ImagWavenumber<T>,
    cfg: &AssemblyConfig,
) -> Result<BlockMatrix<T>> {
    let nb = space.body_count();
    let mut out = BlockMatrix::empty(space.layout());
    for i in 0..nb {
        for j in i..nb {
            let block = assemble_block(space, k, i, j, cfg)?;
            if i != j {
                out.set_block(j, i, block.transpose())?;
            }
            out.set_block(i, j, block)?;
        }
    }
    Ok(out)
}
