//! Independent oracles for the regularized singular quadrature.
//!
//! Two oracle routes, sharing no code with the production transform rules:
//!
//! * Coincident flat pairs at `k = 0`: the inner integral of a linear
//!   density against `1/(4 pi r)` over a flat triangle has a closed form for
//!   in-plane observation points (divergence theorem on the triangle plane),
//!   and the outer integral is refined by uniform subdivision with
//!   Richardson extrapolation. Accurate to better than 1e-8.
//!
//! * Edge- and vertex-adjacent pairs: adaptive pair subdivision. Touching
//!   pairs split four-way on both sides, separated pairs get a high-order
//!   tensor rule, and the touching tail (which shrinks by one half per
//!   level) is removed by a two-stage Richardson ladder. The trees of
//!   adjacent pairs grow slowly enough for deep levels to stay cheap.

use casimir::bem::{
    assemble_block, simplex_hats, AssemblyConfig, ImagWavenumber, P1Space, PairNode,
    SingularRules,
};
use casimir::geometry::{triangle_distance, Scene, SurfaceMesh};
use casimir::linalg::gauss_legendre_01;
use nalgebra::{DMatrix, Point3, Vector3};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

// ---------------------------------------------------------------------------
// analytic route for flat coincident pairs at k = 0
// ---------------------------------------------------------------------------

/// `integral_T 1/|x - y| dS_y` for `x` in the plane of the flat triangle.
fn in_plane_inverse_distance(tri: &[Point3<f64>; 3], x: &Point3<f64>) -> f64 {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
    let mut total = 0.0;
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let t = (b - a).normalize();
        let m = t.cross(&n); // outward in-plane edge normal for CCW triangles
        let d = (a - x).dot(&m); // positive for interior points
        if d.abs() < 1e-14 {
            continue; // the edge term vanishes with d
        }
        let s_minus = (a - x).dot(&t);
        let s_plus = (b - x).dot(&t);
        let r_minus = (a - x).norm();
        let r_plus = (b - x).norm();
        total += d * ((s_plus + r_plus) / (s_minus + r_minus)).ln();
    }
    total
}

/// `integral_T (y - x)/|x - y| dS_y` for in-plane `x` (a vector in the
/// triangle plane), from the divergence-theorem edge integrals of `r`.
fn in_plane_distance_moment(tri: &[Point3<f64>; 3], x: &Point3<f64>) -> Vector3<f64> {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
    let mut total = Vector3::zeros();
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let t = (b - a).normalize();
        let m = t.cross(&n);
        let d = (a - x).dot(&m);
        let s_minus = (a - x).dot(&t);
        let s_plus = (b - x).dot(&t);
        let r_minus = (a - x).norm();
        let r_plus = (b - x).norm();
        // edge integral of r: (s r + d^2 ln(s + r)) / 2
        let log_term = if d.abs() < 1e-14 {
            0.0
        } else {
            d * d * ((s_plus + r_plus) / (s_minus + r_minus)).ln()
        };
        let edge_r = 0.5 * (s_plus * r_plus - s_minus * r_minus + log_term);
        total += m * edge_r;
    }
    total
}

/// In-plane gradients of the three hat functions.
fn hat_gradients(tri: &[Point3<f64>; 3]) -> [Vector3<f64>; 3] {
    let mut grads = [Vector3::zeros(); 3];
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
    for i in 0..3 {
        let a = tri[(i + 1) % 3];
        let b = tri[(i + 2) % 3];
        let dir = n.cross(&(b - a)).normalize();
        let height = (tri[i] - a).dot(&dir);
        grads[i] = dir / height;
    }
    grads
}

/// Inner potentials of all three hats at in-plane `x`:
/// `U_n(x) = [hat_n(x) I0(x) + grad hat_n . M(x)] / (4 pi)`.
fn hat_potentials(tri: &[Point3<f64>; 3], x: &Point3<f64>) -> [f64; 3] {
    let i0 = in_plane_inverse_distance(tri, x);
    let mom = in_plane_distance_moment(tri, x);
    let grads = hat_gradients(tri);
    let bary = barycentric(tri, x);
    let mut out = [0.0; 3];
    for n in 0..3 {
        out[n] = (bary[n] * i0 + grads[n].dot(&mom)) / FOUR_PI;
    }
    out
}

fn barycentric(tri: &[Point3<f64>; 3], x: &Point3<f64>) -> [f64; 3] {
    let v0 = tri[1] - tri[0];
    let v1 = tri[2] - tri[0];
    let v2 = x - tri[0];
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}

/// Outer integral of `hat_m(x) U_n(x)` by uniform subdivision at increasing
/// depth with Richardson extrapolation; returns the entries and an internal
/// convergence estimate.
fn analytic_coincident_entries(tri: &[Point3<f64>; 3]) -> ([f64; 9], f64) {
    let (pts, w) = rule7();
    let level = |depth: usize| -> [f64; 9] {
        let mut acc = [0.0; 9];
        let mut stack = vec![(Sub { p: *tri, vals: HATS }, depth)];
        while let Some((patch, d)) = stack.pop() {
            if d > 0 {
                for c in patch.split() {
                    stack.push((c, d - 1));
                }
                continue;
            }
            let area = 0.5
                * (patch.p[1] - patch.p[0])
                    .cross(&(patch.p[2] - patch.p[0]))
                    .norm();
            for (lam, &wq) in pts.iter().zip(&w) {
                let x = Point3::from(
                    patch.p[0].coords * lam[0]
                        + patch.p[1].coords * lam[1]
                        + patch.p[2].coords * lam[2],
                );
                let u = hat_potentials(tri, &x);
                for m in 0..3 {
                    let hm = patch.vals[m][0] * lam[0]
                        + patch.vals[m][1] * lam[1]
                        + patch.vals[m][2] * lam[2];
                    for n in 0..3 {
                        acc[3 * m + n] += wq * area * hm * u[n];
                    }
                }
            }
        }
        acc
    };
    let s: Vec<[f64; 9]> = (4..=7).map(level).collect();
    // one Richardson stage per consecutive pair, then compare the last two
    let stage = |hi: &[f64; 9], lo: &[f64; 9]| {
        let mut v = [0.0; 9];
        for i in 0..9 {
            v[i] = hi[i] + (hi[i] - lo[i]) / 3.0; // local cubic error, ratio 1/4
        }
        v
    };
    let e1: Vec<[f64; 9]> = s.windows(2).map(|w| stage(&w[1], &w[0])).collect();
    let last = e1[e1.len() - 1];
    let prev = e1[e1.len() - 2];
    let mut out = [0.0; 9];
    let mut internal: f64 = 0.0;
    for i in 0..9 {
        out[i] = last[i];
        internal = internal.max((last[i] - prev[i]).abs() / last[i].abs());
    }
    (out, internal)
}

// ---------------------------------------------------------------------------
// adaptive subdivision route
// ---------------------------------------------------------------------------

const HATS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Triangle carrying the three P1 hat densities by their vertex values.
#[derive(Clone, Copy)]
struct Sub {
    p: [Point3<f64>; 3],
    vals: [[f64; 3]; 3],
}

impl Sub {
    fn diameter(&self) -> f64 {
        (0..3)
            .map(|i| (self.p[(i + 1) % 3] - self.p[i]).norm())
            .fold(0.0, f64::max)
    }

    fn split(&self) -> [Sub; 4] {
        let mid = |a: usize, b: usize| Point3::from((self.p[a].coords + self.p[b].coords) * 0.5);
        let m01 = mid(0, 1);
        let m12 = mid(1, 2);
        let m02 = mid(0, 2);
        let mk = |pts: [Point3<f64>; 3], pair: [(usize, usize); 3]| {
            let mut vals = [[0.0; 3]; 3];
            for d in 0..3 {
                for (v, &(a, b)) in pair.iter().enumerate() {
                    vals[d][v] = 0.5 * (self.vals[d][a] + self.vals[d][b]);
                }
            }
            Sub { p: pts, vals }
        };
        [
            mk([self.p[0], m01, m02], [(0, 0), (0, 1), (0, 2)]),
            mk([m01, self.p[1], m12], [(0, 1), (1, 1), (1, 2)]),
            mk([m02, m12, self.p[2]], [(0, 2), (1, 2), (2, 2)]),
            mk([m01, m12, m02], [(0, 1), (1, 2), (0, 2)]),
        ]
    }
}

/// Degree-5 triangle rule (barycentric, weights sum to 1).
fn rule7() -> ([[f64; 3]; 7], [f64; 7]) {
    let a1 = 0.059_715_871_789_770;
    let b1 = 0.470_142_064_105_115;
    let w1 = 0.132_394_152_788_506;
    let a2 = 0.797_426_985_353_087;
    let b2 = 0.101_286_507_323_456;
    let w2 = 0.125_939_180_544_827;
    (
        [
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [a1, b1, b1],
            [b1, a1, b1],
            [b1, b1, a1],
            [a2, b2, b2],
            [b2, a2, b2],
            [b2, b2, a2],
        ],
        [9.0 / 40.0, w1, w1, w1, w2, w2, w2],
    )
}

/// Separated-pair rule: 5-point Gauss per dimension through the corner map
/// `(u, v) -> (u, u v)` on each triangle; per-pair relative error is below
/// 1e-9 at the separation threshold used here.
struct TensorRule {
    uv: Vec<(f64, f64, f64)>,
}

impl TensorRule {
    fn new() -> Self {
        let (x, w) = gauss_legendre_01::<f64>(5);
        let mut uv = Vec::with_capacity(25);
        for (&u, &wu) in x.iter().zip(&w) {
            for (&v, &wv) in x.iter().zip(&w) {
                uv.push((u, u * v, wu * wv * u));
            }
        }
        Self { uv }
    }

    fn points(&self, s: &Sub) -> Vec<(Point3<f64>, f64, [f64; 3])> {
        let g = (s.p[1] - s.p[0]).cross(&(s.p[2] - s.p[1])).norm();
        self.uv
            .iter()
            .map(|&(u, v, w)| {
                let x = Point3::from(
                    s.p[0].coords + (s.p[1] - s.p[0]) * u + (s.p[2] - s.p[1]) * v,
                );
                let h = [1.0 - u, u - v, v];
                let dens = [
                    s.vals[0][0] * h[0] + s.vals[0][1] * h[1] + s.vals[0][2] * h[2],
                    s.vals[1][0] * h[0] + s.vals[1][1] * h[1] + s.vals[1][2] * h[2],
                    s.vals[2][0] * h[0] + s.vals[2][1] * h[1] + s.vals[2][2] * h[2],
                ];
                (x, w * g, dens)
            })
            .collect()
    }
}

fn separated_pair(rule: &TensorRule, a: &Sub, b: &Sub, k: f64, acc: &mut [f64; 9]) {
    let pa = rule.points(a);
    let pb = rule.points(b);
    for (xa, wa, da) in &pa {
        for (xb, wb, db) in &pb {
            let r = (xa - xb).norm();
            let g = wa * wb * (-k * r).exp() / (FOUR_PI * r);
            for i in 0..3 {
                for j in 0..3 {
                    acc[3 * i + j] += g * da[i] * db[j];
                }
            }
        }
    }
}

fn adaptive(rule: &TensorRule, a: &Sub, b: &Sub, k: f64, depth: usize, acc: &mut [f64; 9]) {
    let dist = triangle_distance(&a.p, &b.p);
    let scale = a.diameter().max(b.diameter());
    if dist > 1.5 * scale {
        separated_pair(rule, a, b, k, acc);
        return;
    }
    if depth == 0 {
        return; // truncated touching tail, removed by extrapolation
    }
    for ca in a.split() {
        for cb in b.split() {
            adaptive(rule, &ca, &cb, k, depth - 1, acc);
        }
    }
}

/// Two-stage Richardson over the subdivision depth. An edge-adjacent pair
/// leaves two half-size edge children per level, so its truncation tail
/// scales by 1/4 per depth (with a 1/8 next order); a vertex-adjacent pair
/// leaves one child and scales by 1/8 (then 1/16).
fn subdivision_oracle(
    a: &Sub,
    b: &Sub,
    k: f64,
    depth: usize,
    tail_ratios: (f64, f64),
) -> ([f64; 9], f64) {
    let rule = TensorRule::new();
    let levels: Vec<[f64; 9]> = (depth - 2..=depth)
        .map(|d| {
            let mut acc = [0.0; 9];
            adaptive(&rule, a, b, k, d, &mut acc);
            acc
        })
        .collect();
    let (r1, r2) = tail_ratios;
    let e1 = |hi: &[f64; 9], lo: &[f64; 9]| {
        let mut v = [0.0; 9];
        for i in 0..9 {
            v[i] = hi[i] + (hi[i] - lo[i]) / (r1 - 1.0);
        }
        v
    };
    let a1 = e1(&levels[1], &levels[0]);
    let a2 = e1(&levels[2], &levels[1]);
    let mut out = [0.0; 9];
    let mut internal: f64 = 0.0;
    for i in 0..9 {
        out[i] = a2[i] + (a2[i] - a1[i]) / (r2 - 1.0);
        internal = internal.max(((a2[i] - a1[i]) / (r2 - 1.0)).abs() / out[i].abs());
    }
    (out, internal)
}

// ---------------------------------------------------------------------------
// production evaluation through the public tensor rules
// ---------------------------------------------------------------------------

fn production_entries(
    va: &[Point3<f64>; 3],
    vb: &[Point3<f64>; 3],
    nodes: &[PairNode<f64>],
    k: f64,
) -> [f64; 9] {
    let chart = |v: &[Point3<f64>; 3], p: [f64; 2]| {
        Point3::from(v[0].coords + (v[1] - v[0]) * p[0] + (v[2] - v[1]) * p[1])
    };
    let area = |v: &[Point3<f64>; 3]| (v[1] - v[0]).cross(&(v[2] - v[0])).norm() * 0.5;
    let mut out = [0.0; 9];
    for node in nodes {
        let xp = chart(va, node.x);
        let yp = chart(vb, node.y);
        let r = (xp - yp).norm();
        let g = node.weight * (-k * r).exp() / (FOUR_PI * r);
        let hx = simplex_hats(node.x);
        let hy = simplex_hats(node.y);
        for m in 0..3 {
            for n in 0..3 {
                out[3 * m + n] += g * hx[m] * hy[n];
            }
        }
    }
    let s = 4.0 * area(va) * area(vb);
    for v in &mut out {
        *v *= s;
    }
    out
}

fn assert_close(prod: &[f64; 9], oracle: &[f64; 9], tol: f64, label: &str) {
    for i in 0..9 {
        let rel = (prod[i] - oracle[i]).abs() / oracle[i].abs();
        assert!(
            rel < tol,
            "{label} entry {i}: production {} vs oracle {} (rel {rel:.2e})",
            prod[i],
            oracle[i]
        );
    }
}

// ---------------------------------------------------------------------------
// the tests
// ---------------------------------------------------------------------------

#[test]
fn coincident_hats_match_analytic_oracle() {
    let tri = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    let (oracle, internal) = analytic_coincident_entries(&tri);
    assert!(internal < 2e-8, "oracle not converged: {internal:.2e}");
    // the transform scheme reproduces the oracle once the tensor order
    // resolves the integrand
    let converged = production_entries(&tri, &tri, &SingularRules::<f64>::new(10).coincident, 0.0);
    assert_close(&converged, &oracle, 1e-6, "coincident");
    // the production default (4 points per dimension) carries only the
    // quadrature truncation of an analytic integrand, a few 1e-4 relative
    let default = production_entries(&tri, &tri, &SingularRules::<f64>::new(4).coincident, 0.0);
    assert_close(&default, &oracle, 1e-3, "coincident default order");
    for m in 0..3 {
        for n in 0..3 {
            assert!((default[3 * m + n] - default[3 * n + m]).abs() < 1e-15);
        }
    }
}

#[test]
fn coincident_oracle_valid_on_skewed_triangles() {
    let tri = [
        Point3::new(0.2, -0.1, 0.5),
        Point3::new(1.3, 0.2, 0.5),
        Point3::new(0.4, 0.9, 0.5),
    ];
    let (oracle, internal) = analytic_coincident_entries(&tri);
    assert!(internal < 2e-8, "oracle not converged: {internal:.2e}");
    let converged = production_entries(&tri, &tri, &SingularRules::<f64>::new(10).coincident, 0.0);
    assert_close(&converged, &oracle, 1e-6, "skewed coincident");
}

#[test]
fn edge_adjacent_hats_match_subdivision_oracle() {
    // shared edge ordered identically on both charts, apex out of plane
    let ta = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.3, 0.9, 0.1),
    ];
    let tb = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.4, -0.7, 0.3),
    ];
    let converged = SingularRules::<f64>::new(10);
    let default = SingularRules::<f64>::new(4);
    for k in [0.0, 0.7] {
        let (oracle, internal) = subdivision_oracle(
            &Sub { p: ta, vals: HATS },
            &Sub { p: tb, vals: HATS },
            k,
            10,
            (4.0, 8.0),
        );
        assert!(internal < 1e-6, "oracle not converged: {internal:.2e}");
        assert_close(
            &production_entries(&ta, &tb, &converged.edge, k),
            &oracle,
            3e-6,
            "edge",
        );
        assert_close(
            &production_entries(&ta, &tb, &default.edge, k),
            &oracle,
            1e-3,
            "edge default order",
        );
    }
}

#[test]
fn vertex_adjacent_hats_match_subdivision_oracle() {
    // shared vertex first on both charts
    let ta = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.1, 0.0),
        Point3::new(0.4, 1.0, 0.2),
    ];
    let tb = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(-0.9, -0.2, 0.1),
        Point3::new(-0.3, -1.0, -0.2),
    ];
    let converged = SingularRules::<f64>::new(10);
    let default = SingularRules::<f64>::new(4);
    for k in [0.0, 0.4] {
        let (oracle, internal) = subdivision_oracle(
            &Sub { p: ta, vals: HATS },
            &Sub { p: tb, vals: HATS },
            k,
            10,
            (8.0, 16.0),
        );
        assert!(internal < 1e-6, "oracle not converged: {internal:.2e}");
        assert_close(
            &production_entries(&ta, &tb, &converged.vertex, k),
            &oracle,
            3e-6,
            "vertex",
        );
        assert_close(
            &production_entries(&ta, &tb, &default.vertex, k),
            &oracle,
            1e-3,
            "vertex default order",
        );
    }
}

/// Assembled self-block of a tetrahedron at `k = 0`: every panel pair is
/// coincident (analytic oracle) or edge-adjacent (subdivision oracle), so
/// this checks production assembly end to end, including vertex-order
/// permutations and the symmetric scatter.
#[test]
fn tetrahedron_block_matches_oracle() {
    let verts = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let tris = vec![[0u32, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    let mesh = SurfaceMesh::new(verts, tris).unwrap();
    let scene = Scene::new(vec![mesh]).unwrap();
    let space = P1Space::new(&scene);
    let v = assemble_block(
        &space,
        ImagWavenumber::new(0.0).unwrap(),
        0,
        0,
        &AssemblyConfig {
            singular_points: 10,
            ..AssemblyConfig::default()
        },
    )
    .unwrap();
    let mut expected = DMatrix::<f64>::zeros(4, 4);
    for ta in 0..4 {
        for tb in 0..4 {
            let pa = scene.body(0).triangle_points(ta);
            let pb = scene.body(0).triangle_points(tb);
            let (vals, internal) = if ta == tb {
                analytic_coincident_entries(&pa)
            } else {
                subdivision_oracle(
                    &Sub { p: pa, vals: HATS },
                    &Sub { p: pb, vals: HATS },
                    0.0,
                    10,
                    (4.0, 8.0),
                )
            };
            assert!(internal < 1e-6, "pair ({ta},{tb}) oracle: {internal:.2e}");
            let ia = scene.body(0).triangles()[ta];
            let ib = scene.body(0).triangles()[tb];
            for m in 0..3 {
                for n in 0..3 {
                    expected[(ia[m] as usize, ib[n] as usize)] += vals[3 * m + n];
                }
            }
        }
    }
    for i in 0..4 {
        for j in 0..4 {
            let rel = (v[(i, j)] - expected[(i, j)]).abs() / expected[(i, j)].abs();
            assert!(
                rel < 3e-6,
                "entry ({i},{j}): production {} vs oracle {} (rel {rel:.2e})",
                v[(i, j)],
                expected[(i, j)]
            );
        }
    }
}
