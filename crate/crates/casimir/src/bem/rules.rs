//! Quadrature rules for Galerkin triangle-pair integrals.
//!
//! Disjoint panel pairs use a symmetric polynomial-degree-4 (6-point) rule on
//! each triangle, with a degree-5 (7-point) rule available one order up.
//! Pairs that share a vertex, an edge, or coincide are integrated with
//! regularizing tensor-product transforms on `[0,1]^4` in the Sauter-Schwab
//! style: the pair domain is split into subregions in relative coordinates
//! and rescaled so the Jacobian cancels the `1/r` kernel singularity exactly,
//! leaving an analytic integrand for the tensor Gauss rule.
//!
//! Conventions for the singular transforms: the reference simplex is
//! `T = {(u, v): 0 <= v <= u <= 1}` with chart
//! `x(u, v) = P1 + u (P2 - P1) + v (P3 - P2)`, and the linear hat functions
//! in chart coordinates are `(1 - u, u - v, v)` for `(P1, P2, P3)`.
//! For an edge-adjacent pair both charts must order the shared edge as
//! `(P1, P2)`; for a vertex-adjacent pair the shared vertex is `P1`.

use crate::linalg::gauss_legendre_01;
use crate::Real;

/// Symmetric Gauss rule on a triangle in barycentric coordinates; weights
/// sum to one, so `integral = area * sum_i w_i f(p_i)`.
#[derive(Debug, Clone)]
pub struct TriangleRule<T: Real> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
}

/// Polynomial order of the regular (disjoint-pair) rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RegularOrder {
    /// 6-point degree-4 rule (the default).
    Degree4,
    /// 7-point degree-5 rule (one order up, for consistency checks).
    Degree5,
}

impl<T: Real> TriangleRule<T> {
    pub fn new(order: RegularOrder) -> Self {
        match order {
            RegularOrder::Degree4 => {
                let a1 = 0.816_847_572_980_459;
                let b1 = 0.091_576_213_509_771;
                let w1 = 0.109_951_743_655_322;
                let a2 = 0.108_103_018_168_070;
                let b2 = 0.445_948_490_915_965;
                let w2 = 0.223_381_589_678_011;
                let orbits = [(a1, b1, w1), (a2, b2, w2)];
                let mut points = Vec::with_capacity(6);
                let mut weights = Vec::with_capacity(6);
                for (a, b, w) in orbits {
                    for perm in [[a, b, b], [b, a, b], [b, b, a]] {
                        points.push([T::c(perm[0]), T::c(perm[1]), T::c(perm[2])]);
                        weights.push(T::c(w));
                    }
                }
                Self { points, weights }
            }
            RegularOrder::Degree5 => {
                let mut points = vec![[T::c(1.0 / 3.0); 3]];
                let mut weights = vec![T::c(9.0 / 40.0)];
                let a1 = 0.059_715_871_789_770;
                let b1 = 0.470_142_064_105_115;
                let w1 = 0.132_394_152_788_506;
                let a2 = 0.797_426_985_353_087;
                let b2 = 0.101_286_507_323_456;
                let w2 = 0.125_939_180_544_827;
                for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
                    for perm in [[a, b, b], [b, a, b], [b, b, a]] {
                        points.push([T::c(perm[0]), T::c(perm[1]), T::c(perm[2])]);
                        weights.push(T::c(w));
                    }
                }
                Self { points, weights }
            }
        }
    }
}

/// How two panels of the same body touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    Coincident,
    SharedEdge,
    SharedVertex,
    Disjoint,
}

/// One evaluation node of a regularized tensor rule: simplex coordinates for
/// both panels plus the combined weight (Gauss weights times the transform
/// Jacobian). The pair integral is
/// `4 A_a A_b * sum_nodes w * F(x_hat) F(y_hat)`-style with `F` evaluated on
/// the `(u, v)` charts.
#[derive(Debug, Clone, Copy)]
pub struct PairNode<T: Real> {
    /// `(u, v)` on the first panel's reference simplex.
    pub x: [T; 2],
    /// `(u, v)` on the second panel's reference simplex.
    pub y: [T; 2],
    pub weight: T,
}

/// Regularized tensor rules for the three touching-pair classes.
#[derive(Debug, Clone)]
pub struct SingularRules<T: Real> {
    pub coincident: Vec<PairNode<T>>,
    pub edge: Vec<PairNode<T>>,
    pub vertex: Vec<PairNode<T>>,
}

impl<T: Real> SingularRules<T> {
    /// Build the rules with `n` Gauss points per tensor dimension.
    pub fn new(n: usize) -> Self {
        let (g, w) = gauss_legendre_01::<T>(n);
        Self {
            coincident: coincident_nodes(&g, &w),
            edge: edge_nodes(&g, &w),
            vertex: vertex_nodes(&g, &w),
        }
    }
}

/// Coincident panels. In relative coordinates `z = y - x` the pair domain
/// splits into three regions (each used with both argument orders); scaling
/// `z` by `xi` gives the Jacobian `xi (1 - xi)^2 s` that cancels `1/r`.
fn coincident_nodes<T: Real>(g: &[T], w: &[T]) -> Vec<PairNode<T>> {
    let n = g.len();
    let mut nodes = Vec::with_capacity(6 * n * n * n * n);
    for (i1, (&xi, &w1)) in g.iter().zip(w).enumerate() {
        let _ = i1;
        let one_m = T::one() - xi;
        for (&eta, &w2) in g.iter().zip(w) {
            for (&s, &w3) in g.iter().zip(w) {
                for (&t, &w4) in g.iter().zip(w) {
                    let base = w1 * w2 * w3 * w4 * xi * one_m * one_m * s;
                    // region 1: z = (xi, xi eta)
                    let x = [one_m * s, one_m * s * t];
                    let y = [x[0] + xi, x[1] + xi * eta];
                    push_both(&mut nodes, x, y, base);
                    // region 2: z = (xi eta, xi)
                    let x = [one_m * s + xi * (T::one() - eta), one_m * s * t];
                    let y = [x[0] + xi * eta, x[1] + xi];
                    push_both(&mut nodes, x, y, base);
                    // region 3: z = (-xi (1 - eta), xi eta)
                    let x = [one_m * s + xi, one_m * s * t];
                    let y = [one_m * s + xi * eta, one_m * s * t + xi * eta];
                    push_both(&mut nodes, x, y, base);
                }
            }
        }
    }
    nodes
}

/// Edge-adjacent panels sharing the chart edge `u in [0,1], v = 0`.
/// With `y1` as the outer scale the relative block `(x2, y2, y1 - x1)`
/// rescales into two cones with Jacobians `y1^3 rho^2` and `y1^3 rho^2 sigma`.
fn edge_nodes<T: Real>(g: &[T], w: &[T]) -> Vec<PairNode<T>> {
    let n = g.len();
    let mut nodes = Vec::with_capacity(4 * n * n * n * n);
    for (&v, &w1) in g.iter().zip(w) {
        let v3 = v * v * v;
        for (&rho, &w2) in g.iter().zip(w) {
            for (&p3, &w3) in g.iter().zip(w) {
                for (&p4, &w4) in g.iter().zip(w) {
                    let ww = w1 * w2 * w3 * w4 * v3 * rho * rho;
                    // cone A: (tau, beta) = (p3, p4)
                    let (tau, beta) = (p3, p4);
                    let x = [v * (T::one() - rho * (T::one() - tau)), v * rho * tau];
                    let y = [v, v * rho * beta];
                    push_both(&mut nodes, x, y, ww);
                    // cone B: (sigma, tau) = (p3, p4)
                    let (sigma, tau) = (p3, p4);
                    let x = [
                        v * (T::one() - rho * sigma * (T::one() - tau)),
                        v * rho * sigma * tau,
                    ];
                    let y = [v, v * rho];
                    push_both(&mut nodes, x, y, ww * sigma);
                }
            }
        }
    }
    nodes
}

/// Vertex-adjacent panels sharing the chart origin. Scaling both simplex
/// coordinates by the larger first coordinate gives Jacobian `xi^3 beta`.
fn vertex_nodes<T: Real>(g: &[T], w: &[T]) -> Vec<PairNode<T>> {
    let n = g.len();
    let mut nodes = Vec::with_capacity(2 * n * n * n * n);
    for (&xi, &w1) in g.iter().zip(w) {
        let xi3 = xi * xi * xi;
        for (&alpha, &w2) in g.iter().zip(w) {
            for (&beta, &w3) in g.iter().zip(w) {
                for (&gamma, &w4) in g.iter().zip(w) {
                    let ww = w1 * w2 * w3 * w4 * xi3 * beta;
                    let a = [xi, xi * alpha];
                    let b = [xi * beta, xi * beta * gamma];
                    nodes.push(PairNode { x: a, y: b, weight: ww });
                    nodes.push(PairNode { x: b, y: a, weight: ww });
                }
            }
        }
    }
    nodes
}

fn push_both<T: Real>(nodes: &mut Vec<PairNode<T>>, x: [T; 2], y: [T; 2], weight: T) {
    nodes.push(PairNode { x, y, weight });
    nodes.push(PairNode { x: y, y: x, weight });
}

/// Hat-function values `(1 - u, u - v, v)` on the reference simplex.
#[inline(always)]
pub fn simplex_hats<T: Real>(p: [T; 2]) -> [T; 3] {
    [T::one() - p[0], p[0] - p[1], p[1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Point3, Vector3};

    #[test]
    fn triangle_rules_integrate_low_degree_exactly() {
        for order in [RegularOrder::Degree4, RegularOrder::Degree5] {
            let rule = TriangleRule::<f64>::new(order);
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-14);
            // integrate x^2 y^2 over the unit right triangle (area 1/2):
            // value = 1/180 -> with area factor: sum w * f = 1/90
            let f: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| {
                    // map barycentric to the (0,0),(1,0),(0,1) triangle
                    let x = p[1];
                    let y = p[2];
                    w * x * x * y * y
                })
                .sum();
            assert_relative_eq!(f * 0.5, 1.0 / 180.0, epsilon = 1e-12);
        }
    }

    /// Total measure of each singular rule must equal |T|^2 = 1/4; this pins
    /// the region decomposition and Jacobians independently of any kernel.
    #[test]
    fn singular_rules_reproduce_pair_measure() {
        let rules = SingularRules::<f64>::new(4);
        for (name, nodes) in [
            ("coincident", &rules.coincident),
            ("edge", &rules.edge),
            ("vertex", &rules.vertex),
        ] {
            let total: f64 = nodes.iter().map(|n| n.weight).sum();
            assert_relative_eq!(total, 0.25, epsilon = 1e-12);
            for node in nodes.iter() {
                for p in [node.x, node.y] {
                    assert!(
                        p[1] >= -1e-15 && p[1] <= p[0] + 1e-15 && p[0] <= 1.0 + 1e-15,
                        "{name} node outside simplex: {p:?}"
                    );
                }
            }
        }
    }

    /// For a smooth integrand the regularized rules must agree with a plain
    /// high-order tensor rule on T x T: this validates the decompositions
    /// exactly, with no singularity involved.
    #[test]
    fn singular_rules_exact_for_smooth_integrands() {
        let smooth = |x: [f64; 2], y: [f64; 2]| {
            (0.3 * x[0] - 0.7 * x[1] + 0.4 * y[0] + 0.2 * y[1]).exp()
        };
        // reference: tensor Gauss over both simplices via (u, v=u*t) maps
        let (g, w) = gauss_legendre_01::<f64>(16);
        let mut reference = 0.0;
        for (&u1, &a1) in g.iter().zip(&w) {
            for (&t1, &b1) in g.iter().zip(&w) {
                for (&u2, &a2) in g.iter().zip(&w) {
                    for (&t2, &b2) in g.iter().zip(&w) {
                        reference += a1 * b1 * a2 * b2
                            * u1
                            * u2
                            * smooth([u1, u1 * t1], [u2, u2 * t2]);
                    }
                }
            }
        }
        let rules = SingularRules::<f64>::new(12);
        for (name, nodes) in [
            ("coincident", &rules.coincident),
            ("edge", &rules.edge),
            ("vertex", &rules.vertex),
        ] {
            let total: f64 = nodes.iter().map(|n| n.weight * smooth(n.x, n.y)).sum();
            assert_relative_eq!(total, reference, max_relative = 1e-10);
            let _ = name;
        }
    }

    /// The edge rule must also integrate kernels with the singularity on the
    /// shared edge; compare against itself at increasing order (internal
    /// convergence) on an actual geometric pair.
    #[test]
    fn edge_rule_converges_on_singular_kernel() {
        // charts: shared edge (0,0)-(1,0), opposite vertices out of plane
        let chart_a = |p: [f64; 2]| {
            Point3::new(0.0, 0.0, 0.0)
                + p[0] * Vector3::new(1.0, 0.0, 0.0)
                + p[1] * (Vector3::new(0.3, 0.8, 0.0) - Vector3::new(1.0, 0.0, 0.0))
        };
        let chart_b = |p: [f64; 2]| {
            Point3::new(0.0, 0.0, 0.0)
                + p[0] * Vector3::new(1.0, 0.0, 0.0)
                + p[1] * (Vector3::new(0.6, -0.5, 0.4) - Vector3::new(1.0, 0.0, 0.0))
        };
        let eval = |n: usize| {
            let rules = SingularRules::<f64>::new(n);
            rules
                .edge
                .iter()
                .map(|node| {
                    let p = chart_a(node.x);
                    let q = chart_b(node.y);
                    node.weight / (p - q).norm()
                })
                .sum::<f64>()
        };
        let coarse = eval(4);
        let fine = eval(10);
        assert_relative_eq!(coarse, fine, max_relative = 1e-5);
    }
}
