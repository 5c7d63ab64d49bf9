//! Exact distance between triangulated bodies.
//!
//! The inter-body distance enters the decay-fit exponent, so it is computed
//! with exact triangle-triangle primitives (closest point on triangle,
//! segment-segment, plus a piercing test), not from vertices alone; vertex
//! distances overestimate the gap on coarse meshes.

use nalgebra::{Point3, Vector3};

use super::{Scene, SurfaceMesh};
use crate::{Error, Real, Result};

/// Closest point on triangle `(a, b, c)` to `p` (Ericson's region method).
pub fn closest_point_on_triangle<T: Real>(
    p: &Point3<T>,
    a: &Point3<T>,
    b: &Point3<T>,
    c: &Point3<T>,
) -> Point3<T> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= T::zero() && d2 <= T::zero() {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= T::zero() && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= T::zero() && d1 >= T::zero() && d3 <= T::zero() {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= T::zero() && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= T::zero() && d2 >= T::zero() && d6 <= T::zero() {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= T::zero() && (d4 - d3) >= T::zero() && (d5 - d6) >= T::zero() {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Squared distance between segments `p1 + s (q1 - p1)` and `p2 + t (q2 - p2)`.
fn segment_segment_sq<T: Real>(
    p1: &Point3<T>,
    q1: &Point3<T>,
    p2: &Point3<T>,
    q2: &Point3<T>,
) -> T {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = T::default_epsilon() * T::c(16.0);
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm_squared();
    }
    if a <= eps {
        s = T::zero();
        t = (f / e).clamp(T::zero(), T::one());
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = T::zero();
            s = (-c / a).clamp(T::zero(), T::one());
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > T::zero() {
                ((b * f - c * e) / denom).clamp(T::zero(), T::one())
            } else {
                T::zero()
            };
            let mut t_ = (b * s_ + f) / e;
            if t_ < T::zero() {
                t_ = T::zero();
                s_ = (-c / a).clamp(T::zero(), T::one());
            } else if t_ > T::one() {
                t_ = T::one();
                s_ = ((b - c) / a).clamp(T::zero(), T::one());
            }
            s = s_;
            t = t_;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm_squared()
}

/// Does the segment `p -> q` pass through triangle `(a, b, c)`?
fn segment_pierces_triangle<T: Real>(
    p: &Point3<T>,
    q: &Point3<T>,
    a: &Point3<T>,
    b: &Point3<T>,
    c: &Point3<T>,
) -> bool {
    let dir = q - p;
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() <= T::default_epsilon() * T::c(16.0) {
        return false; // parallel; grazing contact is caught by the distance primitives
    }
    let inv = T::one() / det;
    let s = p - a;
    let u = s.dot(&h) * inv;
    if u < T::zero() || u > T::one() {
        return false;
    }
    let qv = s.cross(&e1);
    let v = dir.dot(&qv) * inv;
    if v < T::zero() || u + v > T::one() {
        return false;
    }
    let t = e2.dot(&qv) * inv;
    t >= T::zero() && t <= T::one()
}

/// Exact distance between two triangles, zero if they touch or pierce.
pub fn triangle_distance<T: Real>(t1: &[Point3<T>; 3], t2: &[Point3<T>; 3]) -> T {
    // piercing means contact
    for i in 0..3 {
        let (p, q) = (&t1[i], &t1[(i + 1) % 3]);
        if segment_pierces_triangle(p, q, &t2[0], &t2[1], &t2[2]) {
            return T::zero();
        }
        let (p, q) = (&t2[i], &t2[(i + 1) % 3]);
        if segment_pierces_triangle(p, q, &t1[0], &t1[1], &t1[2]) {
            return T::zero();
        }
    }
    let mut best = T::max_value().unwrap_or_else(T::one);
    for i in 0..3 {
        let cp = closest_point_on_triangle(&t1[i], &t2[0], &t2[1], &t2[2]);
        best = best.min((t1[i] - cp).norm_squared());
        let cp = closest_point_on_triangle(&t2[i], &t1[0], &t1[1], &t1[2]);
        best = best.min((t2[i] - cp).norm_squared());
        for j in 0..3 {
            let d = segment_segment_sq(
                &t1[i],
                &t1[(i + 1) % 3],
                &t2[j],
                &t2[(j + 1) % 3],
            );
            best = best.min(d);
        }
    }
    best.sqrt()
}

#[derive(Clone, Copy)]
struct Aabb<T: Real> {
    lo: Vector3<T>,
    hi: Vector3<T>,
}

impl<T: Real> Aabb<T> {
    fn of(points: &[Point3<T>; 3]) -> Self {
        let mut lo = points[0].coords;
        let mut hi = points[0].coords;
        for p in &points[1..] {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        Self { lo, hi }
    }

    fn distance_sq(&self, other: &Self) -> T {
        let mut d2 = T::zero();
        for d in 0..3 {
            let gap = (other.lo[d] - self.hi[d]).max(self.lo[d] - other.hi[d]);
            if gap > T::zero() {
                d2 += gap * gap;
            }
        }
        d2
    }
}

/// Minimum surface-to-surface distance over all body pairs of the scene.
///
/// Errors when the scene has a single body or when two bodies touch or
/// overlap (distance below `1e-12` of the scene scale).
pub fn min_distance<T: Real>(scene: &Scene<T>) -> Result<T> {
    if scene.body_count() < 2 {
        return Err(Error::SceneInvalid(
            "minimum distance needs at least two bodies".into(),
        ));
    }
    let mut best = T::max_value().unwrap_or_else(T::one);
    for i in 0..scene.body_count() {
        for j in i + 1..scene.body_count() {
            let d = body_distance(scene.body(i), scene.body(j), best);
            best = best.min(d);
        }
    }
    let scale = scene
        .bodies()
        .iter()
        .map(|b| {
            let (lo, hi) = b.bounding_box();
            (hi - lo).norm()
        })
        .fold(T::one(), |m, v| m.max(v));
    if best <= scale * T::c(1e-12) {
        return Err(Error::SceneInvalid(format!(
            "bodies touch or overlap (distance {})",
            best.f64()
        )));
    }
    Ok(best)
}

fn body_distance<T: Real>(a: &SurfaceMesh<T>, b: &SurfaceMesh<T>, upper: T) -> T {
    let tris_a: Vec<[Point3<T>; 3]> = (0..a.triangle_count())
        .map(|t| a.triangle_points(t))
        .collect();
    let tris_b: Vec<[Point3<T>; 3]> = (0..b.triangle_count())
        .map(|t| b.triangle_points(t))
        .collect();
    let boxes_a: Vec<Aabb<T>> = tris_a.iter().map(Aabb::of).collect();
    let boxes_b: Vec<Aabb<T>> = tris_b.iter().map(Aabb::of).collect();
    let mut best = upper;
    let mut best_sq = best * best;
    for (ta, ba) in tris_a.iter().zip(&boxes_a) {
        for (tb, bb) in tris_b.iter().zip(&boxes_b) {
            if ba.distance_sq(bb) >= best_sq {
                continue;
            }
            let d = triangle_distance(ta, tb);
            if d < best {
                best = d;
                best_sq = best * best;
                if best == T::zero() {
                    return best;
                }
            }
        }
    }
    best
}
