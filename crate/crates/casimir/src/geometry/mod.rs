//! Triangulated multi-body scenes.
//!
//! Meshes are immutable after construction: generators and [`transform`]
//! always return new values, and every constructor runs the watertightness
//! checks, so downstream assembly can assume closed, consistently oriented
//! surfaces.

mod distance;
mod generators;
mod off;

pub use distance::{min_distance, triangle_distance};
pub use generators::{make_box, make_ellipsoid, make_sphere, make_torus};
pub use off::{load_mesh, read_mesh, save_mesh, write_mesh};

use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, Vector3};

use crate::{Error, Real, Result};

/// Closed, consistently oriented triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh<T: Real> {
    vertices: Vec<Point3<T>>,
    triangles: Vec<[u32; 3]>,
}

impl<T: Real> SurfaceMesh<T> {
    /// Build a mesh and check the invariants: valid indices, no degenerate
    /// triangles, watertight, consistently oriented, no unused vertices.
    pub fn new(vertices: Vec<Point3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len() as u32;
        if self.triangles.is_empty() {
            return Err(Error::InvalidGeometry("mesh has no triangles".into()));
        }
        let mut referenced = vec![false; nv as usize];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(Error::InvalidGeometry(format!(
                        "triangle {t} references vertex {i} out of {nv}"
                    )));
                }
                referenced[i as usize] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} repeats a vertex"
                )));
            }
        }
        if let Some(v) = referenced.iter().position(|&r| !r) {
            return Err(Error::InvalidGeometry(format!(
                "vertex {v} is not referenced by any triangle"
            )));
        }

        // degenerate triangles: area must be positive relative to the edge scale
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_points(t);
            let ab = b - a;
            let ac = c - a;
            let area2 = ab.cross(&ac).norm();
            let scale = ab.norm_squared() + ac.norm_squared();
            if area2 <= scale * T::c(1e-12) {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} is degenerate (area {})",
                    (area2 * T::c(0.5)).f64()
                )));
            }
        }

        // Each directed edge must occur exactly once; this simultaneously
        // enforces closedness (both directions present) and consistent
        // orientation (no direction repeated).
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count > 1 {
                return Err(Error::InvalidGeometry(format!(
                    "directed edge ({a},{b}) used by {count} triangles; mesh is \
                     non-manifold or inconsistently oriented"
                )));
            }
            if !directed.contains_key(&(b, a)) {
                return Err(Error::InvalidGeometry(format!(
                    "edge ({a},{b}) has no opposite; surface is not closed"
                )));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangle_points(t);
        (b - a).cross(&(c - a)).norm() * T::c(0.5)
    }

    pub fn area(&self) -> T {
        (0..self.triangle_count())
            .map(|t| self.triangle_area(t))
            .fold(T::zero(), |s, a| s + a)
    }

    /// Enclosed volume by the divergence theorem; positive for outward
    /// orientation.
    pub fn signed_volume(&self) -> T {
        let sixth = T::c(1.0 / 6.0);
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let a = self.vertices[a as usize].coords;
                let b = self.vertices[b as usize].coords;
                let c = self.vertices[c as usize].coords;
                a.dot(&b.cross(&c))
            })
            .fold(T::zero(), |s, v| s + v)
            * sixth
    }

    /// Area-weighted surface centroid.
    pub fn centroid(&self) -> Point3<T> {
        let mut acc = Vector3::zeros();
        let mut area = T::zero();
        let third = T::c(1.0 / 3.0);
        for t in 0..self.triangle_count() {
            let [a, b, c] = self.triangle_points(t);
            let w = self.triangle_area(t);
            acc += (a.coords + b.coords + c.coords) * (w * third);
            area += w;
        }
        Point3::from(acc / area)
    }

    pub fn max_edge_length(&self) -> T {
        let mut m = T::zero();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = self.vertices[tri[e] as usize];
                let b = self.vertices[tri[(e + 1) % 3] as usize];
                let l = (b - a).norm();
                if l > m {
                    m = l;
                }
            }
        }
        m
    }

    pub fn bounding_box(&self) -> (Point3<T>, Point3<T>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for d in 0..3 {
                if v[d] < lo[d] {
                    lo[d] = v[d];
                }
                if v[d] > hi[d] {
                    hi[d] = v[d];
                }
            }
        }
        (lo, hi)
    }

    /// Euler characteristic `V - E + F` (2 for sphere topology, 0 for torus).
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri[e];
                let b = tri[(e + 1) % 3];
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}

/// Apply the rigid motion `x -> R x + t` to every vertex. Connectivity is
/// untouched; the input mesh stays valid because rigid motions preserve all
/// mesh invariants.
pub fn transform<T: Real>(
    mesh: &SurfaceMesh<T>,
    rotation: &Matrix3<T>,
    translation: &Vector3<T>,
) -> Result<SurfaceMesh<T>> {
    let tol = {
        let floor = T::default_epsilon() * T::c(100.0);
        let spec = T::c(1e-12);
        if spec > floor {
            spec
        } else {
            floor
        }
    };
    let gram = rotation.transpose() * rotation;
    let mut max_dev = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { T::one() } else { T::zero() };
            let dev = (gram[(i, j)] - target).abs();
            if dev > max_dev {
                max_dev = dev;
            }
        }
    }
    if max_dev > tol {
        return Err(Error::InvalidTransform(format!(
            "rotation is not orthonormal (deviation {})",
            max_dev.f64()
        )));
    }
    if (rotation.determinant() - T::one()).abs() > tol {
        return Err(Error::InvalidTransform(
            "rotation determinant is not +1".into(),
        ));
    }
    let vertices = mesh
        .vertices
        .iter()
        .map(|p| Point3::from(rotation * p.coords + translation))
        .collect();
    Ok(SurfaceMesh {
        vertices,
        triangles: mesh.triangles.clone(),
    })
}

/// Ordered collection of placed bodies.
///
/// `group_ids` declares which bodies are copies of the same base geometry
/// (identical up to the rigid placement); solvers use it to factor repeated
/// diagonal blocks only once. Identity is declared by the scene builder, not
/// inferred from coordinates.
#[derive(Debug, Clone)]
pub struct Scene<T: Real> {
    bodies: Vec<SurfaceMesh<T>>,
    group_ids: Vec<usize>,
}

impl<T: Real> Scene<T> {
    /// Scene of unrelated bodies (every body its own group).
    pub fn new(bodies: Vec<SurfaceMesh<T>>) -> Result<Self> {
        let group_ids = (0..bodies.len()).collect();
        Self::with_groups(bodies, group_ids)
    }

    /// Scene with explicit identical-body groups.
    pub fn with_groups(bodies: Vec<SurfaceMesh<T>>, group_ids: Vec<usize>) -> Result<Self> {
        if bodies.is_empty() {
            return Err(Error::SceneInvalid("scene needs at least one body".into()));
        }
        if group_ids.len() != bodies.len() {
            return Err(Error::SceneInvalid(
                "group id list does not match body count".into(),
            ));
        }
        for (i, g) in group_ids.iter().enumerate() {
            if *g > i {
                return Err(Error::SceneInvalid(format!(
                    "group id {g} of body {i} must reference an earlier body"
                )));
            }
            if group_ids[*g] != *g {
                return Err(Error::SceneInvalid(format!(
                    "group id {g} is not a group representative"
                )));
            }
            if bodies[*g].vertex_count() != bodies[i].vertex_count()
                || bodies[*g].triangle_count() != bodies[i].triangle_count()
            {
                return Err(Error::SceneInvalid(format!(
                    "body {i} declared identical to body {g} but sizes differ"
                )));
            }
        }
        Ok(Self { bodies, group_ids })
    }

    /// Assemble a scene from base meshes and rigid placements. Bodies placed
    /// from the same base index are declared identical.
    pub fn assemble(
        bases: &[SurfaceMesh<T>],
        placements: &[(usize, Matrix3<T>, Vector3<T>)],
    ) -> Result<Self> {
        if placements.is_empty() {
            return Err(Error::SceneInvalid("scene needs at least one body".into()));
        }
        let mut first_use: HashMap<usize, usize> = HashMap::new();
        let mut bodies = Vec::with_capacity(placements.len());
        let mut group_ids = Vec::with_capacity(placements.len());
        for (i, (base, rot, tr)) in placements.iter().enumerate() {
            if *base >= bases.len() {
                return Err(Error::SceneInvalid(format!(
                    "placement {i} references missing base mesh {base}"
                )));
            }
            bodies.push(transform(&bases[*base], rot, tr)?);
            group_ids.push(*first_use.entry(*base).or_insert(i));
        }
        Self::with_groups(bodies, group_ids)
    }

    pub fn bodies(&self) -> &[SurfaceMesh<T>] {
        &self.bodies
    }

    pub fn body(&self, i: usize) -> &SurfaceMesh<T> {
        &self.bodies[i]
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    /// Group representative index for each body.
    pub fn group_ids(&self) -> &[usize] {
        &self.group_ids
    }

    /// Apply one rigid motion to every body, preserving the group structure.
    pub fn transformed(&self, rotation: &Matrix3<T>, translation: &Vector3<T>) -> Result<Self> {
        let bodies = self
            .bodies
            .iter()
            .map(|m| transform(m, rotation, translation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            bodies,
            group_ids: self.group_ids.clone(),
        })
    }

    /// Reorder bodies; groups follow the permutation.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.bodies.len() {
            return Err(Error::SceneInvalid("permutation length mismatch".into()));
        }
        let bodies: Vec<_> = order.iter().map(|&i| self.bodies[i].clone()).collect();
        // group representatives must be remapped to the earliest new position
        let mut new_pos = vec![0usize; order.len()];
        for (new_i, &old_i) in order.iter().enumerate() {
            new_pos[old_i] = new_i;
        }
        let mut group_ids = vec![usize::MAX; order.len()];
        for (new_i, &old_i) in order.iter().enumerate() {
            let old_rep = self.group_ids[old_i];
            // earliest new index among bodies of the same old group
            let rep = order
                .iter()
                .enumerate()
                .filter(|(_, &o)| self.group_ids[o] == old_rep)
                .map(|(n, _)| n)
                .min()
                .unwrap();
            group_ids[new_i] = rep;
        }
        Scene::with_groups(bodies, group_ids)
    }
}
