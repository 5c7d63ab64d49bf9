//! ASCII OFF mesh interchange.
//!
//! Format: line 1 is the literal `OFF`; line 2 is `nv nf 0`; then `nv`
//! vertex lines `x y z` and `nf` face lines `3 i j k` with 0-based indices.
//! `#` starts a comment anywhere on a line. Vertices are written with 17
//! significant digits so a save/load round trip is bit exact.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::SurfaceMesh;
use crate::{Error, Real, Result};

/// Parse a mesh from OFF text. The result is fully validated.
pub fn read_mesh<T: Real>(text: &str) -> Result<SurfaceMesh<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected OFF header"))?;
    if header != "OFF" {
        return Err(parse_err(line_no, &format!("expected `OFF`, found `{header}`")));
    }
    let (line_no, counts) = lines
        .next()
        .ok_or_else(|| parse_err(line_no, "missing `nv nf 0` count line"))?;
    let fields: Vec<&str> = counts.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(parse_err(line_no, "count line must be `nv nf 0`"));
    }
    let nv: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(line_no, "invalid vertex count"))?;
    let nf: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(line_no, "invalid face count"))?;
    if fields[2] != "0" {
        return Err(parse_err(line_no, "edge count field must be 0"));
    }

    let mut vertices = Vec::with_capacity(nv);
    let mut last_line = line_no;
    for _ in 0..nv {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(last_line, "unexpected end of file in vertex list"))?;
        last_line = line_no;
        let xyz: Vec<&str> = line.split_whitespace().collect();
        if xyz.len() != 3 {
            return Err(parse_err(line_no, "vertex line must have three coordinates"));
        }
        let mut p = [T::zero(); 3];
        for (slot, tok) in p.iter_mut().zip(&xyz) {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, &format!("invalid coordinate `{tok}`")))?;
            *slot = T::c(v);
        }
        vertices.push(Point3::new(p[0], p[1], p[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| parse_err(last_line, "unexpected end of file in face list"))?;
        last_line = line_no;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 || f[0] != "3" {
            return Err(parse_err(line_no, "face line must be `3 i j k`"));
        }
        let mut tri = [0u32; 3];
        for (slot, tok) in tri.iter_mut().zip(&f[1..]) {
            let idx: u32 = tok
                .parse()
                .map_err(|_| parse_err(line_no, &format!("invalid vertex index `{tok}`")))?;
            if idx as usize >= nv {
                return Err(parse_err(
                    line_no,
                    &format!("vertex index {idx} out of range (nv = {nv})"),
                ));
            }
            *slot = idx;
        }
        triangles.push(tri);
    }
    if lines.next().is_some() {
        return Err(parse_err(last_line + 1, "trailing content after face list"));
    }
    SurfaceMesh::new(vertices, triangles)
}

/// Serialize a mesh to OFF text.
pub fn write_mesh<T: Real>(mesh: &SurfaceMesh<T>) -> String {
    let mut out = String::new();
    out.push_str("OFF\n");
    out.push_str(&format!(
        "{} {} 0\n",
        mesh.vertex_count(),
        mesh.triangle_count()
    ));
    for v in mesh.vertices() {
        out.push_str(&format!(
            "{:.16e} {:.16e} {:.16e}\n",
            v.x.f64(),
            v.y.f64(),
            v.z.f64()
        ));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    out
}

pub fn load_mesh<T: Real>(path: impl AsRef<Path>) -> Result<SurfaceMesh<T>> {
    let text = fs::read_to_string(path)?;
    read_mesh(&text)
}

pub fn save_mesh<T: Real>(mesh: &SurfaceMesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(write_mesh(mesh).as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}
