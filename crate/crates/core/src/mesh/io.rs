//! Plain-text mesh format and SVG snapshots.
//!
//! ```text
//! polymesh 2d
//! vertices 4
//! 0 0
//! 1 0
//! 1 1
//! 0 1
//! elements 1
//! 4 0 1 2 3
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::PolyMesh;
use crate::error::{Error, Result};
use crate::geometry::Point;

pub fn write_mesh(mesh: &PolyMesh, mut out: impl Write) -> Result<()> {
    writeln!(out, "polymesh 2d")?;
    writeln!(out, "vertices {}", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:?} {:?}", p.x, p.y)?;
    }
    writeln!(out, "elements {}", mesh.num_elements())?;
    for cycle in mesh.elements() {
        let mut line = cycle.len().to_string();
        for v in cycle {
            let _ = write!(line, " {v}");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_mesh(input: impl BufRead) -> Result<PolyMesh> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        });
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(r) => Ok(r?),
            None => Err(Error::Parse { line: 0, message: format!("unexpected end of input, expected {what}") }),
        }
    };

    let (line, header) = next("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["polymesh", "2d"] {
        return Err(Error::Parse { line, message: format!("expected 'polymesh 2d', found '{header}'") });
    }
    let nv = count(next("vertex count")?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = next("vertex")?;
        let xs = parse_all::<f64>(line, &text)?;
        if xs.len() != 2 {
            return Err(Error::Parse { line, message: "vertex needs two coordinates".into() });
        }
        vertices.push(Point::new(xs[0], xs[1]));
    }
    let ne = count(next("element count")?, "elements")?;
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, text) = next("element")?;
        let ids = parse_all::<usize>(line, &text)?;
        if ids.is_empty() || ids[0] + 1 != ids.len() {
            return Err(Error::Parse { line, message: "element vertex count does not match".into() });
        }
        elements.push(ids[1..].to_vec());
    }
    if let Some(r) = lines.next() {
        let (line, _) = r?;
        return Err(Error::Parse { line, message: "trailing content".into() });
    }
    PolyMesh::new(vertices, elements)
}

fn count((line, text): (usize, String), keyword: &str) -> Result<usize> {
    let mut it = text.split_whitespace();
    match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
        (Some(k), Some(Ok(n)), None) if k == keyword => Ok(n),
        _ => Err(Error::Parse { line, message: format!("expected '{keyword} <count>'") }),
    }
}

fn parse_all<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| Error::Parse { line, message: format!("cannot parse '{t}'") }))
        .collect()
}

/// SVG drawing of the mesh with one stroke-only polygon per element.
pub fn write_svg(mesh: &PolyMesh) -> String {
    let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in mesh.vertices() {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let size = 800.0;
    let margin = 10.0;
    let scale = (size - 2.0 * margin) / (hi.x - lo.x).max(hi.y - lo.y);
    let width = (hi.x - lo.x) * scale + 2.0 * margin;
    let height = (hi.y - lo.y) * scale + 2.0 * margin;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" viewBox=\"0 0 {width:.1} {height:.1}\">"
    );
    for cycle in mesh.elements() {
        s.push_str("<polygon fill=\"none\" stroke=\"black\" stroke-width=\"0.5\" points=\"");
        for (k, &v) in cycle.iter().enumerate() {
            let p = mesh.vertex(v);
            let x = margin + (p.x - lo.x) * scale;
            let y = margin + (hi.y - p.y) * scale;
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.3},{y:.3}");
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_mesh_svg(mesh: &PolyMesh, path: impl AsRef<std::path::Path>) -> Result<()> {
    std::fs::write(path, write_svg(mesh))?;
    Ok(())
}
