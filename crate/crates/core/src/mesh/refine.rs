//! Midpoint-barycentre refinement.
//!
//! A marked element with `n` straight boundary segments is split into `n`
//! quadrilaterals by joining the midpoint of every segment to the barycentre.
//! Midpoints landing inside an edge shared with an unmarked neighbour become
//! hanging nodes of that neighbour. A midpoint that coincides with an
//! existing collinear vertex reuses it.

use std::collections::HashMap;

use super::PolyMesh;
use crate::error::{Error, Result};
use crate::geometry::{self, Point};

struct Workspace {
    vertices: Vec<Point>,
    cycles: Vec<Vec<usize>>,
    owner: HashMap<(usize, usize), usize>,
}

impl Workspace {
    /// Inserts `m` between consecutive vertices `p -> q` of `cell` and, if an
    /// element traverses `q -> p`, into that element as well.
    fn split_edge(&mut self, cell: usize, p: usize, q: usize, m: usize) {
        insert_between(&mut self.cycles[cell], p, q, m);
        self.owner.remove(&(p, q));
        self.owner.insert((p, m), cell);
        self.owner.insert((m, q), cell);
        if let Some(nb) = self.owner.remove(&(q, p)) {
            insert_between(&mut self.cycles[nb], q, p, m);
            self.owner.insert((q, m), nb);
            self.owner.insert((m, p), nb);
        }
    }
}

fn insert_between(cycle: &mut Vec<usize>, p: usize, q: usize, m: usize) {
    let n = cycle.len();
    let i = (0..n)
        .find(|&i| cycle[i] == p && cycle[(i + 1) % n] == q)
        .expect("edge not found in cycle");
    cycle.insert(i + 1, m);
}

pub(super) fn refine(mesh: &PolyMesh, marked: &[usize]) -> Result<PolyMesh> {
    let mut marked: Vec<usize> = marked.to_vec();
    marked.sort_unstable();
    marked.dedup();
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    if let Some(&bad) = marked.iter().find(|&&e| e >= mesh.num_elements()) {
        return Err(Error::InvalidArgument(format!("marked element {bad} does not exist")));
    }
    for &e in &marked {
        if !mesh.is_convex(e) {
            return Err(Error::NonConvexElement { element: e });
        }
    }

    let mut ws = Workspace {
        vertices: mesh.vertices().to_vec(),
        cycles: mesh.elements().to_vec(),
        owner: HashMap::new(),
    };
    for (id, cycle) in ws.cycles.iter().enumerate() {
        let n = cycle.len();
        for i in 0..n {
            ws.owner.insert((cycle[i], cycle[(i + 1) % n]), id);
        }
    }

    let mut children: Vec<Option<Vec<usize>>> = vec![None; mesh.num_elements()];
    for &e in &marked {
        let h = mesh.diameter(e);
        let barycentre = mesh.centroid(e);

        // Place the midpoint of every straight segment.
        let corners: Vec<usize> = {
            let cycle = &ws.cycles[e];
            let poly: Vec<Point> = cycle.iter().map(|&v| ws.vertices[v]).collect();
            let flags = geometry::corner_flags(&poly);
            cycle.iter().zip(&flags).filter(|(_, &c)| c).map(|(&v, _)| v).collect()
        };
        let nc = corners.len();
        let mut mids = Vec::with_capacity(nc);
        for k in 0..nc {
            let a = corners[k];
            let b = corners[(k + 1) % nc];
            let pa = ws.vertices[a];
            let pb = ws.vertices[b];
            let mid = Point::from((pa.coords + pb.coords) * 0.5);
            let tol = 1e-12 * h + 8.0 * f64::EPSILON * mid.coords.amax();
            // Walk the segment a -> b.
            let cycle = &ws.cycles[e];
            let n = cycle.len();
            let start = cycle.iter().position(|&v| v == a).unwrap();
            let mut run = vec![a];
            let mut i = (start + 1) % n;
            while cycle[i] != b {
                run.push(cycle[i]);
                i = (i + 1) % n;
            }
            run.push(b);
            if let Some(&v) = run[1..run.len() - 1]
                .iter()
                .find(|&&v| (ws.vertices[v] - mid).norm() <= tol)
            {
                mids.push(v);
                continue;
            }
            let seg = pb - pa;
            let len2 = seg.norm_squared();
            let t_mid = 0.5;
            let mut placed = None;
            for w in run.windows(2) {
                let t0 = (ws.vertices[w[0]] - pa).dot(&seg) / len2;
                let t1 = (ws.vertices[w[1]] - pa).dot(&seg) / len2;
                if t0 < t_mid && t_mid < t1 {
                    placed = Some((w[0], w[1]));
                    break;
                }
            }
            let (p, q) = placed.ok_or_else(|| {
                Error::DegenerateGeometry(format!("midpoint of a segment of element {e} not found"))
            })?;
            let m = ws.vertices.len();
            ws.vertices.push(mid);
            ws.split_edge(e, p, q, m);
            mids.push(m);
        }

        // Split into one quadrilateral per corner.
        let cycle = ws.cycles[e].clone();
        let n = cycle.len();
        for i in 0..n {
            ws.owner.remove(&(cycle[i], cycle[(i + 1) % n]));
        }
        let c = ws.vertices.len();
        ws.vertices.push(barycentre);
        let mut kids = Vec::with_capacity(nc);
        for k in 0..nc {
            let from = mids[(k + nc - 1) % nc];
            let to = mids[k];
            let mut child = vec![c];
            let mut i = cycle.iter().position(|&v| v == from).unwrap();
            loop {
                child.push(cycle[i]);
                if cycle[i] == to {
                    break;
                }
                i = (i + 1) % n;
            }
            let id = ws.cycles.len();
            let len = child.len();
            for j in 0..len {
                ws.owner.insert((child[j], child[(j + 1) % len]), id);
            }
            ws.cycles.push(child);
            kids.push(id);
        }
        children[e] = Some(kids);
    }

    let mut cycles = Vec::with_capacity(ws.cycles.len());
    for (e, kids) in children.iter().enumerate() {
        match kids {
            None => cycles.push(ws.cycles[e].clone()),
            Some(ids) => cycles.extend(ids.iter().map(|&id| ws.cycles[id].clone())),
        }
    }
    PolyMesh::new(ws.vertices, cycles)
}
