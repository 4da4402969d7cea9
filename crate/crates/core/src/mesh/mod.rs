//! Polygonal meshes with hanging nodes.
//!
//! Elements are counter-clockwise vertex cycles. A hanging node is simply an
//! extra collinear vertex on the coarse side, so every mesh edge is shared by
//! at most two elements and the mesh is conforming in the polygonal sense.

mod generate;
mod io;
mod refine;

pub use generate::{build_cartesian_grid, build_voronoi_mesh, Domain};
pub use io::{read_mesh, write_mesh, write_mesh_svg, write_svg};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// A mesh edge. `vertices[0] < vertices[1]` fixes the global orientation used
/// by edge moments and traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// First incident element and the local index of the edge in it.
    pub first: (usize, usize),
    /// Second incident element for interior edges.
    pub second: Option<(usize, usize)>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }
}

/// Local edge of an element: global id and whether the element traverses it
/// along the global orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalEdge {
    pub edge: usize,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyMesh {
    vertices: Vec<Point>,
    elements: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    element_edges: Vec<Vec<LocalEdge>>,
    boundary_vertex: Vec<bool>,
    areas: Vec<f64>,
    centroids: Vec<Point>,
    diameters: Vec<f64>,
    edge_lengths: Vec<f64>,
}

/// Per-element shape-regularity measures.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    /// Distance from the barycentre to the boundary divided by `h_E`.
    pub ball_ratio: Vec<f64>,
    /// `min_e h_e / h_E` over the edges of each element.
    pub edge_ratio: Vec<f64>,
    /// Minimum over both criteria and all elements.
    pub rho: f64,
}

impl PolyMesh {
    /// Builds the mesh topology and validates orientation, simplicity and edge
    /// consistency.
    pub fn new(vertices: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidMesh("mesh has no elements".into()));
        }
        let mut areas = Vec::with_capacity(elements.len());
        let mut centroids = Vec::with_capacity(elements.len());
        let mut diameters = Vec::with_capacity(elements.len());
        for (id, cycle) in elements.iter().enumerate() {
            if cycle.len() < 3 {
                return Err(Error::InvalidMesh(format!("element {id} has fewer than 3 vertices")));
            }
            if let Some(&v) = cycle.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("element {id} references vertex {v}")));
            }
            let poly: Vec<Point> = cycle.iter().map(|&v| vertices[v]).collect();
            if !geometry::is_simple(&poly) {
                return Err(Error::InvalidMesh(format!("element {id} is not a simple polygon")));
            }
            let area = geometry::signed_area(&poly);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "element {id} is not counter-clockwise (signed area {area:e})"
                )));
            }
            areas.push(area);
            centroids.push(geometry::centroid(&poly));
            diameters.push(geometry::diameter(&poly));
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        for (id, cycle) in elements.iter().enumerate() {
            let n = cycle.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let a = cycle[i];
                let b = cycle[(i + 1) % n];
                let key = (a.min(b), a.max(b));
                let forward = a < b;
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, edges.len());
                        local.push(LocalEdge { edge: edges.len(), forward });
                        edges.push(Edge { vertices: [key.0, key.1], first: (id, i), second: None });
                    }
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.second.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) has more than two incident elements",
                                key.0, key.1
                            )));
                        }
                        let (other, other_local) = edge.first;
                        let other_forward = element_edges_forward(&elements[other], other_local, key);
                        if other_forward == forward {
                            return Err(Error::InvalidMesh(format!(
                                "elements {other} and {id} traverse edge ({}, {}) in the same direction",
                                key.0, key.1
                            )));
                        }
                        edge.second = Some((id, i));
                        local.push(LocalEdge { edge: e, forward });
                    }
                }
            }
            element_edges.push(local);
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        for e in &edges {
            if e.is_boundary() {
                boundary_vertex[e.vertices[0]] = true;
                boundary_vertex[e.vertices[1]] = true;
            }
        }
        let edge_lengths = edges
            .iter()
            .map(|e| (vertices[e.vertices[1]] - vertices[e.vertices[0]]).norm())
            .collect();

        Ok(Self {
            vertices,
            elements,
            edges,
            element_edges,
            boundary_vertex,
            areas,
            centroids,
            diameters,
            edge_lengths,
        })
    }

    /// Builds a mesh from polygons given by coordinates. Coincident vertices
    /// (closer than `1e-12` times the smallest element diameter) are merged and
    /// vertices lying inside another element's edge are inserted into that
    /// element as collinear vertices.
    pub fn from_polygons(polygons: &[Vec<Point>]) -> Result<Self> {
        let hmin = polygons
            .iter()
            .map(|p| geometry::diameter(p))
            .fold(f64::INFINITY, f64::min);
        if !(hmin > 0.0) {
            return Err(Error::InvalidMesh("degenerate polygon".into()));
        }
        let tol = 1e-12 * hmin;

        // Merge by sorting on x and scanning a tolerance window.
        let mut all: Vec<(Point, usize, usize)> = Vec::new();
        for (e, poly) in polygons.iter().enumerate() {
            for (i, p) in poly.iter().enumerate() {
                all.push((*p, e, i));
            }
        }
        let mut order: Vec<usize> = (0..all.len()).collect();
        order.sort_by(|&a, &b| all[a].0.x.total_cmp(&all[b].0.x).then(all[a].0.y.total_cmp(&all[b].0.y)));
        let mut id_of = vec![usize::MAX; all.len()];
        let mut vertices: Vec<Point> = Vec::new();
        for (k, &a) in order.iter().enumerate() {
            if id_of[a] != usize::MAX {
                continue;
            }
            let id = vertices.len();
            vertices.push(all[a].0);
            id_of[a] = id;
            for &b in &order[k + 1..] {
                if all[b].0.x - all[a].0.x > tol {
                    break;
                }
                if id_of[b] == usize::MAX && (all[b].0 - all[a].0).norm() <= tol {
                    id_of[b] = id;
                }
            }
        }
        // Renumber vertices in first-appearance order for readable output.
        let mut cycles: Vec<Vec<usize>> = Vec::with_capacity(polygons.len());
        let mut k = 0;
        for poly in polygons {
            let mut cycle = Vec::with_capacity(poly.len());
            for _ in poly {
                let v = id_of[k];
                if cycle.last() != Some(&v) {
                    cycle.push(v);
                }
                k += 1;
            }
            while cycle.len() > 1 && cycle.first() == cycle.last() {
                cycle.pop();
            }
            cycles.push(cycle);
        }
        let mut renumber = vec![usize::MAX; vertices.len()];
        let mut ordered = Vec::with_capacity(vertices.len());
        for cycle in &mut cycles {
            for v in cycle.iter_mut() {
                if renumber[*v] == usize::MAX {
                    renumber[*v] = ordered.len();
                    ordered.push(vertices[*v]);
                }
                *v = renumber[*v];
            }
        }
        let vertices = ordered;

        // Insert T-junction vertices.
        for cycle in &mut cycles {
            let mut out = Vec::with_capacity(cycle.len());
            let n = cycle.len();
            for i in 0..n {
                let a = cycle[i];
                let b = cycle[(i + 1) % n];
                out.push(a);
                let pa = vertices[a];
                let pb = vertices[b];
                let dir = pb - pa;
                let len2 = dir.norm_squared();
                let mut inside: Vec<(f64, usize)> = Vec::new();
                for (v, p) in vertices.iter().enumerate() {
                    if v == a || v == b {
                        continue;
                    }
                    let t = (p - pa).dot(&dir) / len2;
                    if t <= 0.0 || t >= 1.0 {
                        continue;
                    }
                    if geometry::point_segment_distance(p, &pa, &pb) <= tol {
                        inside.push((t, v));
                    }
                }
                inside.sort_by(|x, y| x.0.total_cmp(&y.0));
                out.extend(inside.into_iter().map(|(_, v)| v));
            }
            *cycle = out;
        }
        Self::new(vertices, cycles)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e]
    }

    pub fn element_polygon(&self, e: usize) -> Vec<Point> {
        self.elements[e].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn element_edges(&self, e: usize) -> &[LocalEdge] {
        &self.element_edges[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn centroid(&self, e: usize) -> Point {
        self.centroids[e]
    }

    /// `h_E`.
    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    /// `h_e`.
    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_lengths[e]
    }

    /// Global mesh size `h = max h_E`.
    pub fn h(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Unit normal of the edge pointing out of `element`.
    pub fn outward_normal(&self, element: usize, edge: usize) -> crate::geometry::Vector {
        let ed = &self.edges[edge];
        let a = self.vertices[ed.vertices[0]];
        let b = self.vertices[ed.vertices[1]];
        let d = (b - a) / self.edge_lengths[edge];
        // An element traversing a -> b counter-clockwise has its interior on
        // the left, so the right-hand normal points outward.
        let right = crate::geometry::Vector::new(d.y, -d.x);
        let (first, first_local) = ed.first;
        let forward = if first == element {
            self.element_edges[element][first_local].forward
        } else {
            let (_, l) = ed.second.expect("element is not incident to edge");
            self.element_edges[element][l].forward
        };
        if forward {
            right
        } else {
            -right
        }
    }

    /// Elements sharing an edge with `e`.
    pub fn edge_neighbors(&self, e: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.element_edges[e]
            .iter()
            .filter_map(|le| {
                let ed = &self.edges[le.edge];
                match ed.second {
                    Some((s, _)) if ed.first.0 == e => Some(s),
                    Some(_) => Some(ed.first.0),
                    None => None,
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_convex(&self, e: usize) -> bool {
        geometry::is_convex(&self.element_polygon(e))
    }

    /// Fan triangulation from the barycentre, one triangle per mesh edge.
    pub fn sub_triangulate(&self, e: usize) -> Result<Vec<[Point; 3]>> {
        let poly = self.element_polygon(e);
        if !geometry::is_convex(&poly) {
            return Err(Error::NonConvexElement { element: e });
        }
        let c = self.centroids[e];
        let n = poly.len();
        Ok((0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect())
    }

    pub fn regularity_check(&self) -> RegularityReport {
        let mut ball_ratio = Vec::with_capacity(self.elements.len());
        let mut edge_ratio = Vec::with_capacity(self.elements.len());
        for e in 0..self.elements.len() {
            let poly = self.element_polygon(e);
            let c = self.centroids[e];
            let h = self.diameters[e];
            let n = poly.len();
            let r = (0..n)
                .map(|i| geometry::point_segment_distance(&c, &poly[i], &poly[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min);
            ball_ratio.push(r / h);
            let he = self.element_edges[e]
                .iter()
                .map(|le| self.edge_lengths[le.edge])
                .fold(f64::INFINITY, f64::min);
            edge_ratio.push(he / h);
        }
        let rho = ball_ratio
            .iter()
            .chain(edge_ratio.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        RegularityReport { ball_ratio, edge_ratio, rho }
    }

    /// Barycentric midpoint refinement of the marked elements.
    pub fn refine(&self, marked: &[usize]) -> Result<PolyMesh> {
        refine::refine(self, marked)
    }
}

fn element_edges_forward(cycle: &[usize], local: usize, key: (usize, usize)) -> bool {
    let a = cycle[local];
    debug_assert!(a == key.0 || a == key.1);
    a == key.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> PolyMesh {
        PolyMesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn single_square_topology() {
        let m = unit_square();
        assert_eq!(m.num_edges(), 4);
        assert!(m.edges().iter().all(Edge::is_boundary));
        assert_eq!(m.h(), 2f64.sqrt());
        let n = m.outward_normal(0, m.element_edges(0)[0].edge);
        assert!((n - crate::geometry::Vector::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn square_subtriangulation() {
        let m = unit_square();
        let tris = m.sub_triangulate(0).unwrap();
        assert_eq!(tris.len(), 4);
        for t in &tris {
            assert!((geometry::signed_area(t) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_subtriangulation() {
        let m = PolyMesh::new(
            vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.3, 1.1)],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let tris = m.sub_triangulate(0).unwrap();
        assert_eq!(tris.len(), 3);
        let s: f64 = tris.iter().map(|t| geometry::signed_area(t)).sum();
        assert!((s - m.area(0)).abs() < 1e-12 * m.area(0));
    }

    #[test]
    fn pentagon_subtriangulation_equal_parts() {
        let pts: Vec<Point> = (0..5)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0;
                Point::new(a.cos(), a.sin())
            })
            .collect();
        // Shoelace oracle for the regular pentagon area.
        let area = 2.5 * (2.0 * std::f64::consts::PI / 5.0).sin();
        let m = PolyMesh::new(pts, vec![vec![0, 1, 2, 3, 4]]).unwrap();
        assert!((m.area(0) - area).abs() < 1e-14);
        for t in m.sub_triangulate(0).unwrap() {
            assert!((geometry::signed_area(&t) - area / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nonconvex_rejected() {
        let m = PolyMesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 2.0),
                Point::new(0.0, 2.0),
            ],
            vec![vec![0, 1, 2, 3, 4, 5]],
        )
        .unwrap();
        assert!(matches!(m.sub_triangulate(0), Err(Error::NonConvexElement { element: 0 })));
    }

    #[test]
    fn clockwise_rejected() {
        let r = PolyMesh::new(
            vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)],
            vec![vec![0, 1, 2]],
        );
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn square_regularity() {
        let r = unit_square().regularity_check();
        assert!((r.edge_ratio[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((r.ball_ratio[0] - 0.5 / 2f64.sqrt()).abs() < 1e-15);
        assert!((r.rho - 0.5 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn t_junction_inserted() {
        let polys = vec![
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 2.0), Point::new(0.0, 2.0)],
            vec![Point::new(1.0, 0.0), Point::new(2.0, 0.0), Point::new(2.0, 1.0), Point::new(1.0, 1.0)],
            vec![Point::new(1.0, 1.0), Point::new(2.0, 1.0), Point::new(2.0, 2.0), Point::new(1.0, 2.0)],
        ];
        let m = PolyMesh::from_polygons(&polys).unwrap();
        assert_eq!(m.element(0).len(), 5);
        assert_eq!(m.num_vertices(), 8);
        let interior = m.edges().iter().filter(|e| !e.is_boundary()).count();
        assert_eq!(interior, 3);
    }
}
