//! Virtual element space of order `ℓ`: degrees of freedom and the
//! computable projections.
//!
//! Local degrees of freedom of an element with `n` vertices, in order:
//!
//! * `n` vertex values;
//! * `ℓ - 1` moments per edge, `(1/|e|) ∫_e v q_j` with
//!   `q_j(t) = (t - 1/2)^j` where `t ∈ [0, 1]` runs from the lower to the
//!   higher global vertex index;
//! * `dim P_{ℓ-2}` interior moments `(1/|E|) ∫_E v m_a`.
//!
//! Global numbering lists all vertices, then all edges (`ℓ - 1` each), then
//! all element interiors.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, Vector};
use crate::mesh::PolyMesh;
use crate::poly::{self, mass_matrix_with_rule, MonomialBasis};
use crate::quadrature::{edge_rule, element_rule};

/// Largest supported order.
pub const MAX_ORDER: usize = 6;

/// Global layout of the degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub order: usize,
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_elements: usize,
    element_dofs: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &PolyMesh, order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!("order {order} outside 1..={MAX_ORDER}")));
        }
        let per_edge = order - 1;
        let per_element = poly::dim(order as isize - 2);
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let edge_base = nv;
        let interior_base = nv + ne * per_edge;
        let mut element_dofs = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let cycle = mesh.element(e);
            let mut dofs = Vec::with_capacity(local_count(cycle.len(), order));
            dofs.extend_from_slice(cycle);
            for le in mesh.element_edges(e) {
                dofs.extend((0..per_edge).map(|j| edge_base + le.edge * per_edge + j));
            }
            dofs.extend((0..per_element).map(|j| interior_base + e * per_element + j));
            element_dofs.push(dofs);
        }
        let total = interior_base + mesh.num_elements() * per_element;
        let mut boundary = vec![false; total];
        for (id, edge) in mesh.edges().iter().enumerate() {
            if edge.is_boundary() {
                boundary[edge.vertices[0]] = true;
                boundary[edge.vertices[1]] = true;
                for j in 0..per_edge {
                    boundary[edge_base + id * per_edge + j] = true;
                }
            }
        }
        Ok(Self { order, num_vertices: nv, num_edges: ne, num_elements: mesh.num_elements(), element_dofs, boundary })
    }

    pub fn num_dofs(&self) -> usize {
        self.boundary.len()
    }

    /// Global ids of the local dofs of `element`.
    pub fn local_dofs(&self, element: usize) -> &[usize] {
        &self.element_dofs[element]
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn edge_dof(&self, edge: usize, j: usize) -> usize {
        self.num_vertices + edge * (self.order - 1) + j
    }

    pub fn interior_dof(&self, element: usize, j: usize) -> usize {
        self.num_vertices + self.num_edges * (self.order - 1) + element * poly::dim(self.order as isize - 2) + j
    }

    /// Restriction of a global vector to the local dofs of `element`.
    pub fn gather(&self, element: usize, global: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.element_dofs[element].len(), self.element_dofs[element].iter().map(|&d| global[d]))
    }
}

/// Number of local dofs of an element with `n` vertices.
pub fn local_count(n: usize, order: usize) -> usize {
    n + n * (order - 1) + poly::dim(order as isize - 2)
}

/// `∫_0^1 (t - 1/2)^p dt`.
fn centred_moment(p: usize) -> f64 {
    if p % 2 == 1 {
        0.0
    } else {
        0.5f64.powi(p as i32) / (p as f64 + 1.0)
    }
}

/// Inverse of the map from the edge trace coefficients in the basis
/// `(s - 1/2)^k`, `k = 0..=ℓ`, to the conditions (value at `s = 0`, value at
/// `s = 1`, moments against `(s - 1/2)^j`, `j = 0..ℓ-2`).
fn trace_inverse(order: usize) -> &'static DMatrix<f64> {
    static CACHE: OnceLock<Vec<DMatrix<f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|l| {
                if l == 0 {
                    return DMatrix::zeros(0, 0);
                }
                let n = l + 1;
                let mut v = DMatrix::zeros(n, n);
                for k in 0..n {
                    v[(0, k)] = (-0.5f64).powi(k as i32);
                    v[(1, k)] = 0.5f64.powi(k as i32);
                    for j in 0..l - 1 {
                        v[(2 + j, k)] = centred_moment(j + k);
                    }
                }
                v.try_inverse().expect("edge interpolation system is singular")
            })
            .collect()
    });
    &cache[order]
}

/// Geometry of a local edge `i` running from vertex `i` to vertex `i + 1`.
#[derive(Debug, Clone, Copy)]
pub struct LocalEdgeGeometry {
    pub start: Point,
    pub end: Point,
    pub length: f64,
    pub normal: Vector,
    /// The local direction agrees with the global edge orientation.
    pub forward: bool,
    pub edge: usize,
}

impl LocalEdgeGeometry {
    pub fn point(&self, s: f64) -> Point {
        self.start + (self.end - self.start) * s
    }
}

pub fn local_edges(mesh: &PolyMesh, element: usize) -> Vec<LocalEdgeGeometry> {
    let poly = mesh.element_polygon(element);
    let n = poly.len();
    mesh.element_edges(element)
        .iter()
        .enumerate()
        .map(|(i, le)| {
            let start = poly[i];
            let end = poly[(i + 1) % n];
            let d = end - start;
            let length = d.norm();
            LocalEdgeGeometry {
                start,
                end,
                length,
                normal: Vector::new(d.y, -d.x) / length,
                forward: le.forward,
                edge: le.edge,
            }
        })
        .collect()
}

/// Sign relating a moment against `q_j` in the local direction to the
/// moment in the global direction.
fn moment_sign(forward: bool, j: usize) -> f64 {
    if forward || j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Matrix mapping local dofs to the coefficients of the edge trace in the
/// basis `(s - 1/2)^k`, `k = 0..=ℓ`, where `s` runs along local edge `i`.
pub fn edge_trace(mesh: &PolyMesh, element: usize, edge: usize, order: usize) -> DMatrix<f64> {
    let n = mesh.element(element).len();
    let forward = mesh.element_edges(element)[edge].forward;
    trace_matrix(n, edge, forward, order)
}

fn trace_matrix(n: usize, i: usize, forward: bool, order: usize) -> DMatrix<f64> {
    let nloc = local_count(n, order);
    let mut select = DMatrix::zeros(order + 1, nloc);
    select[(0, i)] = 1.0;
    select[(1, (i + 1) % n)] = 1.0;
    for j in 0..order - 1 {
        select[(2 + j, n + i * (order - 1) + j)] = moment_sign(forward, j);
    }
    trace_inverse(order) * select
}

/// Per-element matrices realising the projections.
#[derive(Debug, Clone)]
pub struct ElementOperators {
    /// Scaled monomials of degree `ℓ`.
    pub basis: MonomialBasis,
    pub num_dofs: usize,
    /// `D`: dofs of each monomial, one column per monomial.
    pub dof_matrix: DMatrix<f64>,
    /// `Π₀`: local dofs to `P_ℓ` coefficients.
    pub pi0: DMatrix<f64>,
    /// `Π₁`: local dofs to the `P_{ℓ-1}` coefficients of each gradient
    /// component.
    pub grad: [DMatrix<f64>; 2],
    /// Gradient projection onto constants.
    pub grad0: [DMatrix<f64>; 2],
    /// Moments `∫_E v m_a` against all of `P_ℓ`.
    pub moments: DMatrix<f64>,
    /// `(I - DΠ₀)ᵀ(I - DΠ₀)`, the unscaled dofi-dofi stabilisation.
    pub stab: DMatrix<f64>,
    /// Mass matrix of the degree-`ℓ` basis.
    pub mass: DMatrix<f64>,
    /// Edge trace matrices, one per local edge.
    pub traces: Vec<DMatrix<f64>>,
}

impl ElementOperators {
    pub fn new(mesh: &PolyMesh, element: usize, order: usize) -> Result<Self> {
        let n = mesh.element(element).len();
        let nloc = local_count(n, order);
        let basis = MonomialBasis::for_element(mesh, element, order);
        let rule = element_rule(mesh, element, 2 * order + 2)?;
        let mass = mass_matrix_with_rule(&basis, &rule)?;
        let edges = local_edges(mesh, element);
        let traces: Vec<DMatrix<f64>> =
            edges.iter().enumerate().map(|(i, g)| trace_matrix(n, i, g.forward, order)).collect();
        let dof_matrix = dof_matrix(mesh, element, &basis, &mass, &edges);
        let pi0 = value_projection_from(&dof_matrix, n, order, element)?;
        let grad = gradient_projection_from(&basis, &mass, &pi0, &edges, &traces, order - 1, order)?;
        let grad0 = gradient_projection_from(&basis, &mass, &pi0, &edges, &traces, 0, order)?;
        let moments = full_moments_from(&mass, &pi0, mesh.area(element), nloc, order);
        let a = DMatrix::identity(nloc, nloc) - &dof_matrix * &pi0;
        let stab = a.transpose() * a;
        Ok(Self { basis, num_dofs: nloc, dof_matrix, pi0, grad, grad0, moments, stab, mass, traces })
    }

    /// Dofs of a polynomial of degree at most `ℓ`.
    pub fn dofs_of(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.dof_matrix * coeffs
    }

    /// `Π₁ v` as two polynomials of degree `ℓ - 1`.
    pub fn gradient(&self, local: &DVector<f64>) -> [poly::PolyCoeffs; 2] {
        let b = self.basis.with_degree(self.basis.degree - 1);
        [poly::PolyCoeffs::new(b, &self.grad[0] * local), poly::PolyCoeffs::new(b, &self.grad[1] * local)]
    }

    /// `Π₀ v`.
    pub fn value(&self, local: &DVector<f64>) -> poly::PolyCoeffs {
        poly::PolyCoeffs::new(self.basis, &self.pi0 * local)
    }

    /// Constant gradient `Π₁⁰ v`.
    pub fn constant_gradient(&self, local: &DVector<f64>) -> Vector {
        Vector::new(self.grad0[0].row(0).dot(&local.transpose()), self.grad0[1].row(0).dot(&local.transpose()))
    }
}

fn dof_matrix(
    mesh: &PolyMesh,
    element: usize,
    basis: &MonomialBasis,
    mass: &DMatrix<f64>,
    edges: &[LocalEdgeGeometry],
) -> DMatrix<f64> {
    let order = basis.degree;
    let n = edges.len();
    let nb = basis.dim();
    let nloc = local_count(n, order);
    let mut d = DMatrix::zeros(nloc, nb);
    let mut vals = vec![0.0; nb];
    for (i, g) in edges.iter().enumerate() {
        basis.eval_into(&g.start, &mut vals);
        for a in 0..nb {
            d[(i, a)] = vals[a];
        }
    }
    if order >= 2 {
        let rule = edge_rule(2 * order);
        for (i, g) in edges.iter().enumerate() {
            for (s, w) in rule.points.iter().zip(&rule.weights) {
                basis.eval_into(&g.point(*s), &mut vals);
                for j in 0..order - 1 {
                    let q = w * (s - 0.5).powi(j as i32) * moment_sign(g.forward, j);
                    for a in 0..nb {
                        d[(n + i * (order - 1) + j, a)] += q * vals[a];
                    }
                }
            }
        }
        let area = mesh.area(element);
        let ni = poly::dim(order as isize - 2);
        let base = n * order;
        for b in 0..ni {
            for a in 0..nb {
                d[(base + b, a)] = mass[(b, a)] / area;
            }
        }
    }
    d
}

/// Constrained least squares: minimise the boundary dof mismatch subject to
/// matching the interior moments.
fn value_projection_from(d: &DMatrix<f64>, n: usize, order: usize, element: usize) -> Result<DMatrix<f64>> {
    let nloc = d.nrows();
    let nb = d.ncols();
    let n_bdry = n * order;
    let ni = nloc - n_bdry;
    let db = d.rows(0, n_bdry);
    let di = d.rows(n_bdry, ni);
    let size = nb + ni;
    let mut kkt = DMatrix::zeros(size, size);
    kkt.view_mut((0, 0), (nb, nb)).copy_from(&(db.transpose() * db));
    kkt.view_mut((0, nb), (nb, ni)).copy_from(&di.transpose());
    kkt.view_mut((nb, 0), (ni, nb)).copy_from(&di);
    let mut rhs = DMatrix::zeros(size, nloc);
    rhs.view_mut((0, 0), (nb, n_bdry)).copy_from(&db.transpose());
    for j in 0..ni {
        rhs[(nb + j, n_bdry + j)] = 1.0;
    }
    let sv = kkt.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::SingularMatrix(format!(
            "value projection system of element {element} is rank deficient (singular values {smin:e}/{smax:e})"
        )));
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularMatrix(format!("value projection of element {element}")))?;
    Ok(sol.rows(0, nb).into_owned())
}

/// `Π₀` of an element.
pub fn value_projection(mesh: &PolyMesh, element: usize, order: usize) -> Result<DMatrix<f64>> {
    Ok(ElementOperators::new(mesh, element, order)?.pi0)
}

fn full_moments_from(mass: &DMatrix<f64>, pi0: &DMatrix<f64>, area: f64, nloc: usize, order: usize) -> DMatrix<f64> {
    let mut f = mass * pi0;
    let ni = poly::dim(order as isize - 2);
    let base = nloc - ni;
    for b in 0..ni {
        f.row_mut(b).fill(0.0);
        f[(b, base + b)] = area;
    }
    f
}

/// Moments `∫_E v m_a` for all `m_a` of degree at most `ℓ`.
pub fn full_moments(mesh: &PolyMesh, element: usize, order: usize) -> Result<DMatrix<f64>> {
    Ok(ElementOperators::new(mesh, element, order)?.moments)
}

fn gradient_projection_from(
    basis: &MonomialBasis,
    mass: &DMatrix<f64>,
    pi0: &DMatrix<f64>,
    edges: &[LocalEdgeGeometry],
    traces: &[DMatrix<f64>],
    k: usize,
    order: usize,
) -> Result<[DMatrix<f64>; 2]> {
    let nk = poly::dim(k as isize);
    let nb = basis.dim();
    let nloc = pi0.ncols();
    let mk = mass.view((0, 0), (nk, nk)).into_owned();
    let chol = mk
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("gradient projection mass matrix".into()))?;
    let bk = basis.with_degree(k);
    let rule = edge_rule(order + k);
    let mut out = [DMatrix::zeros(nk, nloc), DMatrix::zeros(nk, nloc)];
    for (c, out_c) in out.iter_mut().enumerate() {
        // Volume term: ∫ m_a ∂_c m_b expressed through the mass matrix.
        let mut b_mat = DMatrix::zeros(nk, nb);
        for b in 0..nk {
            let mut e = poly::PolyCoeffs::zero(bk);
            e.coeffs[b] = 1.0;
            let der = e.derivative(c);
            for (g, coef) in der.coeffs.iter().enumerate() {
                if *coef != 0.0 {
                    for a in 0..nb {
                        b_mat[(b, a)] += coef * mass[(g, a)];
                    }
                }
            }
        }
        let mut rhs = -(b_mat * pi0);
        // Boundary term: Σ_e ∫_e trace(v) m_b n_c.
        let mut vals = vec![0.0; nk];
        for (g, t) in edges.iter().zip(traces) {
            let nc = g.normal[c];
            if nc == 0.0 {
                continue;
            }
            for (s, w) in rule.points.iter().zip(&rule.weights) {
                bk.eval_into(&g.point(*s), &mut vals);
                let scale = w * g.length * nc;
                // Row vector of the trace value at s.
                let mut trace_row = DVector::<f64>::zeros(nloc);
                for kk in 0..=order {
                    let p = (s - 0.5).powi(kk as i32);
                    trace_row.axpy(p, &t.row(kk).transpose(), 1.0);
                }
                for b in 0..nk {
                    let f = scale * vals[b];
                    for j in 0..nloc {
                        rhs[(b, j)] += f * trace_row[j];
                    }
                }
            }
        }
        *out_c = chol.solve(&rhs);
    }
    Ok(out)
}

/// `Π₁` onto vector polynomials of degree `k` (`k = ℓ - 1` for the
/// discrete gradient, `k = 0` for the constant gradient).
pub fn gradient_projection(mesh: &PolyMesh, element: usize, order: usize, k: usize) -> Result<[DMatrix<f64>; 2]> {
    let n = mesh.element(element).len();
    let basis = MonomialBasis::for_element(mesh, element, order);
    let rule = element_rule(mesh, element, 2 * order + 2)?;
    let mass = mass_matrix_with_rule(&basis, &rule)?;
    let edges = local_edges(mesh, element);
    let traces: Vec<DMatrix<f64>> =
        edges.iter().enumerate().map(|(i, g)| trace_matrix(n, i, g.forward, order)).collect();
    let d = dof_matrix(mesh, element, &basis, &mass, &edges);
    let pi0 = value_projection_from(&d, n, order, element)?;
    gradient_projection_from(&basis, &mass, &pi0, &edges, &traces, k, order)
}

/// Dofi-dofi stabilisation `μ̄ (I - DΠ₀)ᵀ(I - DΠ₀)` with
/// `μ̄ = (1/|E|) ∫_E μ(x, |g|)`.
pub fn stabilization_matrix(
    mesh: &PolyMesh,
    element: usize,
    ops: &ElementOperators,
    mu: impl Fn(&Point, f64) -> f64,
    g: Vector,
) -> Result<DMatrix<f64>> {
    let mean = average_coefficient(mesh, element, ops.basis.degree, mu, g)?;
    Ok(&ops.stab * mean)
}

/// `(1/|E|) ∫_E μ(x, |g|)` by a rule of degree `2ℓ + 2`.
pub fn average_coefficient(
    mesh: &PolyMesh,
    element: usize,
    order: usize,
    mu: impl Fn(&Point, f64) -> f64,
    g: Vector,
) -> Result<f64> {
    let rule = element_rule(mesh, element, 2 * order + 2)?;
    let t = g.norm();
    let mean = rule.integrate(|x| mu(x, t)) / mesh.area(element);
    if !(mean > 0.0) {
        return Err(Error::ModelBounds(format!(
            "average coefficient {mean:e} on element {element} is not positive"
        )));
    }
    Ok(mean)
}

/// The discrete space: dof layout and the operators of every element.
#[derive(Debug, Clone)]
pub struct VemSpace {
    pub order: usize,
    pub dofs: DofMap,
    pub ops: Vec<ElementOperators>,
}

impl VemSpace {
    pub fn new(mesh: &PolyMesh, order: usize) -> Result<Self> {
        let dofs = DofMap::new(mesh, order)?;
        let ops = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| ElementOperators::new(mesh, e, order))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { order, dofs, ops })
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.num_dofs()
    }

    pub fn interpolate(&self, mesh: &PolyMesh, w: impl Fn(&Point) -> f64 + Sync) -> Result<DVector<f64>> {
        interpolate(w, mesh, &self.dofs)
    }
}

/// Degrees of freedom of `w`: vertex values, edge moments and interior
/// moments, the moments computed by quadrature.
pub fn interpolate(w: impl Fn(&Point) -> f64 + Sync, mesh: &PolyMesh, dofs: &DofMap) -> Result<DVector<f64>> {
    let order = dofs.order;
    let mut out = DVector::zeros(dofs.num_dofs());
    for (v, p) in mesh.vertices().iter().enumerate() {
        out[v] = w(p);
    }
    if order < 2 {
        return Ok(out);
    }
    let rule = edge_rule(2 * order + 8);
    for (id, edge) in mesh.edges().iter().enumerate() {
        let a = mesh.vertex(edge.vertices[0]);
        let b = mesh.vertex(edge.vertices[1]);
        for j in 0..order - 1 {
            out[dofs.edge_dof(id, j)] = rule.integrate(|t| w(&(a + (b - a) * t)) * (t - 0.5).powi(j as i32));
        }
    }
    let ni = poly::dim(order as isize - 2);
    let interior: Vec<Vec<f64>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let rule = element_rule(mesh, e, 2 * order + 6)?;
            let basis = MonomialBasis::for_element(mesh, e, order - 2);
            let mut m = vec![0.0; ni];
            let mut vals = vec![0.0; ni];
            for (p, wt) in rule.points.iter().zip(&rule.weights) {
                basis.eval_into(p, &mut vals);
                let f = wt * w(p);
                for j in 0..ni {
                    m[j] += f * vals[j];
                }
            }
            let area = mesh.area(e);
            Ok(m.into_iter().map(|v| v / area).collect())
        })
        .collect::<Result<_>>()?;
    for (e, m) in interior.into_iter().enumerate() {
        for (j, v) in m.into_iter().enumerate() {
            out[dofs.interior_dof(e, j)] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_grid, build_voronoi_mesh, Domain};
    use crate::poly::{exponent, index, PolyCoeffs};

    fn pentagon() -> PolyMesh {
        let pts: Vec<Point> = (0..5)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 5.0 + 0.2;
                Point::new(0.5 + 0.6 * a.cos(), 0.3 + 0.5 * a.sin())
            })
            .collect();
        PolyMesh::new(pts, vec![vec![0, 1, 2, 3, 4]]).unwrap()
    }

    /// Coefficients of a global polynomial `Σ c x^a y^b` in the scaled basis
    /// of an element, computed by L2 projection with a high-order rule.
    fn coeffs_of(mesh: &PolyMesh, e: usize, order: usize, f: impl Fn(&Point) -> f64) -> DVector<f64> {
        crate::poly::Projector::for_element(mesh, e, order, 2 * order + 4).unwrap().project(f).coeffs
    }

    fn local_dofs_of(mesh: &PolyMesh, e: usize, order: usize, f: impl Fn(&Point) -> f64 + Sync) -> DVector<f64> {
        let dm = DofMap::new(mesh, order).unwrap();
        let all = interpolate(f, mesh, &dm).unwrap();
        dm.gather(e, all.as_slice())
    }

    #[test]
    fn dof_counts() {
        let m = build_cartesian_grid(4, 4, &Domain::unit_square()).unwrap();
        let d1 = DofMap::new(&m, 1).unwrap();
        assert_eq!(d1.num_dofs(), 25);
        assert_eq!(d1.boundary_mask().iter().filter(|b| **b).count(), 16);
        let d2 = DofMap::new(&m, 2).unwrap();
        assert_eq!(d2.num_dofs(), 25 + 40 + 16);
        let d3 = DofMap::new(&m, 3).unwrap();
        assert_eq!(d3.num_dofs(), 25 + 80 + 48);
        assert_eq!(d3.local_dofs(0).len(), local_count(4, 3));
        assert_eq!(local_count(5, 3), 5 + 10 + 3);
    }

    #[test]
    fn shared_dofs_agree() {
        let m = build_cartesian_grid(2, 1, &Domain::unit_square()).unwrap();
        let d = DofMap::new(&m, 3).unwrap();
        let a: std::collections::HashSet<_> = d.local_dofs(0).iter().collect();
        let b: std::collections::HashSet<_> = d.local_dofs(1).iter().collect();
        // Two vertices and two edge moments shared.
        assert_eq!(a.intersection(&b).count(), 4);
    }

    #[test]
    fn affine_trace_at_order_one() {
        let t = trace_inverse(1);
        // Endpoint values (0, 1) give c0 = 1/2, c1 = 1, i.e. t.
        let c = t * DVector::from_vec(vec![0.0, 1.0]);
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_trace_on_square() {
        let m = build_cartesian_grid(1, 1, &Domain::unit_square()).unwrap();
        let dofs = local_dofs_of(&m, 0, 2, |p| p.x * p.x);
        let t = edge_trace(&m, 0, 0, 2) * dofs;
        // Edge 0 runs along y = 0 from x = 0 to 1: t^2 = (s-1/2)^2 + (s-1/2) + 1/4.
        assert!((t[0] - 0.25).abs() < 1e-13);
        assert!((t[1] - 1.0).abs() < 1e-13);
        assert!((t[2] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cubic_trace_matches_dense_solve() {
        let m = pentagon();
        let dofs = DVector::from_fn(local_count(5, 3), |i, _| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0);
        for i in 0..5 {
            let got = edge_trace(&m, 0, i, 3) * &dofs;
            // Dense oracle in the monomial basis s^k on [0,1].
            let mut v = DMatrix::zeros(4, 4);
            let mut b = DVector::zeros(4);
            let forward = m.element_edges(0)[i].forward;
            for k in 0..4 {
                v[(0, k)] = if k == 0 { 1.0 } else { 0.0 };
                v[(1, k)] = 1.0;
                // ∫ s^k ds, ∫ s^k (s - 1/2) ds.
                v[(2, k)] = 1.0 / (k as f64 + 1.0);
                v[(3, k)] = 1.0 / (k as f64 + 2.0) - 0.5 / (k as f64 + 1.0);
            }
            b[0] = dofs[i];
            b[1] = dofs[(i + 1) % 5];
            b[2] = dofs[5 + 2 * i];
            b[3] = if forward { 1.0 } else { -1.0 } * dofs[5 + 2 * i + 1];
            let mono = v.lu().solve(&b).unwrap();
            for s in [0.0, 0.21, 0.5, 0.77, 1.0] {
                let a: f64 = (0..4).map(|k| got[k] * (s - 0.5f64).powi(k as i32)).sum();
                let o: f64 = (0..4).map(|k| mono[k] * s.powi(k as i32)).sum();
                assert!((a - o).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn value_projection_reproduces_polynomials() {
        let meshes = [pentagon(), build_voronoi_mesh(6, &Domain::unit_square(), 20, 3).unwrap()];
        for mesh in &meshes {
            for order in 1..=3 {
                for e in 0..mesh.num_elements() {
                    let ops = ElementOperators::new(mesh, e, order).unwrap();
                    for i in 0..ops.basis.dim() {
                        let mut c = DVector::zeros(ops.basis.dim());
                        c[i] = 1.0;
                        let back = &ops.pi0 * ops.dofs_of(&c);
                        assert!((back - &c).amax() < 1e-10, "order {order} monomial {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_and_product_projection() {
        let m = pentagon();
        let ops = ElementOperators::new(&m, 0, 2).unwrap();
        let one = local_dofs_of(&m, 0, 2, |_| 1.0);
        let p = &ops.pi0 * &one;
        assert!((p[0] - 1.0).abs() < 1e-12 && p.rows(1, 5).amax() < 1e-12);

        let xy = |p: &Point| p.x * p.y;
        let dofs = local_dofs_of(&m, 0, 2, xy);
        let pi = ops.value(&dofs);
        for q in [Point::new(0.5, 0.3), Point::new(0.2, 0.5), Point::new(0.8, 0.1)] {
            assert!((pi.eval(&q) - xy(&q)).abs() < 1e-11);
        }
    }

    #[test]
    fn value_projection_matches_kkt_oracle() {
        // Oracle: null-space method with a Householder basis of the single
        // interior constraint and normal equations for the remaining fit.
        let m = pentagon();
        let ops = ElementOperators::new(&m, 0, 2).unwrap();
        let v = DVector::from_fn(ops.num_dofs, |i, _| ((i * 5 + 1) % 7) as f64 - 3.0);
        let d = &ops.dof_matrix;
        let nb = 10;
        let db = d.rows(0, nb).into_owned();
        let a = d.row(nb).transpose();
        let cp = &a * (v[nb] / a.norm_squared());
        let n0 = a.normalize();
        let mut u = n0.clone();
        u[0] -= 1.0;
        let u = u.normalize();
        let h = DMatrix::identity(6, 6) - &u * u.transpose() * 2.0;
        let z = h.columns(1, 5).into_owned();
        let dz = &db * &z;
        let y = (dz.transpose() * &dz)
            .cholesky()
            .unwrap()
            .solve(&(dz.transpose() * (v.rows(0, nb) - &db * &cp)));
        let oracle = cp + z * y;
        let got = &ops.pi0 * &v;
        assert!((got - oracle).amax() < 1e-9);
        let mom = (ops.mass.row(0) * (&ops.pi0 * &v))[0] / m.area(0);
        assert!((mom - v[nb]).abs() < 1e-11);
    }

    #[test]
    fn full_moments_consistency() {
        let m = pentagon();
        let ops = ElementOperators::new(&m, 0, 2).unwrap();
        let v = DVector::from_fn(ops.num_dofs, |i, _| (i as f64 * 0.37).sin());
        let mom = &ops.moments * &v;
        let pi = ops.value(&v);
        let rule = element_rule(&m, 0, 8).unwrap();
        for a in 1..6 {
            let direct = rule.integrate(|p| pi.eval(p) * ops.basis.eval(p)[a]);
            assert!((mom[a] - direct).abs() < 1e-12);
        }
        assert!((mom[0] - v[ops.num_dofs - 1] * m.area(0)).abs() < 1e-14);
        // Constant function.
        let one = local_dofs_of(&m, 0, 2, |_| 1.0);
        let mom1 = &ops.moments * one;
        for a in 0..6 {
            let direct = rule.integrate(|p| ops.basis.eval(p)[a]);
            assert!((mom1[a] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_projection_examples() {
        let m = pentagon();
        for order in 1..=3 {
            let ops = ElementOperators::new(&m, 0, order).unwrap();
            let one = local_dofs_of(&m, 0, order, |_| 1.0);
            let [gx, gy] = ops.gradient(&one);
            assert!(gx.coeffs.amax() < 1e-11 && gy.coeffs.amax() < 1e-11);
            let lin = local_dofs_of(&m, 0, order, |p| p.x + 2.0 * p.y);
            let [gx, gy] = ops.gradient(&lin);
            assert!((gx.coeffs[0] - 1.0).abs() < 1e-10 && (gy.coeffs[0] - 2.0).abs() < 1e-10);
            assert!(gx.coeffs.rows(1, gx.coeffs.len() - 1).amax() < 1e-10);
            let g0 = ops.constant_gradient(&lin);
            assert!((g0 - Vector::new(1.0, 2.0)).norm() < 1e-10);
        }
        let ops = ElementOperators::new(&m, 0, 3).unwrap();
        let dofs = local_dofs_of(&m, 0, 3, |p| p.x * p.x * p.y);
        let [gx, gy] = ops.gradient(&dofs);
        for q in [Point::new(0.5, 0.3), Point::new(0.3, 0.5), Point::new(0.8, 0.2)] {
            assert!((gx.eval(&q) - 2.0 * q.x * q.y).abs() < 1e-10);
            assert!((gy.eval(&q) - q.x * q.x).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_projection_is_l2_projection_of_polynomial_gradients() {
        // For v = p of degree ℓ the projection must match P_{ℓ-1} ∇p by
        // direct quadrature.
        let m = build_voronoi_mesh(5, &Domain::unit_square(), 10, 11).unwrap();
        let p = |x: &Point| x.x.powi(3) - 2.0 * x.x * x.y * x.y + x.y;
        let dp = |x: &Point| [3.0 * x.x * x.x - 2.0 * x.y * x.y, -4.0 * x.x * x.y + 1.0];
        for e in 0..m.num_elements() {
            let ops = ElementOperators::new(&m, e, 3).unwrap();
            let dofs = local_dofs_of(&m, e, 3, p);
            let g = ops.gradient(&dofs);
            let direct = crate::poly::l2_project_vector(dp, &m, e, 2).unwrap();
            assert!((&g[0].coeffs - &direct[0].coeffs).amax() < 1e-10);
            assert!((&g[1].coeffs - &direct[1].coeffs).amax() < 1e-10);
            // And Π₀ is the L2 projection onto P_3.
            let pi = ops.value(&dofs);
            let c = coeffs_of(&m, e, 3, p);
            assert!((pi.coeffs - c).amax() < 1e-10);
        }
    }

    #[test]
    fn stabilization_kernel_and_scale() {
        let m = pentagon();
        for order in 1..=3 {
            let ops = ElementOperators::new(&m, 0, order).unwrap();
            for a in 0..ops.basis.dim() {
                let mut c = DVector::zeros(ops.basis.dim());
                c[a] = 1.0;
                assert!((&ops.stab * ops.dofs_of(&c)).amax() < 1e-10);
            }
            // Kernel dimension equals dim P_ℓ.
            let eig = nalgebra::SymmetricEigen::new(ops.stab.clone()).eigenvalues;
            let zeros = eig.iter().filter(|v| v.abs() < 1e-9).count();
            assert_eq!(zeros, ops.basis.dim());
        }
        let sq = build_cartesian_grid(1, 1, &Domain::unit_square()).unwrap();
        let ops = ElementOperators::new(&sq, 0, 1).unwrap();
        let s = stabilization_matrix(&sq, 0, &ops, |_, _| 1.0, Vector::zeros()).unwrap();
        assert!((&s - &ops.stab).amax() < 1e-15);
        let mu = |_: &Point, t: f64| 2.0 + 1.0 / (1.0 + t * t);
        let mean = average_coefficient(&sq, 0, 1, mu, Vector::zeros()).unwrap();
        assert!((mean - 3.0).abs() < 1e-14);
        assert!(average_coefficient(&sq, 0, 1, |_, _| -1.0, Vector::zeros()).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let m = build_cartesian_grid(2, 2, &Domain::unit_square()).unwrap();
        let dm = DofMap::new(&m, 2).unwrap();
        let z = interpolate(|_| 0.0, &m, &dm).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        // Edge moments of x on the bottom boundary edge [0, 1/2] x {0}.
        let x = interpolate(|p| p.x, &m, &dm).unwrap();
        for (id, e) in m.edges().iter().enumerate() {
            let a = m.vertex(e.vertices[0]);
            let b = m.vertex(e.vertices[1]);
            // (1/|e|) ∫ x ds = midpoint x.
            assert!((x[dm.edge_dof(id, 0)] - 0.5 * (a.x + b.x)).abs() < 1e-14);
        }
    }

    #[test]
    fn monomial_index_helpers_consistent() {
        assert_eq!(index(0, 0), 0);
        assert_eq!(exponent(index(2, 1)), (2, 1));
        let b = MonomialBasis::new(Point::origin(), 1.0, 2);
        let p = PolyCoeffs::constant(b, 1.0);
        assert_eq!(p.eval(&Point::new(0.3, 0.4)), 1.0);
    }
}
