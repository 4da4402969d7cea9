//! Scaled monomials `m_a(x) = ((x - x_E) / h_E)^a` and polynomial calculus.
//!
//! Exponents are ordered graded-lexicographically:
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`, so the basis of degree
//! `k - 1` is a prefix of the basis of degree `k`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::PolyMesh;
use crate::quadrature::{element_rule, QuadratureRule};

/// Largest admissible condition number of a scaled mass matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Number of monomials of degree at most `k`; zero for negative `k`.
pub fn dim(k: isize) -> usize {
    if k < 0 {
        0
    } else {
        let k = k as usize;
        (k + 1) * (k + 2) / 2
    }
}

/// Position of `x^a y^b` in the graded-lexicographic order.
pub fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + (d - a)
}

/// Exponent pair at position `i`.
pub fn exponent(i: usize) -> (usize, usize) {
    let mut d = 0;
    while (d + 1) * (d + 2) / 2 <= i {
        d += 1;
    }
    let offset = i - d * (d + 1) / 2;
    (d - offset, offset)
}

/// Scaled monomial basis of `P_k(E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonomialBasis {
    pub centre: Point,
    pub h: f64,
    pub degree: usize,
}

impl MonomialBasis {
    pub fn new(centre: Point, h: f64, degree: usize) -> Self {
        Self { centre, h, degree }
    }

    /// Basis centred at the element barycentre and scaled by its diameter.
    pub fn for_element(mesh: &PolyMesh, element: usize, degree: usize) -> Self {
        Self::new(mesh.centroid(element), mesh.diameter(element), degree)
    }

    pub fn dim(&self) -> usize {
        dim(self.degree as isize)
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        Self { degree, ..*self }
    }

    pub fn exponents(&self) -> Vec<(usize, usize)> {
        (0..self.dim()).map(exponent).collect()
    }

    pub fn scaled(&self, p: &Point) -> (f64, f64) {
        ((p.x - self.centre.x) / self.h, (p.y - self.centre.y) / self.h)
    }

    /// Values of all basis functions at `p`, written into `out`.
    pub fn eval_into(&self, p: &Point, out: &mut [f64]) {
        let (x, y) = self.scaled(p);
        let k = self.degree;
        let mut xp = [1.0; 16];
        let mut yp = [1.0; 16];
        for i in 1..=k {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        let mut i = 0;
        for d in 0..=k {
            for b in 0..=d {
                out[i] = xp[d - b] * yp[b];
                i += 1;
            }
        }
    }

    pub fn eval(&self, p: &Point) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        self.eval_into(p, v.as_mut_slice());
        v
    }

    /// Partial derivatives of all basis functions at `p`.
    pub fn eval_gradient(&self, p: &Point) -> [DVector<f64>; 2] {
        let (x, y) = self.scaled(p);
        let k = self.degree;
        let mut xp = [1.0; 16];
        let mut yp = [1.0; 16];
        for i in 1..=k {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        let n = self.dim();
        let mut gx = DVector::zeros(n);
        let mut gy = DVector::zeros(n);
        let mut i = 0;
        for d in 0..=k {
            for b in 0..=d {
                let a = d - b;
                if a > 0 {
                    gx[i] = a as f64 * xp[a - 1] * yp[b] / self.h;
                }
                if b > 0 {
                    gy[i] = b as f64 * xp[a] * yp[b - 1] / self.h;
                }
                i += 1;
            }
        }
        [gx, gy]
    }

    /// Values of all basis functions at the points of a rule, one row per
    /// point.
    pub fn eval_matrix(&self, points: &[Point]) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(points.len(), n);
        let mut row = vec![0.0; n];
        for (q, p) in points.iter().enumerate() {
            self.eval_into(p, &mut row);
            for j in 0..n {
                m[(q, j)] = row[j];
            }
        }
        m
    }
}

/// A polynomial in a scaled monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    pub basis: MonomialBasis,
    pub coeffs: DVector<f64>,
}

impl PolyCoeffs {
    pub fn new(basis: MonomialBasis, coeffs: DVector<f64>) -> Self {
        assert_eq!(coeffs.len(), basis.dim(), "coefficient count does not match the basis");
        Self { basis, coeffs }
    }

    pub fn zero(basis: MonomialBasis) -> Self {
        Self { basis, coeffs: DVector::zeros(basis.dim()) }
    }

    pub fn constant(basis: MonomialBasis, c: f64) -> Self {
        let mut p = Self::zero(basis);
        p.coeffs[0] = c;
        p
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn eval(&self, p: &Point) -> f64 {
        let mut v = vec![0.0; self.coeffs.len()];
        self.basis.eval_into(p, &mut v);
        v.iter().zip(self.coeffs.iter()).map(|(a, b)| a * b).sum()
    }

    /// Same polynomial expressed in the basis of degree `degree`, which must
    /// not drop nonzero coefficients.
    pub fn with_degree(&self, degree: usize) -> Self {
        let basis = self.basis.with_degree(degree);
        let mut c = DVector::zeros(basis.dim());
        for (i, v) in self.coeffs.iter().enumerate() {
            if i < c.len() {
                c[i] = *v;
            } else {
                debug_assert!(*v == 0.0, "truncation drops a nonzero coefficient");
            }
        }
        Self { basis, coeffs: c }
    }

    /// Partial derivative in direction 0 (x) or 1 (y), one degree lower.
    pub fn derivative(&self, dir: usize) -> Self {
        let basis = self.basis.with_degree(self.degree().saturating_sub(1));
        let mut out = Self::zero(basis);
        if self.degree() == 0 {
            return out;
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            let (a, b) = exponent(i);
            match dir {
                0 if a > 0 => out.coeffs[index(a - 1, b)] += c * a as f64 / self.basis.h,
                1 if b > 0 => out.coeffs[index(a, b - 1)] += c * b as f64 / self.basis.h,
                _ => {}
            }
        }
        out
    }

    pub fn gradient(&self) -> [Self; 2] {
        [self.derivative(0), self.derivative(1)]
    }

    /// Exact product; the degree is the sum of the degrees.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert!(self.basis.centre == other.basis.centre && self.basis.h == other.basis.h);
        let basis = self.basis.with_degree(self.degree() + other.degree());
        let mut out = Self::zero(basis);
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            let (ai, bi) = exponent(i);
            for (j, b) in other.coeffs.iter().enumerate() {
                let (aj, bj) = exponent(j);
                out.coeffs[index(ai + aj, bi + bj)] += a * b;
            }
        }
        out
    }

    /// Sum, expressed in the larger of the two bases.
    pub fn add(&self, other: &Self) -> Self {
        let k = self.degree().max(other.degree());
        let mut out = self.with_degree(k);
        let o = other.with_degree(k);
        out.coeffs += o.coeffs;
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { basis: self.basis, coeffs: &self.coeffs * s }
    }
}

/// Exact divergence of a vector polynomial.
pub fn poly_divergence(v: &[PolyCoeffs; 2]) -> PolyCoeffs {
    v[0].derivative(0).add(&v[1].derivative(1))
}

/// `M[a][b] = ∫_E m_a m_b` by the given rule, with a conditioning check.
pub fn mass_matrix_with_rule(basis: &MonomialBasis, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
    let phi = basis.eval_matrix(&rule.points);
    let mut weighted = phi.clone();
    for (q, w) in rule.weights.iter().enumerate() {
        weighted.row_mut(q).scale_mut(*w);
    }
    let m = phi.transpose() * weighted;
    check_condition(&m)?;
    Ok(m)
}

fn check_condition(m: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::SingularMatrix(format!(
            "mass matrix condition estimate {:e} exceeds {MAX_CONDITION:e}",
            max / min
        )));
    }
    Ok(())
}

/// Mass matrix of the degree-`k` scaled monomials on `element`.
pub fn mass_matrix(mesh: &PolyMesh, element: usize, k: usize) -> Result<DMatrix<f64>> {
    let basis = MonomialBasis::for_element(mesh, element, k);
    let rule = element_rule(mesh, element, 2 * k + 2)?;
    mass_matrix_with_rule(&basis, &rule)
}

/// L2 projector onto `P_k(E)` tied to a quadrature rule.
#[derive(Debug, Clone)]
pub struct Projector {
    pub basis: MonomialBasis,
    pub rule: QuadratureRule,
    /// Basis values at the rule points, one row per point.
    pub values: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Projector {
    pub fn new(basis: MonomialBasis, rule: QuadratureRule) -> Result<Self> {
        let values = basis.eval_matrix(&rule.points);
        let mut weighted = values.clone();
        for (q, w) in rule.weights.iter().enumerate() {
            weighted.row_mut(q).scale_mut(*w);
        }
        let mass = values.transpose() * weighted;
        check_condition(&mass)?;
        let chol = Cholesky::new(mass)
            .ok_or_else(|| Error::SingularMatrix("mass matrix is not positive definite".into()))?;
        Ok(Self { basis, rule, values, chol })
    }

    pub fn for_element(mesh: &PolyMesh, element: usize, k: usize, order: usize) -> Result<Self> {
        Self::new(MonomialBasis::for_element(mesh, element, k), element_rule(mesh, element, order)?)
    }

    /// Projection of the function sampled at the rule points.
    pub fn project_values(&self, samples: &[f64]) -> PolyCoeffs {
        let n = self.basis.dim();
        let mut rhs = DVector::zeros(n);
        for (q, (w, s)) in self.rule.weights.iter().zip(samples).enumerate() {
            let ws = w * s;
            for j in 0..n {
                rhs[j] += ws * self.values[(q, j)];
            }
        }
        PolyCoeffs::new(self.basis, self.chol.solve(&rhs))
    }

    pub fn project(&self, f: impl Fn(&Point) -> f64) -> PolyCoeffs {
        let samples: Vec<f64> = self.rule.points.iter().map(f).collect();
        self.project_values(&samples)
    }

    /// Values of a polynomial of degree at most `basis.degree` at the rule
    /// points.
    pub fn eval_at_points(&self, p: &PolyCoeffs) -> Vec<f64> {
        let n = p.coeffs.len();
        (0..self.rule.len())
            .map(|q| (0..n).map(|j| self.values[(q, j)] * p.coeffs[j]).sum())
            .collect()
    }
}

/// L2-orthogonal projection of `f` onto `P_k(E)`, integrated with a rule of
/// degree [`data_rule_order`].
pub fn l2_project(
    f: impl Fn(&Point) -> f64,
    mesh: &PolyMesh,
    element: usize,
    k: usize,
) -> Result<PolyCoeffs> {
    Ok(Projector::for_element(mesh, element, k, data_rule_order(k))?.project(f))
}

/// Degree of the rule used to project general data onto `P_k`: exact on
/// products of `P_k` with `P_{k+10}`.
pub fn data_rule_order(k: usize) -> usize {
    2 * k + 12
}

/// Componentwise projection of a vector field.
pub fn l2_project_vector(
    f: impl Fn(&Point) -> [f64; 2],
    mesh: &PolyMesh,
    element: usize,
    k: usize,
) -> Result<[PolyCoeffs; 2]> {
    let proj = Projector::for_element(mesh, element, k, data_rule_order(k))?;
    let vals: Vec<[f64; 2]> = proj.rule.points.iter().map(f).collect();
    let x: Vec<f64> = vals.iter().map(|v| v[0]).collect();
    let y: Vec<f64> = vals.iter().map(|v| v[1]).collect();
    Ok([proj.project_values(&x), proj.project_values(&y)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_grid, Domain};
    use std::f64::consts::PI;

    fn pentagon() -> PolyMesh {
        let pts: Vec<Point> = (0..5)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 5.0 + 0.3;
                Point::new(0.4 + 0.7 * a.cos(), -0.2 + 0.7 * a.sin())
            })
            .collect();
        PolyMesh::new(pts, vec![vec![0, 1, 2, 3, 4]]).unwrap()
    }

    fn square() -> PolyMesh {
        build_cartesian_grid(1, 1, &Domain::unit_square()).unwrap()
    }

    /// `∫_E f` by Green's theorem, `∫_E f = ∮ F n_x` with `F(x, y) = ∫_{x₀}^x f(s, y) ds`,
    /// both integrals by 12-point Gauss rules. Exact for polynomials of degree
    /// up to 22 without any triangulation.
    fn green_integral(mesh: &PolyMesh, e: usize, f: impl Fn(&Point) -> f64) -> f64 {
        let poly = mesh.element_polygon(e);
        let (x, w) = crate::quadrature::gauss_legendre(12);
        let x0 = poly.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let inner = |p: Point| {
            let half = 0.5 * (p.x - x0);
            x.iter().zip(&w).map(|(s, ws)| ws * half * f(&Point::new(x0 + half * (s + 1.0), p.y))).sum::<f64>()
        };
        let mut total = 0.0;
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            // n_x ds = dy along the counter-clockwise boundary.
            let dy = b.y - a.y;
            for (s, ws) in x.iter().zip(&w) {
                total += 0.5 * ws * dy * inner(a + (b - a) * (0.5 * (s + 1.0)));
            }
        }
        total
    }

    #[test]
    fn ordering_roundtrip() {
        for i in 0..28 {
            let (a, b) = exponent(i);
            assert_eq!(index(a, b), i);
        }
        assert_eq!(exponent(3), (2, 0));
        assert_eq!(exponent(4), (1, 1));
        assert_eq!(exponent(5), (0, 2));
        assert_eq!(dim(-1), 0);
        assert_eq!(dim(3), 10);
    }

    #[test]
    fn constant_mass_on_square() {
        let m = mass_matrix(&square(), 0, 0).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert!((m[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_mass_on_square_is_diagonal() {
        let m = mass_matrix(&square(), 0, 1).unwrap();
        assert!(m[(0, 1)].abs() < 1e-15 && m[(0, 2)].abs() < 1e-15 && m[(1, 2)].abs() < 1e-15);
        // ∫ (x - 1/2)^2 / 2 over the unit square.
        assert!((m[(1, 1)] - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn pentagon_mass_matches_green_oracle() {
        let mesh = pentagon();
        let m = mass_matrix(&mesh, 0, 2).unwrap();
        let basis = MonomialBasis::for_element(&mesh, 0, 2);
        for a in 0..6 {
            for b in 0..6 {
                let oracle = green_integral(&mesh, 0, |p| {
                    let v = basis.eval(p);
                    v[a] * v[b]
                });
                assert!((m[(a, b)] - oracle).abs() < 1e-13, "{a},{b}: {} vs {oracle}", m[(a, b)]);
            }
        }
        assert!((&m - m.transpose()).amax() < 1e-16);
    }

    #[test]
    fn element_rule_examples() {
        let sq = square();
        let r = element_rule(&sq, 0, 2).unwrap();
        assert!((r.measure() - 1.0).abs() < 1e-15);
        assert!((r.integrate(|p| p.x * p.x) - 1.0 / 3.0).abs() < 1e-13);
        let pent = pentagon();
        let r = element_rule(&pent, 0, 5).unwrap();
        let got = r.integrate(|p| p.x.powi(3) * p.y.powi(2));
        let oracle = green_integral(&pent, 0, |p| p.x.powi(3) * p.y.powi(2));
        assert!((got - oracle).abs() < 1e-14, "{got} vs {oracle}");
        // Additivity over the sub-triangles.
        let tris = pent.sub_triangulate(0).unwrap();
        let sum: f64 = tris
            .iter()
            .map(|[a, b, c]| {
                crate::quadrature::triangle_rule(a, b, c, 5).integrate(|p| p.x.powi(3) * p.y.powi(2))
            })
            .sum();
        assert!((sum - got).abs() < 1e-15);
    }

    #[test]
    fn project_reproduces_x() {
        let mesh = pentagon();
        for k in 1..=3 {
            let p = l2_project(|x| x.x, &mesh, 0, k).unwrap();
            let b = p.basis;
            // x = centre_x + h * xhat.
            assert!((p.coeffs[0] - b.centre.x).abs() < 1e-11);
            assert!((p.coeffs[1] - b.h).abs() < 1e-11);
            assert!(p.coeffs.iter().skip(2).all(|c| c.abs() < 1e-11));
        }
    }

    #[test]
    fn constant_projection_is_mean() {
        let mesh = pentagon();
        let f = |p: &Point| (3.0 * p.x).sin() + p.y * p.y;
        let p = l2_project(f, &mesh, 0, 0).unwrap();
        let r = element_rule(&mesh, 0, 20).unwrap();
        let mean = r.integrate(f) / mesh.area(0);
        assert!((p.coeffs[0] - mean).abs() < 1e-6);
    }

    #[test]
    fn sine_projection_matches_normal_equations() {
        let mesh = square();
        let f = |p: &Point| (PI * p.x).sin() * (PI * p.y).sin();
        let p = l2_project(f, &mesh, 0, 2).unwrap();
        // Dense normal equations with a degree-20 rule.
        let basis = MonomialBasis::for_element(&mesh, 0, 2);
        let r = element_rule(&mesh, 0, 20).unwrap();
        let mut m = DMatrix::zeros(6, 6);
        let mut rhs = DVector::zeros(6);
        for (x, w) in r.points.iter().zip(&r.weights) {
            let v = basis.eval(x);
            m += &v * v.transpose() * *w;
            rhs += &v * (f(x) * w);
        }
        let oracle = m.lu().solve(&rhs).unwrap();
        assert!((p.coeffs - oracle).amax() < 1e-6);
    }

    #[test]
    fn divergence_examples() {
        let basis = MonomialBasis::new(Point::new(0.3, -0.1), 0.7, 3);
        let mut vx = PolyCoeffs::zero(basis.with_degree(1));
        let mut vy = PolyCoeffs::zero(basis.with_degree(1));
        vx.coeffs[index(1, 0)] = 1.0;
        vy.coeffs[index(0, 1)] = 1.0;
        let d = poly_divergence(&[vx, vy]);
        assert!((d.coeffs[0] - 2.0 / 0.7).abs() < 1e-15);

        let c = PolyCoeffs::constant(basis.with_degree(0), 4.0);
        let d = poly_divergence(&[c.clone(), c]);
        assert!(d.coeffs.iter().all(|v| *v == 0.0));

        let mut vx = PolyCoeffs::zero(basis);
        let mut vy = PolyCoeffs::zero(basis);
        vx.coeffs[index(2, 1)] = 1.0;
        vy.coeffs[index(1, 2)] = 1.0;
        let d = poly_divergence(&[vx.clone(), vy.clone()]);
        let eps = 1e-6;
        for k in 0..5 {
            let p = Point::new(0.1 * k as f64, 0.05 - 0.07 * k as f64);
            let (xh, yh) = basis.scaled(&p);
            assert!((d.eval(&p) - 4.0 / 0.7 * xh * yh).abs() < 1e-12);
            let fd = (vx.eval(&Point::new(p.x + eps, p.y)) - vx.eval(&Point::new(p.x - eps, p.y))
                + vy.eval(&Point::new(p.x, p.y + eps))
                - vy.eval(&Point::new(p.x, p.y - eps)))
                / (2.0 * eps);
            assert!((d.eval(&p) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn product_evaluates_pointwise() {
        let basis = MonomialBasis::new(Point::new(0.2, 0.1), 0.5, 2);
        let a = PolyCoeffs::new(basis, DVector::from_vec(vec![1.0, -2.0, 0.5, 0.3, 0.0, 1.1]));
        let b = PolyCoeffs::new(basis.with_degree(1), DVector::from_vec(vec![0.2, 0.7, -1.0]));
        let c = a.mul(&b);
        assert_eq!(c.degree(), 3);
        let p = Point::new(0.37, -0.21);
        assert!((c.eval(&p) - a.eval(&p) * b.eval(&p)).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_basis_gradient() {
        let basis = MonomialBasis::new(Point::new(0.2, 0.1), 0.5, 3);
        let p = Point::new(0.4, -0.3);
        let g = basis.eval_gradient(&p);
        for i in 0..basis.dim() {
            let mut e = PolyCoeffs::zero(basis);
            e.coeffs[i] = 1.0;
            let [dx, dy] = e.gradient();
            assert!((dx.eval(&p) - g[0][i]).abs() < 1e-13);
            assert!((dy.eval(&p) - g[1][i]).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_error_decays_at_optimal_rate() {
        let f = |p: &Point| (PI * p.x).sin() * (PI * p.y).sin();
        for k in 0..=2usize {
            let mut errs = Vec::new();
            let mut hs = Vec::new();
            for level in 0..4 {
                let s = 0.4 * 0.5f64.powi(level);
                let mesh = PolyMesh::new(
                    vec![
                        Point::new(0.3, 0.2),
                        Point::new(0.3 + s, 0.2),
                        Point::new(0.3 + s, 0.2 + s),
                        Point::new(0.3, 0.2 + s),
                    ],
                    vec![vec![0, 1, 2, 3]],
                )
                .unwrap();
                let p = l2_project(f, &mesh, 0, k).unwrap();
                let r = element_rule(&mesh, 0, 20).unwrap();
                errs.push(r.integrate(|x| (f(x) - p.eval(x)).powi(2)).sqrt());
                hs.push(mesh.diameter(0));
            }
            // Error in L2(E) scales like h^{k+1} times |E|^{1/2} ~ h.
            let rate = (errs[2] / errs[3]).ln() / (hs[2] / hs[3]).ln() - 1.0;
            assert!((rate - (k as f64 + 1.0)).abs() < 0.2, "k={k}: rate {rate}");
        }
    }
}
