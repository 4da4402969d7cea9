//! Gauss-Legendre rules on edges and composite rules on polygons.
//!
//! Polygon rules are built on the barycentric sub-triangulation of the
//! element. Each sub-triangle carries a collapsed (Duffy) tensor product of
//! Gauss-Legendre rules, which is exact to any requested degree and has
//! strictly positive weights.

use std::sync::OnceLock;

use crate::error::Result;
use crate::geometry::Point;
use crate::mesh::PolyMesh;

/// Highest degree for which reference triangle rules are tabulated.
pub const MAX_DEGREE: usize = 40;

/// A rule on a polygon (physical coordinates) or on a reference domain.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// A rule on the unit interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(t, w)| w * f(*t)).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Gauss point required");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule on `[0, 1]` with `ceil((order + 1) / 2)` points, exact
/// for polynomials of degree `order`.
pub fn edge_rule(order: usize) -> EdgeRule {
    let n = (order + 2) / 2;
    let (x, w) = gauss_legendre(n);
    EdgeRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        degree: 2 * n - 1,
    }
}

fn reference_triangle(order: usize) -> &'static QuadratureRule {
    static RULES: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_DEGREE).map(build_reference_triangle).collect());
    &rules[order.min(MAX_DEGREE)]
}

/// Collapsed rule on the triangle (0,0), (1,0), (0,1). The Jacobian factor
/// `1 - u` raises the degree in `u` by one, hence the extra point there.
fn build_reference_triangle(order: usize) -> QuadratureRule {
    let nu = (order + 3) / 2;
    let nv = (order + 2) / 2;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (a, wa) in xu.iter().zip(&wu) {
        let u = 0.5 * (a + 1.0);
        for (b, wb) in xv.iter().zip(&wv) {
            let v = 0.5 * (b + 1.0);
            points.push(Point::new(u, (1.0 - u) * v));
            weights.push(0.25 * wa * wb * (1.0 - u));
        }
    }
    QuadratureRule { points, weights, degree: order }
}

/// Rule of the requested degree on the triangle `a, b, c`.
pub fn triangle_rule(a: &Point, b: &Point, c: &Point, order: usize) -> QuadratureRule {
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), degree: order };
    append_triangle(&mut rule, a, b, c, order);
    rule
}

fn append_triangle(rule: &mut QuadratureRule, a: &Point, b: &Point, c: &Point, order: usize) {
    let reference = reference_triangle(order);
    let e1 = b - a;
    let e2 = c - a;
    let jac = (e1.x * e2.y - e1.y * e2.x).abs();
    for (p, w) in reference.points.iter().zip(&reference.weights) {
        rule.points.push(a + e1 * p.x + e2 * p.y);
        rule.weights.push(w * jac);
    }
}

/// Composite rule on an element: one triangle rule per sub-triangle of the
/// barycentric fan.
pub fn element_rule(mesh: &PolyMesh, element: usize, order: usize) -> Result<QuadratureRule> {
    if order > MAX_DEGREE {
        return Err(crate::Error::InvalidArgument(format!(
            "quadrature degree {order} exceeds the tabulated maximum {MAX_DEGREE}"
        )));
    }
    let triangles = mesh.sub_triangulate(element)?;
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), degree: order };
    for [a, b, c] in &triangles {
        append_triangle(&mut rule, a, b, c, order);
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^p y^q over the reference triangle: p! q! / (p+q+2)!.
    fn monomial_on_reference(p: u32, q: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn midpoint_rule() {
        let r = edge_rule(1);
        assert_eq!(r.points, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn edge_cubic_and_septic() {
        assert!((edge_rule(3).integrate(|t| t.powi(3)) - 0.25).abs() < 1e-15);
        assert!((edge_rule(7).integrate(|t| t.powi(7)) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn edge_rules_exact_up_to_degree() {
        for order in 0..=30 {
            let r = edge_rule(order);
            assert!(r.weights.iter().all(|w| *w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..=order as i32 {
                let exact = 1.0 / (k as f64 + 1.0);
                let err = (r.integrate(|t| t.powi(k)) - exact).abs() / exact;
                assert!(err < 1e-13, "order {order} degree {k}: {err}");
            }
        }
    }

    #[test]
    fn triangle_rules_exact_up_to_degree() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(1.0, 0.0);
        let c = Point::new(0.0, 1.0);
        for order in 0..=20 {
            let r = triangle_rule(&a, &b, &c, order);
            assert!(r.weights.iter().all(|w| *w > 0.0));
            for d in 0..=order as u32 {
                for p in 0..=d {
                    let q = d - p;
                    let exact = monomial_on_reference(p, q);
                    let got = r.integrate(|x| x.x.powi(p as i32) * x.y.powi(q as i32));
                    assert!(
                        ((got - exact) / exact).abs() < 1e-13,
                        "order {order}: x^{p} y^{q} {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_symmetric() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for i in 0..n {
                assert!((x[i] + x[n - 1 - i]).abs() < 1e-15);
                assert!((w[i] - w[n - 1 - i]).abs() < 1e-14);
            }
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        }
    }
}
