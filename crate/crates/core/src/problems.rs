//! Manufactured problems: a coefficient law and an exact solution, with the
//! source term derived in closed form.
//!
//! For `μ = μ(x, t)` and `t = |∇u|`,
//!
//! ```text
//! -div(μ ∇u) = -(∇ₓμ · ∇u + (∂μ/∂t) (∇uᵀ H ∇u) / |∇u| + μ Δu),
//! ```
//!
//! where `H` is the Hessian of `u`. The middle term is dropped where
//! `|∇u| < 1e-14`.

use std::f64::consts::PI;

use nalgebra::Matrix2;

use crate::geometry::{Point, Vector};
use crate::mesh::Domain;
use crate::model::NonlinearModel;

/// Coefficient laws `μ(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    /// `μ = c`.
    Constant(f64),
    /// `μ = a + b / (1 + t²)`.
    Rational { a: f64, b: f64 },
    /// `μ = a + b exp(-t²)`.
    Exponential { a: f64, b: f64 },
    /// `μ = c0 + cx x + cy y`, independent of `t`; bounds assume
    /// `|x|, |y| ≤ 1`.
    Affine { c0: f64, cx: f64, cy: f64 },
}

impl Coefficient {
    pub fn value(&self, x: &Point, t: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::Rational { a, b } => a + b / (1.0 + t * t),
            Self::Exponential { a, b } => a + b * (-t * t).exp(),
            Self::Affine { c0, cx, cy } => c0 + cx * x.x + cy * x.y,
        }
    }

    pub fn dt(&self, _x: &Point, t: f64) -> f64 {
        match *self {
            Self::Constant(_) | Self::Affine { .. } => 0.0,
            Self::Rational { b, .. } => -2.0 * b * t / (1.0 + t * t).powi(2),
            Self::Exponential { b, .. } => -2.0 * b * t * (-t * t).exp(),
        }
    }

    pub fn dx(&self) -> Vector {
        match *self {
            Self::Affine { cx, cy, .. } => Vector::new(cx, cy),
            _ => Vector::zeros(),
        }
    }

    /// Bounds of `d(μ t)/dt = μ + t ∂μ/∂t` over `t ≥ 0`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Constant(c) => (c, c),
            // d/dt (t/(1+t²)) = (1-t²)/(1+t²)² ∈ [-1/8, 1].
            Self::Rational { a, b } => (a - b / 8.0, a + b),
            // d/dt (t e^{-t²}) = (1-2t²) e^{-t²} ∈ [-2 e^{-3/2}, 1].
            Self::Exponential { a, b } => (a - 2.0 * b * (-1.5f64).exp(), a + b),
            Self::Affine { c0, cx, cy } => (c0 - cx.abs() - cy.abs(), c0 + cx.abs() + cy.abs()),
        }
    }
}

/// Exact solutions with value, gradient and Hessian in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    /// `sin(πx) sin(πy)`.
    Sine,
    /// `r^{2/3} sin(2θ/3)` with `θ ∈ [0, 2π)`.
    Corner,
    /// `Corner` plus `exp(-1000 ((x - 1/2)² + (y - 1/2)²))`.
    CornerGaussian,
    /// `Σ c x^a y^b`.
    Polynomial(Vec<(f64, u32, u32)>),
}

fn polar(x: &Point) -> (f64, f64) {
    let r = x.x.hypot(x.y);
    let mut th = x.y.atan2(x.x);
    if th < 0.0 {
        th += 2.0 * PI;
    }
    (r, th)
}

fn gaussian(x: &Point) -> (f64, Vector, Matrix2<f64>) {
    let d = Vector::new(x.x - 0.5, x.y - 0.5);
    let g = (-1000.0 * d.norm_squared()).exp();
    let grad = d * (-2000.0 * g);
    let hess = (d * d.transpose() * 4.0e6 - Matrix2::identity() * 2000.0) * g;
    (g, grad, hess)
}

fn pow_term(x: f64, a: u32) -> f64 {
    if a == 0 {
        1.0
    } else {
        x.powi(a as i32)
    }
}

impl Solution {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            Self::Sine => (PI * x.x).sin() * (PI * x.y).sin(),
            Self::Corner => {
                let (r, th) = polar(x);
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(2.0 / 3.0) * (2.0 * th / 3.0).sin()
                }
            }
            Self::CornerGaussian => Self::Corner.value(x) + gaussian(x).0,
            Self::Polynomial(terms) => terms.iter().map(|(c, a, b)| c * pow_term(x.x, *a) * pow_term(x.y, *b)).sum(),
        }
    }

    pub fn gradient(&self, x: &Point) -> Vector {
        match self {
            Self::Sine => Vector::new(
                PI * (PI * x.x).cos() * (PI * x.y).sin(),
                PI * (PI * x.x).sin() * (PI * x.y).cos(),
            ),
            Self::Corner => {
                // u = Im z^{2/3}: u_x = Im F', u_y = Re F', F' = (2/3) z^{-1/3}.
                let (r, th) = polar(x);
                let s = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
                Vector::new(-s * (th / 3.0).sin(), s * (th / 3.0).cos())
            }
            Self::CornerGaussian => Self::Corner.gradient(x) + gaussian(x).1,
            Self::Polynomial(terms) => {
                let mut g = Vector::zeros();
                for (c, a, b) in terms {
                    if *a > 0 {
                        g.x += c * *a as f64 * pow_term(x.x, a - 1) * pow_term(x.y, *b);
                    }
                    if *b > 0 {
                        g.y += c * *b as f64 * pow_term(x.x, *a) * pow_term(x.y, b - 1);
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, x: &Point) -> Matrix2<f64> {
        match self {
            Self::Sine => {
                let (sx, cx) = (PI * x.x).sin_cos();
                let (sy, cy) = (PI * x.y).sin_cos();
                Matrix2::new(-sx * sy, cx * cy, cx * cy, -sx * sy) * (PI * PI)
            }
            Self::Corner => {
                // F'' = -(2/9) z^{-4/3}; u_xx = Im F'', u_xy = Re F''.
                let (r, th) = polar(x);
                let s = -2.0 / 9.0 * r.powf(-4.0 / 3.0);
                let re = s * (4.0 * th / 3.0).cos();
                let im = -s * (4.0 * th / 3.0).sin();
                Matrix2::new(im, re, re, -im)
            }
            Self::CornerGaussian => Self::Corner.hessian(x) + gaussian(x).2,
            Self::Polynomial(terms) => {
                let mut h = Matrix2::zeros();
                for (c, a, b) in terms {
                    let (a, b) = (*a, *b);
                    if a > 1 {
                        h[(0, 0)] += c * (a * (a - 1)) as f64 * pow_term(x.x, a - 2) * pow_term(x.y, b);
                    }
                    if b > 1 {
                        h[(1, 1)] += c * (b * (b - 1)) as f64 * pow_term(x.x, a) * pow_term(x.y, b - 2);
                    }
                    if a > 0 && b > 0 {
                        let v = c * (a * b) as f64 * pow_term(x.x, a - 1) * pow_term(x.y, b - 1);
                        h[(0, 1)] += v;
                        h[(1, 0)] += v;
                    }
                }
                h
            }
        }
    }
}

/// A coefficient law paired with an exact solution; the source is
/// `-div(μ ∇u)` and the Dirichlet datum is `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedProblem {
    pub coefficient: Coefficient,
    pub solution: Solution,
    pub domain: Domain,
}

impl ManufacturedProblem {
    pub fn new(coefficient: Coefficient, solution: Solution, domain: Domain) -> Self {
        Self { coefficient, solution, domain }
    }

    /// `μ = 2 + 1/(1+t²)`, `u = sin(πx) sin(πy)` on the unit square.
    pub fn problem1() -> Self {
        Self::new(Coefficient::Rational { a: 2.0, b: 1.0 }, Solution::Sine, Domain::unit_square())
    }

    /// `μ = 1 + exp(-t²)`, `u = r^{2/3} sin(2θ/3)` on the L-shaped domain.
    pub fn problem2() -> Self {
        Self::new(Coefficient::Exponential { a: 1.0, b: 1.0 }, Solution::Corner, Domain::LShape)
    }

    /// As problem 2 with an added sharp Gaussian at `(1/2, 1/2)`.
    pub fn problem3() -> Self {
        Self::new(Coefficient::Exponential { a: 1.0, b: 1.0 }, Solution::CornerGaussian, Domain::LShape)
    }

    pub fn by_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(Self::problem1()),
            2 => Some(Self::problem2()),
            3 => Some(Self::problem3()),
            _ => None,
        }
    }

    /// Flux `μ(x, |∇u|) ∇u` of the exact solution.
    pub fn flux(&self, x: &Point) -> Vector {
        let g = self.solution.gradient(x);
        g * self.coefficient.value(x, g.norm())
    }
}

impl NonlinearModel for ManufacturedProblem {
    fn mu(&self, x: &Point, t: f64) -> f64 {
        self.coefficient.value(x, t)
    }

    fn dmu_dt(&self, x: &Point, t: f64) -> Option<f64> {
        Some(self.coefficient.dt(x, t))
    }

    fn dmu_dx(&self, _x: &Point, _t: f64) -> Vector {
        self.coefficient.dx()
    }

    fn bounds(&self) -> (f64, f64) {
        self.coefficient.bounds()
    }

    fn source(&self, x: &Point) -> f64 {
        let g = self.solution.gradient(x);
        let h = self.solution.hessian(x);
        let t = g.norm();
        let mut div = self.coefficient.dx().dot(&g) + self.coefficient.value(x, t) * h.trace();
        if t >= 1e-14 {
            div += self.coefficient.dt(x, t) * g.dot(&(h * g)) / t;
        }
        -div
    }

    fn dirichlet(&self, x: &Point) -> f64 {
        self.solution.value(x)
    }

    fn exact(&self, x: &Point) -> Option<f64> {
        Some(self.solution.value(x))
    }

    fn exact_gradient(&self, x: &Point) -> Option<Vector> {
        Some(self.solution.gradient(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior(domain: &Domain, rng: &mut ChaCha8Rng) -> Point {
        loop {
            let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let p = match domain {
                Domain::Rectangle { .. } => Point::new(0.5 * (p.x + 1.0), 0.5 * (p.y + 1.0)),
                Domain::LShape => p,
            };
            if domain.contains(&p) && p.coords.norm() > 1e-2 {
                return p;
            }
        }
    }

    /// Fourth-order central difference.
    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn bounds_of_builtin_coefficients() {
        assert_eq!(ManufacturedProblem::problem1().bounds(), (15.0 / 8.0, 3.0));
        let (m, big) = ManufacturedProblem::problem2().bounds();
        assert!((m - (1.0 - 2.0 * (-1.5f64).exp())).abs() < 1e-15 && big == 2.0);
        for id in 1..=3 {
            let p = ManufacturedProblem::by_id(id).unwrap();
            check_model(&p, &p.domain, 7).unwrap();
        }
    }

    #[test]
    fn check_rejects_bad_bounds() {
        let mut p = ManufacturedProblem::problem1();
        p.coefficient = Coefficient::Rational { a: 2.0, b: -3.0 };
        assert!(check_model(&p, &p.domain, 1).is_err());
    }

    #[test]
    fn gradients_and_hessians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for sol in [Solution::Sine, Solution::Corner, Solution::CornerGaussian, Solution::Polynomial(vec![(1.5, 2, 1), (-0.5, 0, 3)])] {
            let domain = if sol == Solution::Sine { Domain::unit_square() } else { Domain::LShape };
            for _ in 0..50 {
                let p = random_interior(&domain, &mut rng);
                let h = 1e-4;
                let g = sol.gradient(&p);
                let gx = fd(|t| sol.value(&Point::new(t, p.y)), p.x, h);
                let gy = fd(|t| sol.value(&Point::new(p.x, t)), p.y, h);
                let scale = 1.0 + g.norm();
                assert!((g.x - gx).abs() < 1e-6 * scale && (g.y - gy).abs() < 1e-6 * scale, "{sol:?} at {p}");
                let hm = sol.hessian(&p);
                let hxx = fd(|t| sol.gradient(&Point::new(t, p.y)).x, p.x, h);
                let hxy = fd(|t| sol.gradient(&Point::new(p.x, t)).x, p.y, h);
                let hyy = fd(|t| sol.gradient(&Point::new(p.x, t)).y, p.y, h);
                let scale = 1.0 + hm.norm();
                assert!((hm[(0, 0)] - hxx).abs() < 1e-5 * scale, "{sol:?} at {p}");
                assert!((hm[(0, 1)] - hxy).abs() < 1e-5 * scale && (hm[(1, 0)] - hxy).abs() < 1e-5 * scale);
                assert!((hm[(1, 1)] - hyy).abs() < 1e-5 * scale);
            }
        }
    }

    #[test]
    fn manufactured_sources_satisfy_the_pde() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for id in 1..=3 {
            let prob = ManufacturedProblem::by_id(id).unwrap();
            for _ in 0..100 {
                let p = random_interior(&prob.domain, &mut rng);
                let h = 1e-4;
                let div = fd(|t| prob.flux(&Point::new(t, p.y)).x, p.x, h)
                    + fd(|t| prob.flux(&Point::new(p.x, t)).y, p.y, h);
                let f = prob.source(&p);
                assert!((-div - f).abs() <= 1e-5 * f.abs().max(1.0), "problem {id} at {p}: {} vs {f}", -div);
            }
        }
    }

    #[test]
    fn corner_solution_values() {
        let u = Solution::Corner;
        // θ = π/4 at (1, 1): (√2)^{2/3} sin(π/6).
        assert!((u.value(&Point::new(1.0, 1.0)) - 2f64.powf(1.0 / 3.0) * 0.5).abs() < 1e-15);
        assert_eq!(u.value(&Point::origin()), 0.0);
        assert!(u.value(&Point::new(0.0, -1.0)).abs() < 1e-15);
        assert!(u.value(&Point::new(1.0, 0.0)).abs() < 1e-15);
        assert!(u.hessian(&Point::new(0.3, 0.4)).trace().abs() < 1e-12);
    }
}
