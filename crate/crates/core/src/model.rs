//! Nonlinear model interface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point, Vector};
use crate::mesh::Domain;

/// Coefficient `μ(x, t)`, data `f`, `g` and optionally the exact solution of
/// `-div(μ(x, |∇u|) ∇u) = f`, `u = g` on the boundary.
pub trait NonlinearModel: Sync {
    fn mu(&self, x: &Point, t: f64) -> f64;

    /// `∂μ/∂t`, required by the data oscillation terms of the estimator.
    fn dmu_dt(&self, _x: &Point, _t: f64) -> Option<f64> {
        None
    }

    /// `∇ₓμ` at fixed `t`.
    fn dmu_dx(&self, _x: &Point, _t: f64) -> Vector {
        Vector::zeros()
    }

    /// Lower and upper monotonicity constants `(m_μ, M_μ)`.
    fn bounds(&self) -> (f64, f64);

    fn source(&self, x: &Point) -> f64;

    fn dirichlet(&self, x: &Point) -> f64;

    fn exact(&self, _x: &Point) -> Option<f64> {
        None
    }

    fn exact_gradient(&self, _x: &Point) -> Option<Vector> {
        None
    }
}

/// Samples `m ≤ μ(x, t) ≤ M` on a grid of the domain bounding box, and the
/// monotonicity bounds `m (t - s) ≤ μ(x,t) t - μ(x,s) s ≤ M (t - s)` on
/// random pairs `t > s ≥ 0`.
pub fn check_model(model: &dyn NonlinearModel, domain: &Domain, seed: u64) -> Result<()> {
    let (m, big_m) = model.bounds();
    if !(m > 0.0 && big_m >= m) {
        return Err(Error::ModelBounds(format!("invalid bounds ({m}, {big_m})")));
    }
    let slack = 1e-12 * big_m;
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = [0.0, 1e-3, 0.1, 0.5, 1.0, 1.2247, 2.0, 5.0, 50.0, 1e3];
    for i in 0..=10 {
        for j in 0..=10 {
            let x = Point::new(lo.x + (hi.x - lo.x) * i as f64 / 10.0, lo.y + (hi.y - lo.y) * j as f64 / 10.0);
            if !domain.contains(&x) && !(i == 0 || j == 0 || i == 10 || j == 10) {
                continue;
            }
            for &t in &ts {
                let v = model.mu(&x, t);
                if !(v >= m - slack && v <= big_m + slack) {
                    return Err(Error::ModelBounds(format!("mu({}, {}; {t}) = {v} outside [{m}, {big_m}]", x.x, x.y)));
                }
            }
            for _ in 0..20 {
                let s: f64 = rng.gen_range(0.0..5.0);
                let t: f64 = s + rng.gen_range(1e-3..5.0);
                let d = model.mu(&x, t) * t - model.mu(&x, s) * s;
                let dt = t - s;
                if d < (m - slack) * dt || d > (big_m + slack) * dt {
                    return Err(Error::ModelBounds(format!(
                        "monotonicity violated at ({}, {}) for s = {s}, t = {t}",
                        x.x, x.y
                    )));
                }
            }
        }
    }
    Ok(())
}
