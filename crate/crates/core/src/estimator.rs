//! Residual a posteriori error indicators.
//!
//! For every element, with `g = Π₁u_h`, `μ_h = P_ℓ μ(x, |g|)` and
//! `f_h = P_ℓ f`:
//!
//! * `η² = h_E² ‖f_h + div(μ_h g)‖² + Σ_e h_e ‖[μ_h g]·n‖²`;
//! * `Θ² = h_E² ‖θ^E‖² + h_E² ‖f - f_h‖² + Σ_e h_e ‖[(μ - μ_h) g]·n‖²` with
//!   `θ^E = (f - f_h) + div((μ - μ_h) g)`;
//! * `S² = S^E(u_h; u_h - Π₀u_h, u_h - Π₀u_h)`;
//! * `Ψ² = ‖(P_{ℓ-1} - I)(μ(|g|) g)‖²`.
//!
//! Edge sums run over interior edges only.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, Vector};
use crate::mesh::PolyMesh;
use crate::model::NonlinearModel;
use crate::poly::{poly_divergence, PolyCoeffs, Projector};
use crate::quadrature::{edge_rule, element_rule};
use crate::solver::StabilizationMode;
use crate::space::{average_coefficient, VemSpace};

/// How interior edge terms are attributed to the two incident elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeAttribution {
    /// Each element receives the full term of every edge on its boundary.
    #[default]
    Full,
    /// Each element receives half of the term.
    Half,
}

impl EdgeAttribution {
    fn weight(self) -> f64 {
        match self {
            Self::Full => 1.0,
            Self::Half => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorOptions {
    pub attribution: EdgeAttribution,
    pub stabilization: StabilizationMode,
}

/// Squared indicators of one element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementIndicators {
    /// `h_E² ‖R^E‖²`.
    pub residual_sq: f64,
    /// Attributed `Σ_e h_e ‖J^e‖²`.
    pub jump_sq: f64,
    /// `h_E² ‖θ^E‖²`.
    pub theta_element_sq: f64,
    /// `h_E² ‖f - f_h‖²`.
    pub oscillation_sq: f64,
    /// Attributed `Σ_e h_e ‖θ^e‖²`.
    pub theta_edge_sq: f64,
    pub stab_sq: f64,
    pub psi_sq: f64,
}

impl ElementIndicators {
    pub fn eta_sq(&self) -> f64 {
        self.residual_sq + self.jump_sq
    }

    pub fn theta_sq(&self) -> f64 {
        self.theta_element_sq + self.oscillation_sq + self.theta_edge_sq
    }

    pub fn total(&self) -> f64 {
        self.eta_sq() + self.theta_sq() + self.stab_sq + self.psi_sq
    }
}

/// Indicators of all elements and edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub elements: Vec<ElementIndicators>,
    /// `h_e ‖J^e‖²` per mesh edge, zero on the boundary.
    pub edge_jump_sq: Vec<f64>,
    /// `h_e ‖θ^e‖²` per mesh edge, zero on the boundary.
    pub edge_theta_sq: Vec<f64>,
    /// `(Σ_E η² + Θ² + S² + Ψ²)^{1/2}` with every interior edge counted once.
    pub total: f64,
}

impl Estimate {
    pub fn element_totals(&self) -> Vec<f64> {
        self.elements.iter().map(ElementIndicators::total).collect()
    }
}

/// Polynomial quantities of `u_h` on one element.
#[derive(Debug, Clone)]
pub struct ElementState {
    pub grad: [PolyCoeffs; 2],
    pub mu_h: PolyCoeffs,
}

/// Degree of the rules used by the estimator: six above the degree of the
/// squared polynomial residuals, to resolve the non-polynomial data.
pub fn estimator_order(order: usize) -> usize {
    (2 * order + 2).max(4 * order - 2) + 6
}

fn eval_grad(grad: &[PolyCoeffs; 2], p: &Point) -> Vector {
    Vector::new(grad[0].eval(p), grad[1].eval(p))
}

/// `μ_h = P_ℓ μ(x, |Π₁u_h|)`.
pub fn mu_h_poly(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    element: usize,
    u: &[f64],
) -> Result<PolyCoeffs> {
    let ops = &space.ops[element];
    let grad = ops.gradient(&space.dofs.gather(element, u));
    let proj = Projector::new(ops.basis, element_rule(mesh, element, estimator_order(space.order))?)?;
    Ok(proj.project(|x| model.mu(x, eval_grad(&grad, x).norm())))
}

struct ElementTerms {
    state: ElementState,
    residual_sq: f64,
    theta_element_sq: f64,
    oscillation_sq: f64,
    stab_sq: f64,
    psi_sq: f64,
}

fn element_terms(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    element: usize,
    u_local: &DVector<f64>,
    mode: StabilizationMode,
) -> Result<ElementTerms> {
    let order = space.order;
    let ops = &space.ops[element];
    let rule = element_rule(mesh, element, estimator_order(order))?;
    let proj = Projector::new(ops.basis, rule)?;
    let proj_low = Projector::new(ops.basis.with_degree(order - 1), proj.rule.clone())?;
    let grad = ops.gradient(u_local);
    let jac = [grad[0].gradient(), grad[1].gradient()];
    let points = &proj.rule.points;
    let weights = &proj.rule.weights;

    let gvals: Vec<Vector> = points.iter().map(|p| eval_grad(&grad, p)).collect();
    let mu_vals: Vec<f64> = points.iter().zip(&gvals).map(|(p, g)| model.mu(p, g.norm())).collect();
    let f_vals: Vec<f64> = points.iter().map(|p| model.source(p)).collect();
    let mu_h = proj.project_values(&mu_vals);
    let f_h = proj.project_values(&f_vals);

    let flux_h = [mu_h.mul(&grad[0]), mu_h.mul(&grad[1])];
    let residual = f_h.add(&poly_divergence(&flux_h));
    let div_flux_h = poly_divergence(&flux_h);
    let h2 = mesh.diameter(element).powi(2);

    let mut r2 = 0.0;
    let mut th2 = 0.0;
    let mut osc2 = 0.0;
    let mut psi_x = Vec::with_capacity(points.len());
    let mut psi_y = Vec::with_capacity(points.len());
    for (q, p) in points.iter().enumerate() {
        let w = weights[q];
        let g = gvals[q];
        let t = g.norm();
        r2 += w * residual.eval(p).powi(2);
        let df = f_vals[q] - f_h.eval(p);
        osc2 += w * df * df;
        // div(μ(x,|g|) g) by the chain rule.
        let div_g = jac[0][0].eval(p) + jac[1][1].eval(p);
        let mut div_mu_g = model.dmu_dx(p, t).dot(&g) + mu_vals[q] * div_g;
        if t >= 1e-14 {
            let dmu = model.dmu_dt(p, t).ok_or(Error::MissingDerivative)?;
            // gᵀ J g with J[c][d] = ∂_d g_c.
            let jg = Vector::new(
                jac[0][0].eval(p) * g.x + jac[0][1].eval(p) * g.y,
                jac[1][0].eval(p) * g.x + jac[1][1].eval(p) * g.y,
            );
            div_mu_g += dmu * g.dot(&jg) / t;
        } else if model.dmu_dt(p, t).is_none() {
            return Err(Error::MissingDerivative);
        }
        let theta = df + div_mu_g - div_flux_h.eval(p);
        th2 += w * theta * theta;
        psi_x.push(mu_vals[q] * g.x);
        psi_y.push(mu_vals[q] * g.y);
    }
    let px = proj_low.project_values(&psi_x);
    let py = proj_low.project_values(&psi_y);
    let mut psi2 = 0.0;
    for (q, p) in points.iter().enumerate() {
        psi2 += weights[q] * ((px.eval(p) - psi_x[q]).powi(2) + (py.eval(p) - psi_y[q]).powi(2));
    }

    let scale = match mode {
        StabilizationMode::Average => {
            average_coefficient(mesh, element, order, |x, t| model.mu(x, t), ops.constant_gradient(u_local))?
        }
        StabilizationMode::Linear => {
            let (m, big_m) = model.bounds();
            m * big_m
        }
    };
    let d = u_local - ops.dofs_of(&(&ops.pi0 * u_local));
    let stab_sq = scale * d.dot(&(&ops.stab * &d));

    Ok(ElementTerms {
        state: ElementState { grad, mu_h },
        residual_sq: h2 * r2,
        theta_element_sq: h2 * th2,
        oscillation_sq: h2 * osc2,
        stab_sq: stab_sq.max(0.0),
        psi_sq: psi2,
    })
}

/// `h_E² ‖R^E‖²`.
pub fn element_residual(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    element: usize,
    u: &[f64],
) -> Result<f64> {
    let local = space.dofs.gather(element, u);
    Ok(element_terms(mesh, space, model, element, &local, StabilizationMode::Average)?.residual_sq)
}

/// `S_E²` with the stabilisation frozen at `Π₁⁰u_h`.
pub fn stab_indicator(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    element: usize,
    u: &[f64],
    mode: StabilizationMode,
) -> Result<f64> {
    let local = space.dofs.gather(element, u);
    Ok(element_terms(mesh, space, model, element, &local, mode)?.stab_sq)
}

/// `Ψ_E²`.
pub fn psi_indicator(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    element: usize,
    u: &[f64],
) -> Result<f64> {
    let local = space.dofs.gather(element, u);
    Ok(element_terms(mesh, space, model, element, &local, StabilizationMode::Average)?.psi_sq)
}

/// `(h_e ‖J^e‖², h_e ‖θ^e‖²)` of an interior edge; zero on the boundary.
pub fn edge_terms(
    mesh: &PolyMesh,
    model: &dyn NonlinearModel,
    states: &[ElementState],
    order: usize,
    edge: usize,
) -> (f64, f64) {
    let ed = mesh.edge(edge);
    let Some((minus, _)) = ed.second else {
        return (0.0, 0.0);
    };
    let plus = ed.first.0;
    let n = mesh.outward_normal(plus, edge);
    let a = mesh.vertex(ed.vertices[0]);
    let b = mesh.vertex(ed.vertices[1]);
    let he = mesh.edge_length(edge);
    let rule = edge_rule(estimator_order(order));
    let (sp, sm) = (&states[plus], &states[minus]);
    let mut j2 = 0.0;
    let mut t2 = 0.0;
    for (s, w) in rule.points.iter().zip(&rule.weights) {
        let x = a + (b - a) * *s;
        let gp = eval_grad(&sp.grad, &x);
        let gm = eval_grad(&sm.grad, &x);
        let mhp = sp.mu_h.eval(&x);
        let mhm = sm.mu_h.eval(&x);
        let jump = (gp * mhp - gm * mhm).dot(&n);
        let mp = model.mu(&x, gp.norm());
        let mm = model.mu(&x, gm.norm());
        let theta = (gp * (mp - mhp) - gm * (mm - mhm)).dot(&n);
        j2 += w * jump * jump;
        t2 += w * theta * theta;
    }
    // The rule lives on [0, 1]: ‖·‖² on the edge carries a factor h_e.
    (he * he * j2, he * he * t2)
}

/// Per-element states `Π₁u_h` and `μ_h`.
pub fn element_states(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    u: &[f64],
) -> Result<Vec<ElementState>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let ops = &space.ops[e];
            let grad = ops.gradient(&space.dofs.gather(e, u));
            let mu_h = mu_h_poly(mesh, space, model, e, u)?;
            Ok(ElementState { grad, mu_h })
        })
        .collect()
}

/// `h_e ‖J^e‖²` of one edge.
pub fn edge_jump(mesh: &PolyMesh, space: &VemSpace, model: &dyn NonlinearModel, u: &[f64], edge: usize) -> Result<f64> {
    let ed = mesh.edge(edge);
    let Some((second, _)) = ed.second else {
        return Ok(0.0);
    };
    let mut states: Vec<ElementState> = Vec::new();
    let ids = [ed.first.0, second];
    let mut map = vec![usize::MAX; mesh.num_elements()];
    for (k, &e) in ids.iter().enumerate() {
        let ops = &space.ops[e];
        states.push(ElementState {
            grad: ops.gradient(&space.dofs.gather(e, u)),
            mu_h: mu_h_poly(mesh, space, model, e, u)?,
        });
        map[e] = k;
    }
    // Build a full-length view for edge_terms.
    let full: Vec<ElementState> = (0..mesh.num_elements())
        .map(|e| if map[e] != usize::MAX { states[map[e]].clone() } else { states[0].clone() })
        .collect();
    Ok(edge_terms(mesh, model, &full, space.order, edge).0)
}

/// All indicators of `u_h`.
pub fn estimate(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    u: &[f64],
    options: &EstimatorOptions,
) -> Result<Estimate> {
    let terms = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| element_terms(mesh, space, model, e, &space.dofs.gather(e, u), options.stabilization))
        .collect::<Result<Vec<_>>>()?;
    let states: Vec<ElementState> = terms.iter().map(|t| t.state.clone()).collect();
    let edges: Vec<(f64, f64)> = (0..mesh.num_edges())
        .into_par_iter()
        .map(|k| edge_terms(mesh, model, &states, space.order, k))
        .collect();
    let w = options.attribution.weight();
    let mut elements: Vec<ElementIndicators> = terms
        .iter()
        .map(|t| ElementIndicators {
            residual_sq: t.residual_sq,
            theta_element_sq: t.theta_element_sq,
            oscillation_sq: t.oscillation_sq,
            stab_sq: t.stab_sq,
            psi_sq: t.psi_sq,
            ..Default::default()
        })
        .collect();
    for (k, ed) in mesh.edges().iter().enumerate() {
        if let Some((second, _)) = ed.second {
            for e in [ed.first.0, second] {
                elements[e].jump_sq += w * edges[k].0;
                elements[e].theta_edge_sq += w * edges[k].1;
            }
        }
    }
    let element_part: f64 = elements.iter().map(|e| e.total() - e.jump_sq - e.theta_edge_sq).sum();
    let edge_part: f64 = edges.iter().map(|e| e.0 + e.1).sum();
    let total = (element_part + edge_part).sqrt();
    Ok(Estimate {
        elements,
        edge_jump_sq: edges.iter().map(|e| e.0).collect(),
        edge_theta_sq: edges.iter().map(|e| e.1).collect(),
        total,
    })
}

/// `‖∇u - Π₁u_h‖²` per element, with a rule of degree `2ℓ + 4`.
pub fn h1_error_elements(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    u: &[f64],
) -> Result<Vec<f64>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let rule = element_rule(mesh, e, 2 * space.order + 4)?;
            let grad = space.ops[e].gradient(&space.dofs.gather(e, u));
            let mut s = 0.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let exact = model.exact_gradient(p).ok_or(Error::MissingExactGradient)?;
                s += w * (exact - eval_grad(&grad, p)).norm_squared();
            }
            Ok(s)
        })
        .collect()
}

/// `‖∇u - Π₁u_h‖₀`.
pub fn h1_error(mesh: &PolyMesh, space: &VemSpace, model: &dyn NonlinearModel, u: &[f64]) -> Result<f64> {
    Ok(h1_error_elements(mesh, space, model, u)?.iter().sum::<f64>().sqrt())
}

/// Ratio of the estimate to `‖∇u - Π₁u_h‖₀`.
pub fn effectivity(
    total_estimate: f64,
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    u: &[f64],
) -> Result<f64> {
    Ok(total_estimate / h1_error(mesh, space, model, u)?)
}

/// `max_E η_E² / Σ_{E' ∈ ω_E} (‖∇u - Π₁u_h‖²_{E'} + S_{E'}² + Θ_{E'}²)` where
/// `ω_E` is `E` together with its edge neighbours.
pub fn efficiency_ratio(mesh: &PolyMesh, estimate: &Estimate, errors_sq: &[f64]) -> f64 {
    (0..mesh.num_elements())
        .map(|e| {
            let mut denom = 0.0;
            for k in std::iter::once(e).chain(mesh.edge_neighbors(e)) {
                let ind = &estimate.elements[k];
                denom += errors_sq[k] + ind.stab_sq + ind.theta_sq();
            }
            estimate.elements[e].eta_sq() / denom
        })
        .fold(0.0, f64::max)
}
