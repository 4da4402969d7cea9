//! Dörfler marking and the solve, estimate, mark, refine loop.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimator::{estimate, h1_error_elements, Estimate, EstimatorOptions};
use crate::mesh::PolyMesh;
use crate::model::NonlinearModel;
use crate::solver::{solve_nonlinear, IterationTrace, SolverOptions};
use crate::space::VemSpace;

/// Relative slack of the bulk criterion, absorbing summation round-off.
pub const MARKING_SLACK: f64 = 1e-12;

/// Which elements are refined after each solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefinementStrategy {
    #[default]
    Dorfler,
    /// Every element, for uniform-refinement comparisons.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    /// Marking parameter in `(0, 1)`.
    pub theta: f64,
    pub max_refinements: usize,
    /// The loop stops once a solve has at least this many dofs.
    pub dof_budget: usize,
    pub order: usize,
    pub strategy: RefinementStrategy,
    pub solver: SolverOptions,
    pub estimator: EstimatorOptions,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            theta: 0.4,
            max_refinements: 20,
            dof_budget: 100_000,
            order: 1,
            strategy: RefinementStrategy::Dorfler,
            solver: SolverOptions::default(),
            estimator: EstimatorOptions::default(),
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if !(1..=crate::space::MAX_ORDER).contains(&self.order) {
            return Err(Error::InvalidArgument(format!("unsupported order {}", self.order)));
        }
        Ok(())
    }
}

/// Result of bulk marking.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Marking {
    /// Marked element ids in marking order.
    pub elements: Vec<usize>,
    /// Set when every indicator vanishes.
    pub converged: bool,
}

/// Smallest set of largest indicators with `Σ_marked ≥ θ² Σ_all`. Elements are
/// taken by decreasing indicator, ties by increasing id.
pub fn dorfler_mark(indicators: &[f64], theta: f64) -> Result<Marking> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
    }
    if let Some(bad) = indicators.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("indicator {bad} is not a finite non-negative number")));
    }
    let total: f64 = indicators.iter().sum();
    if total == 0.0 {
        return Ok(Marking { elements: Vec::new(), converged: true });
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    let target = theta * theta * total * (1.0 - MARKING_SLACK);
    let mut sum = 0.0;
    let mut elements = Vec::new();
    for i in order {
        elements.push(i);
        sum += indicators[i];
        if sum >= target {
            break;
        }
    }
    Ok(Marking { elements, converged: false })
}

/// One level of the adaptive loop.
#[derive(Debug, Clone)]
pub struct AdaptStep {
    pub level: usize,
    pub mesh: PolyMesh,
    pub solution: Vec<f64>,
    pub dofs: usize,
    pub estimate: Estimate,
    /// `‖∇u - Π₁u_h‖²` per element when the exact gradient is known.
    pub error_elements: Option<Vec<f64>>,
    pub h1_error: Option<f64>,
    pub effectivity: Option<f64>,
    pub trace: IterationTrace,
    /// Elements marked for the next level; empty on the last level.
    pub marked: Vec<usize>,
}

impl AdaptStep {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        format!(
            "{},{},{},{:.12e},{}",
            self.level,
            self.dofs,
            opt(self.h1_error),
            self.estimate.total,
            opt(self.effectivity)
        )
    }
}

pub const CSV_HEADER: &str = "level,dofs,H1 error,Estimated error,Effectivity";

/// Steps of an adaptive run; `failure` holds the error that aborted it.
#[derive(Debug)]
pub struct AdaptHistory {
    pub steps: Vec<AdaptStep>,
    pub failure: Option<Error>,
}

impl AdaptHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for s in &self.steps {
            writeln!(out, "{}", s.csv_row()).unwrap();
        }
        out
    }

    pub fn into_result(self) -> Result<Vec<AdaptStep>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.steps),
        }
    }
}

fn solve_level(
    model: &dyn NonlinearModel,
    mesh: PolyMesh,
    level: usize,
    config: &AdaptConfig,
) -> Result<AdaptStep> {
    let space = VemSpace::new(&mesh, config.order)?;
    let (solution, trace) = solve_nonlinear(&mesh, &space, model, &config.solver)?;
    let est = estimate(&mesh, &space, model, &solution, &config.estimator)?;
    let error_elements = match h1_error_elements(&mesh, &space, model, &solution) {
        Ok(v) => Some(v),
        Err(Error::MissingExactGradient) => None,
        Err(e) => return Err(e),
    };
    let h1_error = error_elements.as_ref().map(|v| v.iter().sum::<f64>().sqrt());
    let effectivity = h1_error.map(|e| est.total / e);
    Ok(AdaptStep {
        level,
        dofs: space.num_dofs(),
        mesh,
        solution,
        estimate: est,
        error_elements,
        h1_error,
        effectivity,
        trace,
        marked: Vec::new(),
    })
}

/// Runs solve, estimate, mark and refine until `max_refinements` levels have
/// been refined, the dof budget is reached or the indicators vanish.
pub fn adapt_loop(model: &dyn NonlinearModel, initial: PolyMesh, config: &AdaptConfig) -> AdaptHistory {
    let mut steps: Vec<AdaptStep> = Vec::new();
    let fail = |steps, e| AdaptHistory { steps, failure: Some(e) };
    if let Err(e) = config.validate() {
        return fail(steps, e);
    }
    let mut mesh = initial;
    for level in 0..=config.max_refinements {
        let mut step = match solve_level(model, mesh, level, config) {
            Ok(s) => s,
            Err(e) => return fail(steps, e),
        };
        if level == config.max_refinements || step.dofs >= config.dof_budget {
            steps.push(step);
            break;
        }
        let marked = match config.strategy {
            RefinementStrategy::Uniform => (0..step.mesh.num_elements()).collect(),
            RefinementStrategy::Dorfler => match dorfler_mark(&step.estimate.element_totals(), config.theta) {
                Ok(m) if m.converged => {
                    steps.push(step);
                    break;
                }
                Ok(m) => m.elements,
                Err(e) => {
                    steps.push(step);
                    return fail(steps, e);
                }
            },
        };
        let next = match step.mesh.refine(&marked) {
            Ok(m) => m,
            Err(e) => {
                step.marked = marked;
                steps.push(step);
                return fail(steps, e);
            }
        };
        step.marked = marked;
        mesh = next;
        steps.push(step);
    }
    AdaptHistory { steps, failure: None }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian_grid, Domain};
    use crate::problems::ManufacturedProblem;
    use proptest::prelude::*;

    fn prefix_oracle(ind: &[f64], theta: f64) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..ind.len()).collect();
        ids.sort_by(|&a, &b| ind[b].partial_cmp(&ind[a]).unwrap().then(a.cmp(&b)));
        let total: f64 = ind.iter().sum();
        for m in 0..=ids.len() {
            let s: f64 = ids[..m].iter().map(|&i| ind[i]).sum();
            if s >= theta * theta * total * (1.0 - MARKING_SLACK) {
                return ids[..m].to_vec();
            }
        }
        ids
    }

    #[test]
    fn marking_examples() {
        let m = dorfler_mark(&[0.0, 0.0, 5.0, 0.0], 0.4).unwrap();
        assert_eq!(m.elements, vec![2]);
        let m = dorfler_mark(&vec![1.0; 100], 0.4).unwrap();
        assert_eq!(m.elements, (0..16).collect::<Vec<_>>());
        let m = dorfler_mark(&[0.0; 5], 0.4).unwrap();
        assert!(m.converged && m.elements.is_empty());
        assert!(dorfler_mark(&[1.0], 1.0).is_err());
        assert!(dorfler_mark(&[-1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        // θ² Σ = 0.36 * 11 = 3.96 needs two of the three largest.
        let m = dorfler_mark(&[1.0, 3.0, 3.0, 1.0, 3.0], 0.6).unwrap();
        assert_eq!(m.elements, vec![1, 2]);
    }

    proptest! {
        #[test]
        fn marking_is_minimal_prefix(ind in prop::collection::vec(0.0f64..10.0, 1..60), theta in 0.05f64..0.95) {
            prop_assume!(ind.iter().sum::<f64>() > 0.0);
            let m = dorfler_mark(&ind, theta).unwrap();
            prop_assert_eq!(&m.elements, &prefix_oracle(&ind, theta));
            let total: f64 = ind.iter().sum();
            let s: f64 = m.elements.iter().map(|&i| ind[i]).sum();
            prop_assert!(s >= theta * theta * total * (1.0 - MARKING_SLACK));
            let without: f64 = m.elements[..m.elements.len() - 1].iter().map(|&i| ind[i]).sum();
            prop_assert!(without < theta * theta * total * (1.0 - MARKING_SLACK));
        }
    }

    #[test]
    fn zero_refinements_gives_one_record() {
        let mesh = build_cartesian_grid(4, 4, &Domain::unit_square()).unwrap();
        let p1 = ManufacturedProblem::problem1();
        let config = AdaptConfig { max_refinements: 0, ..Default::default() };
        let h = adapt_loop(&p1, mesh, &config);
        assert!(h.failure.is_none());
        assert_eq!(h.steps.len(), 1);
        assert_eq!(h.steps[0].dofs, 25);
        let csv = h.to_csv();
        assert!(csv.starts_with("level,dofs,H1 error,Estimated error,Effectivity\n0,25,"));
    }

    #[test]
    fn dofs_increase_and_refinement_concentrates_at_corner() {
        let mesh = build_cartesian_grid(4, 4, &Domain::LShape).unwrap_or_else(|_| {
            crate::mesh::build_voronoi_mesh(12, &Domain::LShape, 10, 1).unwrap()
        });
        let p2 = ManufacturedProblem::problem2();
        let config = AdaptConfig { max_refinements: 8, ..Default::default() };
        let h = adapt_loop(&p2, mesh, &config);
        assert!(h.failure.is_none(), "{:?}", h.failure);
        for w in h.steps.windows(2) {
            assert!(w[1].dofs > w[0].dofs);
        }
        let last = &h.steps.last().unwrap().mesh;
        let near = |c: crate::geometry::Point| {
            (0..last.num_elements())
                .filter(|&e| (last.centroid(e) - c).norm() < 0.25)
                .map(|e| last.area(e))
                .fold(f64::INFINITY, f64::min)
        };
        assert!(near(crate::geometry::Point::new(0.0, 0.0)) < near(crate::geometry::Point::new(1.0, 1.0)));
    }

    #[test]
    fn failure_preserves_history() {
        let mesh = build_cartesian_grid(4, 4, &Domain::unit_square()).unwrap();
        let p1 = ManufacturedProblem::problem1();
        let mut config = AdaptConfig { max_refinements: 2, ..Default::default() };
        config.solver.max_iter = 1;
        let h = adapt_loop(&p1, mesh, &config);
        assert!(h.steps.is_empty());
        assert!(matches!(h.failure, Some(Error::NotConverged { .. })));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((log_log_slope(&x, &y) + 1.5).abs() < 1e-12);
    }
}
