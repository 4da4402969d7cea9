//! Assembly of the frozen-coefficient systems and the Kačanov iteration.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::PolyMesh;
use crate::model::NonlinearModel;
use crate::poly::Projector;
use crate::quadrature::element_rule;
use crate::space::{average_coefficient, interpolate, VemSpace};
use crate::sparse::{solve_with, CsrMatrix, SymbolicCholesky};

/// Scaling of the dofi-dofi stabilisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilizationMode {
    /// Element average of `μ(x, |Π₁⁰ z|)`.
    #[default]
    Average,
    /// The constant `M_μ m_μ`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative increment `‖u^{k+1} - u^k‖∞ / max(1, ‖u^{k+1}‖∞)` at which
    /// the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub stabilization: StabilizationMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, stabilization: StabilizationMode::Average }
    }
}

/// Convergence history of the Kačanov iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    /// Relative increments, one per solve after the initial one.
    pub increments: Vec<f64>,
    /// Unscaled increments `‖u^{k+1} - u^k‖∞`.
    pub steps: Vec<f64>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.increments.len()
    }

    /// Ratios of successive unscaled increments.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.steps.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Global matrix and load vector of one frozen-coefficient problem, with the
/// Dirichlet values of the boundary dofs.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub boundary: Vec<bool>,
    pub boundary_values: Vec<f64>,
}

/// The system on the free dofs after symmetric elimination.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global ids of the free dofs.
    pub free: Vec<usize>,
}

/// Element stiffness matrix for the coefficient frozen at `z` and the local
/// load vector.
pub fn element_system(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    element: usize,
    z: &DVector<f64>,
    mode: StabilizationMode,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let ops = &space.ops[element];
    let order = space.order;
    let rule = element_rule(mesh, element, 2 * order + 2)?;
    let gb = ops.basis.with_degree(order - 1);
    let ng = gb.dim();
    let [gx, gy] = ops.gradient(z);
    let mut w = DMatrix::zeros(ng, ng);
    let mut vals = vec![0.0; ng];
    for (p, wt) in rule.points.iter().zip(&rule.weights) {
        gb.eval_into(p, &mut vals);
        let gxv: f64 = vals.iter().zip(gx.coeffs.iter()).map(|(a, b)| a * b).sum();
        let gyv: f64 = vals.iter().zip(gy.coeffs.iter()).map(|(a, b)| a * b).sum();
        let mu = model.mu(p, gxv.hypot(gyv)) * wt;
        for a in 0..ng {
            let va = mu * vals[a];
            for b in 0..ng {
                w[(a, b)] += va * vals[b];
            }
        }
    }
    let mut k = ops.grad[0].transpose() * &w * &ops.grad[0] + ops.grad[1].transpose() * &w * &ops.grad[1];
    let scale = match mode {
        StabilizationMode::Average => {
            average_coefficient(mesh, element, order, |x, t| model.mu(x, t), ops.constant_gradient(z))?
        }
        StabilizationMode::Linear => {
            let (m, big_m) = model.bounds();
            m * big_m
        }
    };
    k += &ops.stab * scale;
    let proj = Projector::new(ops.basis, rule)?;
    let fh = proj.project(|x| model.source(x));
    let rhs = ops.moments.transpose() * fh.coeffs;
    Ok((k, rhs))
}

/// Sparsity pattern of the global matrix.
pub fn matrix_pattern(space: &VemSpace) -> CsrMatrix {
    CsrMatrix::from_blocks(space.num_dofs(), (0..space.dofs.num_elements).map(|e| space.dofs.local_dofs(e)))
}

/// Assembles `a_h(z; ·, ·)` and the load vector into `pattern`.
pub fn assemble_into(
    pattern: &mut CsrMatrix,
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    z: &[f64],
    mode: StabilizationMode,
) -> Result<Vec<f64>> {
    let locals = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| element_system(mesh, space, model, e, &space.dofs.gather(e, z), mode))
        .collect::<Result<Vec<_>>>()?;
    pattern.zero_values();
    let mut rhs = vec![0.0; space.num_dofs()];
    for (e, (k, f)) in locals.iter().enumerate() {
        let dofs = space.dofs.local_dofs(e);
        for (a, &i) in dofs.iter().enumerate() {
            rhs[i] += f[a];
            let lo = pattern.row_ptr[i];
            let hi = pattern.row_ptr[i + 1];
            for (b, &j) in dofs.iter().enumerate() {
                let p = lo + pattern.col_idx[lo..hi].binary_search(&j).expect("pattern");
                pattern.values[p] += k[(a, b)];
            }
        }
    }
    Ok(rhs)
}

/// Boundary dof values: the degrees of freedom of the Dirichlet datum.
pub fn boundary_values(mesh: &PolyMesh, space: &VemSpace, model: &dyn NonlinearModel) -> Result<Vec<f64>> {
    let all = interpolate(|x| model.dirichlet(x), mesh, &space.dofs)?;
    let mask = space.dofs.boundary_mask();
    Ok(all.iter().zip(mask).map(|(v, b)| if *b { *v } else { 0.0 }).collect())
}

/// Frozen-coefficient system with the coefficient evaluated at `z`.
pub fn assemble_linearized(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    z: &[f64],
    mode: StabilizationMode,
) -> Result<DiscreteSystem> {
    let mut matrix = matrix_pattern(space);
    let rhs = assemble_into(&mut matrix, mesh, space, model, z, mode)?;
    Ok(DiscreteSystem {
        matrix,
        rhs,
        boundary: space.dofs.boundary_mask().to_vec(),
        boundary_values: boundary_values(mesh, space, model)?,
    })
}

/// Removes boundary rows and columns, moving their contribution to the
/// right-hand side.
pub fn apply_dirichlet(system: &DiscreteSystem) -> ReducedSystem {
    let free: Vec<usize> = (0..system.rhs.len()).filter(|&i| !system.boundary[i]).collect();
    let a = &system.matrix;
    let rhs = free
        .iter()
        .map(|&i| {
            let mut r = system.rhs[i];
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[p];
                if system.boundary[j] {
                    r -= a.values[p] * system.boundary_values[j];
                }
            }
            r
        })
        .collect();
    ReducedSystem { matrix: a.principal_submatrix(&free), rhs, free }
}

impl ReducedSystem {
    /// Global vector with the boundary values and the free values `x`.
    pub fn expand(&self, x: &[f64], boundary_values: &[f64]) -> Vec<f64> {
        let mut u = boundary_values.to_vec();
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = x[k];
        }
        u
    }
}

/// Solves a symmetric positive definite system by sparse Cholesky with
/// iterative refinement.
pub fn solve_linear(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    crate::sparse::solve_spd(matrix, rhs)
}

/// Kačanov iteration for the discrete nonlinear problem. The first iterate
/// freezes the coefficient at `t = 0`.
pub fn solve_nonlinear(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    options: &SolverOptions,
) -> Result<(Vec<f64>, IterationTrace)> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
    }
    let n = space.num_dofs();
    let g = boundary_values(mesh, space, model)?;
    let mask = space.dofs.boundary_mask().to_vec();
    let mut pattern = matrix_pattern(space);
    let free: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();

    let mut symbolic: Option<SymbolicCholesky> = None;
    let mut solve = |z: &[f64], pattern: &mut CsrMatrix| -> Result<Vec<f64>> {
        let rhs = assemble_into(pattern, mesh, space, model, z, options.stabilization)?;
        let system = DiscreteSystem {
            matrix: std::mem::replace(pattern, CsrMatrix::identity(0)),
            rhs,
            boundary: mask.clone(),
            boundary_values: g.clone(),
        };
        let reduced = apply_dirichlet(&system);
        *pattern = system.matrix;
        if free.is_empty() {
            return Ok(g.clone());
        }
        let sym = symbolic.get_or_insert_with(|| SymbolicCholesky::new(&reduced.matrix));
        let x = solve_with(sym, &reduced.matrix, &reduced.rhs)?;
        Ok(reduced.expand(&x, &g))
    };

    let mut u = solve(&vec![0.0; n], &mut pattern)?;
    let mut trace = IterationTrace::default();
    for _ in 0..options.max_iter {
        let next = solve(&u, &mut pattern)?;
        let step = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let size = next.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let inc = step / size.max(1.0);
        trace.steps.push(step);
        trace.increments.push(inc);
        u = next;
        if inc <= options.tol {
            return Ok((u, trace));
        }
    }
    Err(Error::NotConverged { trace })
}

/// Residual `A(u) u - b` of the discrete nonlinear problem on the free dofs.
pub fn nonlinear_residual(
    mesh: &PolyMesh,
    space: &VemSpace,
    model: &dyn NonlinearModel,
    u: &[f64],
    mode: StabilizationMode,
) -> Result<Vec<f64>> {
    let mut pattern = matrix_pattern(space);
    let rhs = assemble_into(&mut pattern, mesh, space, model, u, mode)?;
    let au = pattern.mul_vec(u);
    let mask = space.dofs.boundary_mask();
    Ok((0..u.len()).filter(|&i| !mask[i]).map(|i| au[i] - rhs[i]).collect())
}
