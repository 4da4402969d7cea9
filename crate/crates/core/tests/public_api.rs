//! End-to-end use of the public API.

use quasivem::mesh::{read_mesh, write_mesh};
use quasivem::{
    adapt_loop, build_cartesian_grid, build_voronoi_mesh, AdaptConfig, Domain, ManufacturedProblem, RefinementStrategy,
};

#[test]
fn mesh_text_roundtrip_preserves_refined_mesh() {
    let mesh = build_voronoi_mesh(16, &Domain::LShape, 20, 3).unwrap();
    let mesh = mesh.refine(&[0, 5]).unwrap();
    let mut text = Vec::new();
    write_mesh(&mesh, &mut text).unwrap();
    let back = read_mesh(text.as_slice()).unwrap();
    assert_eq!(back.elements(), mesh.elements());
    assert_eq!(back.vertices(), mesh.vertices());
}

#[test]
fn adaptive_problem1_reduces_error_and_estimate() {
    let model = ManufacturedProblem::problem1();
    let config = AdaptConfig { order: 2, max_refinements: 6, ..Default::default() };
    let steps = adapt_loop(&model, build_cartesian_grid(4, 4, &model.domain).unwrap(), &config).into_result().unwrap();
    assert_eq!(steps.len(), 7);
    let first = &steps[0];
    let last = steps.last().unwrap();
    assert!(last.dofs > first.dofs);
    assert!(last.h1_error.unwrap() < 0.5 * first.h1_error.unwrap());
    assert!(last.estimate.total < 0.5 * first.estimate.total);
    for s in &steps {
        assert!(s.estimate.total >= s.h1_error.unwrap());
    }
}

#[test]
fn uniform_strategy_quadruples_elements() {
    let model = ManufacturedProblem::problem2();
    let config = AdaptConfig { max_refinements: 2, strategy: RefinementStrategy::Uniform, ..Default::default() };
    let steps = adapt_loop(&model, build_cartesian_grid(4, 4, &model.domain).unwrap(), &config).into_result().unwrap();
    let counts: Vec<usize> = steps.iter().map(|s| s.mesh.num_elements()).collect();
    assert_eq!(counts, vec![12, 48, 192]);
}

#[test]
fn dof_budget_stops_the_loop() {
    let model = ManufacturedProblem::problem2();
    let config = AdaptConfig { dof_budget: 200, max_refinements: 50, ..Default::default() };
    let steps = adapt_loop(&model, build_cartesian_grid(4, 4, &model.domain).unwrap(), &config).into_result().unwrap();
    let last = steps.last().unwrap();
    assert!(last.dofs >= 200);
    assert!(steps[..steps.len() - 1].iter().all(|s| s.dofs < 200));
}
