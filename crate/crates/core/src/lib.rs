//! Virtual element discretisation of quasilinear elliptic problems
//!
//! ```text
//! -div(mu(x, |grad u|) grad u) = f   in Omega,   u = g on the boundary,
//! ```
//!
//! on polygonal meshes, together with a residual a posteriori error estimator
//! and an adaptive solve-estimate-mark-refine loop.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] polygonal meshes with hanging nodes, generators and refinement;
//! * [`quadrature`] Gauss rules on edges and sub-triangulated polygons;
//! * [`poly`] scaled monomials and L2 projections;
//! * [`space`] degrees of freedom and the computable projections;
//! * [`solver`] assembly, Dirichlet elimination and the Kačanov iteration;
//! * [`estimator`] element indicators and the effectivity index;
//! * [`adapt`] Dörfler marking and the adaptive loop.

pub mod adapt;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod mesh;
pub mod model;
pub mod poly;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;

pub use adapt::{adapt_loop, dorfler_mark, AdaptConfig, AdaptHistory, AdaptStep, Marking, RefinementStrategy};
pub use error::{Error, Result};
pub use estimator::{estimate, EdgeAttribution, ElementIndicators, Estimate, EstimatorOptions};
pub use geometry::{Point, Vector};
pub use mesh::{build_cartesian_grid, build_voronoi_mesh, Domain, PolyMesh, RegularityReport};
pub use model::NonlinearModel;
pub use poly::{MonomialBasis, PolyCoeffs};
pub use problems::{Coefficient, ManufacturedProblem, Solution};
pub use quadrature::QuadratureRule;
pub use solver::{solve_nonlinear, DiscreteSystem, IterationTrace, SolverOptions, StabilizationMode};
pub use space::{DofMap, ElementOperators, VemSpace};
