//! Adaptive experiment runner: CSV history, mesh snapshots and the
//! configuration used.

use std::fs;
use std::path::{Path, PathBuf};

use quasivem::{
    adapt_loop, build_cartesian_grid, build_voronoi_mesh, AdaptConfig, AdaptHistory, EstimatorOptions,
    ManufacturedProblem, PolyMesh, SolverOptions,
};

use crate::config::{ExperimentConfig, GridKind, ProblemSource};
use crate::error::CliError;
use crate::model_file::parse_model;

/// Paths written by [`run_problem`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub csv: PathBuf,
    pub svgs: Vec<PathBuf>,
    pub config: PathBuf,
    pub levels: usize,
}

pub fn load_model(config: &ExperimentConfig) -> Result<ManufacturedProblem, CliError> {
    match &config.problem {
        ProblemSource::Builtin(id) => ManufacturedProblem::by_id(*id)
            .ok_or_else(|| CliError::Config { line: 0, message: format!("unknown problem id {id}") }),
        ProblemSource::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config {
                line: 0,
                message: format!("cannot read model file {}: {e}", path.display()),
            })?;
            parse_model(&text)
        }
    }
}

pub fn initial_mesh(config: &ExperimentConfig, model: &ManufacturedProblem) -> Result<PolyMesh, CliError> {
    Ok(match config.grid {
        GridKind::Quads => build_cartesian_grid(config.cells, config.cells, &model.domain)?,
        GridKind::Voronoi => build_voronoi_mesh(config.cells, &model.domain, config.lloyd_iterations, config.seed)?,
    })
}

pub fn adapt_config(config: &ExperimentConfig) -> AdaptConfig {
    AdaptConfig {
        theta: config.theta,
        max_refinements: config.refinements,
        dof_budget: config.dof_budget,
        order: config.order,
        solver: SolverOptions {
            tol: config.tolerance,
            max_iter: config.max_iterations,
            stabilization: config.stabilization,
        },
        estimator: EstimatorOptions { attribution: config.attribution, stabilization: config.stabilization },
        ..Default::default()
    }
}

/// Levels with a mesh snapshot: first, middle and last.
pub fn snapshot_levels(levels: usize) -> Vec<usize> {
    if levels == 0 {
        return Vec::new();
    }
    let mut out = vec![0, (levels - 1) / 2, levels - 1];
    out.dedup();
    out
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Writes the outputs of a finished or aborted history.
pub fn write_outputs(config: &ExperimentConfig, history: &AdaptHistory) -> Result<RunOutputs, CliError> {
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let stem = config.stem();
    let csv = dir.join(format!("{stem}.csv"));
    write(&csv, &history.to_csv())?;
    let mut svgs = Vec::new();
    for level in snapshot_levels(history.steps.len()) {
        let path = dir.join(format!("{stem}_level{level}.svg"));
        write(&path, &quasivem::mesh::write_svg(&history.steps[level].mesh))?;
        svgs.push(path);
    }
    let config_path = dir.join(format!("{stem}.config"));
    write(&config_path, &config.to_text())?;
    Ok(RunOutputs { csv, svgs, config: config_path, levels: history.steps.len() })
}

/// Runs the adaptive loop and writes its outputs. A solver failure still
/// writes the levels completed before it and is then reported.
pub fn run_problem(config: &ExperimentConfig) -> Result<RunOutputs, CliError> {
    config.validate()?;
    let model = load_model(config)?;
    let mesh = initial_mesh(config, &model)?;
    let history = adapt_loop(&model, mesh, &adapt_config(config));
    let outputs = write_outputs(config, &history)?;
    match history.failure {
        Some(e) => Err(CliError::Solver(e)),
        None => Ok(outputs),
    }
}
