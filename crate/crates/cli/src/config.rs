//! Experiment configuration in a flat `key = value` format.
//!
//! ```text
//! # Problem 2 on quadrilaterals
//! problem = 2
//! grid = quads
//! order = 1
//! theta = 0.4
//! refinements = 20
//! seed = 42
//! output = results
//! ```
//!
//! Blank lines and text after `#` are ignored. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use quasivem::{EdgeAttribution, StabilizationMode};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Quads,
    Voronoi,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Quads => "quads",
            Self::Voronoi => "voronoi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quads" => Some(Self::Quads),
            "voronoi" => Some(Self::Voronoi),
            _ => None,
        }
    }
}

/// Where the model comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    /// One of the built-in problems 1, 2 or 3.
    Builtin(u32),
    /// A model file, see [`crate::model_file`].
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub grid: GridKind,
    pub order: usize,
    pub theta: f64,
    pub refinements: usize,
    pub dof_budget: usize,
    pub seed: u64,
    /// Quads: cells per side. Voronoi: number of cells.
    pub cells: usize,
    pub lloyd_iterations: usize,
    pub stabilization: StabilizationMode,
    pub attribution: EdgeAttribution,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Builtin(1),
            grid: GridKind::Quads,
            order: 1,
            theta: 0.4,
            refinements: 20,
            dof_budget: 100_000,
            seed: 42,
            cells: 4,
            lloyd_iterations: 50,
            stabilization: StabilizationMode::Average,
            attribution: EdgeAttribution::Full,
            tolerance: 1e-10,
            max_iterations: 100,
            output: PathBuf::from("results"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config { line, message: format!("invalid value `{value}` for `{key}`") })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        let mut cells_given = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config { line, message: format!("expected `key = value`, got `{content}`") })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "problem" => config.problem = ProblemSource::Builtin(parse_value(line, key, value)?),
                "model_file" => config.problem = ProblemSource::File(PathBuf::from(value)),
                "grid" => {
                    config.grid = GridKind::parse(value).ok_or_else(|| CliError::Config {
                        line,
                        message: format!("unknown grid `{value}`, expected quads or voronoi"),
                    })?
                }
                "order" => config.order = parse_value(line, key, value)?,
                "theta" => config.theta = parse_value(line, key, value)?,
                "refinements" => config.refinements = parse_value(line, key, value)?,
                "dof_budget" => config.dof_budget = parse_value(line, key, value)?,
                "seed" => config.seed = parse_value(line, key, value)?,
                "cells" => {
                    config.cells = parse_value(line, key, value)?;
                    cells_given = true;
                }
                "lloyd_iterations" => config.lloyd_iterations = parse_value(line, key, value)?,
                "stabilization" => {
                    config.stabilization = match value {
                        "average" => StabilizationMode::Average,
                        "linear" => StabilizationMode::Linear,
                        _ => {
                            return Err(CliError::Config {
                                line,
                                message: format!("unknown stabilization `{value}`, expected average or linear"),
                            })
                        }
                    }
                }
                "attribution" => {
                    config.attribution = match value {
                        "full" => EdgeAttribution::Full,
                        "half" => EdgeAttribution::Half,
                        _ => {
                            return Err(CliError::Config {
                                line,
                                message: format!("unknown attribution `{value}`, expected full or half"),
                            })
                        }
                    }
                }
                "tolerance" => config.tolerance = parse_value(line, key, value)?,
                "max_iterations" => config.max_iterations = parse_value(line, key, value)?,
                "output" => config.output = PathBuf::from(value),
                _ => return Err(CliError::Config { line, message: format!("unknown key `{key}`") }),
            }
        }
        if !cells_given && config.grid == GridKind::Voronoi {
            config.cells = 16;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |message: String| Err(CliError::Config { line: 0, message });
        if let ProblemSource::Builtin(id) = self.problem {
            if !(1..=3).contains(&id) {
                return invalid(format!("unknown problem id {id}, expected 1, 2 or 3"));
            }
        }
        if !(1..=3).contains(&self.order) {
            return invalid(format!("order must be 1, 2 or 3, got {}", self.order));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return invalid(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if self.cells == 0 {
            return invalid("cells must be positive".into());
        }
        if !(self.tolerance > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return invalid("max_iterations must be positive".into());
        }
        Ok(())
    }

    /// Serialisation that [`ExperimentConfig::parse`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.problem {
            ProblemSource::Builtin(id) => writeln!(out, "problem = {id}"),
            ProblemSource::File(p) => writeln!(out, "model_file = {}", p.display()),
        }
        .unwrap();
        let stab = match self.stabilization {
            StabilizationMode::Average => "average",
            StabilizationMode::Linear => "linear",
        };
        let attribution = match self.attribution {
            EdgeAttribution::Full => "full",
            EdgeAttribution::Half => "half",
        };
        writeln!(out, "grid = {}", self.grid.name()).unwrap();
        writeln!(out, "order = {}", self.order).unwrap();
        writeln!(out, "theta = {}", self.theta).unwrap();
        writeln!(out, "refinements = {}", self.refinements).unwrap();
        writeln!(out, "dof_budget = {}", self.dof_budget).unwrap();
        writeln!(out, "seed = {}", self.seed).unwrap();
        writeln!(out, "cells = {}", self.cells).unwrap();
        writeln!(out, "lloyd_iterations = {}", self.lloyd_iterations).unwrap();
        writeln!(out, "stabilization = {stab}").unwrap();
        writeln!(out, "attribution = {attribution}").unwrap();
        writeln!(out, "tolerance = {:e}", self.tolerance).unwrap();
        writeln!(out, "max_iterations = {}", self.max_iterations).unwrap();
        writeln!(out, "output = {}", self.output.display()).unwrap();
        out
    }

    /// Stem shared by the output files, e.g. `problem2_quads_p1`.
    pub fn stem(&self) -> String {
        let name = match self.problem {
            ProblemSource::Builtin(id) => format!("problem{id}"),
            ProblemSource::File(_) => "custom".to_string(),
        };
        format!("{name}_{}_p{}", self.grid.name(), self.order)
    }
}
