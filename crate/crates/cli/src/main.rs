//! `quasivem` command-line interface.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use quasivem::{build_cartesian_grid, build_voronoi_mesh, Domain};
use quasivem_cli::check::run_checks;
use quasivem_cli::run::run_problem;
use quasivem_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "quasivem", version, about = "Adaptive virtual elements for quasilinear elliptic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshKind {
    Quads,
    Voronoi,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainKind {
    Square,
    Lshape,
}

#[derive(Subcommand)]
enum Command {
    /// Run an adaptive experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate an initial mesh.
    Mesh {
        #[arg(long, value_enum, default_value = "quads")]
        kind: MeshKind,
        /// Cells per side for quads, number of cells for Voronoi meshes.
        #[arg(long, default_value_t = 4)]
        cells: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "square")]
        domain: DomainKind,
        #[arg(long, default_value_t = 50)]
        lloyd_iterations: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the built-in self-checks.
    Check,
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let text = fs::read_to_string(&config).map_err(|e| CliError::Config {
                line: 0,
                message: format!("cannot read {}: {e}", config.display()),
            })?;
            let config = ExperimentConfig::parse(&text)?;
            let out = run_problem(&config)?;
            println!("{} levels written to {}", out.levels, out.csv.display());
            Ok(())
        }
        Command::Mesh { kind, cells, seed, domain, lloyd_iterations, out, svg } => {
            if cells == 0 {
                return Err(CliError::Config { line: 0, message: "cells must be positive".into() });
            }
            let domain = match domain {
                DomainKind::Square => Domain::unit_square(),
                DomainKind::Lshape => Domain::LShape,
            };
            let mesh = match kind {
                MeshKind::Quads => build_cartesian_grid(cells, cells, &domain)?,
                MeshKind::Voronoi => build_voronoi_mesh(cells, &domain, lloyd_iterations, seed)?,
            };
            let file = fs::File::create(&out).map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
            quasivem::mesh::write_mesh(&mesh, std::io::BufWriter::new(file))
                .map_err(|e| CliError::Output(format!("{}: {e}", out.display())))?;
            if let Some(svg) = svg {
                fs::write(&svg, quasivem::mesh::write_svg(&mesh))
                    .map_err(|e| CliError::Output(format!("{}: {e}", svg.display())))?;
            }
            println!("{} elements, {} vertices written to {}", mesh.num_elements(), mesh.num_vertices(), out.display());
            Ok(())
        }
        Command::Check => {
            let results = run_checks();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Check(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
