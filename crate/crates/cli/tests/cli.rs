//! End-to-end checks of the `quasivem` binary and its exit codes.

use std::fs;
use std::process::{Command, Output};

fn quasivem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasivem")).args(args).output().unwrap()
}

#[test]
fn run_writes_csv_svgs_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("p1.config");
    fs::write(&config, format!("problem = 1\nrefinements = 4\noutput = {}\n", out.display())).unwrap();
    let result = quasivem(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    let csv = fs::read_to_string(out.join("problem1_quads_p1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    for level in [0, 2, 4] {
        assert!(out.join(format!("problem1_quads_p1_level{level}.svg")).exists());
    }
    assert!(out.join("problem1_quads_p1.config").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.config");
    fs::write(&config, "problem = 7\n").unwrap();
    let result = quasivem(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("unknown problem id 7"));
    let missing = dir.path().join("missing.config");
    assert_eq!(quasivem(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let config = dir.path().join("c.config");
    fs::write(&config, format!("refinements = 0\noutput = {}\n", blocker.join("sub").display())).unwrap();
    assert_eq!(quasivem(&["run", "--config", config.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.config");
    fs::write(&config, format!("max_iterations = 1\noutput = {}\n", dir.path().join("out").display())).unwrap();
    assert_eq!(quasivem(&["run", "--config", config.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn custom_model_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    fs::write(&model, "coefficient = rational 2 1\nsolution = polynomial 1 2 0, -1 0 2\n").unwrap();
    let config = dir.path().join("c.config");
    let out = dir.path().join("out");
    fs::write(&config, format!("model_file = {}\nrefinements = 2\noutput = {}\n", model.display(), out.display())).unwrap();
    let result = quasivem(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(out.join("custom_quads_p1.csv").exists());
}

#[test]
fn mesh_command_writes_voronoi_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.txt");
    let svg = dir.path().join("mesh.svg");
    let result = quasivem(&[
        "mesh", "--kind", "voronoi", "--cells", "16", "--seed", "42",
        "--out", path.to_str().unwrap(), "--svg", svg.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let mesh = quasivem::mesh::read_mesh(std::io::BufReader::new(fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(mesh.num_elements(), 16);
    assert_eq!(fs::read_to_string(&svg).unwrap().matches("<polygon").count(), 16);
}

#[test]
fn check_command_passes() {
    let result = quasivem(&["check"]);
    assert_eq!(result.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}
