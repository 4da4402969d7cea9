//! Quick invariant self-checks run by `quasivem check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasivem::estimator::h1_error;
use quasivem::{
    build_cartesian_grid, build_voronoi_mesh, dorfler_mark, estimate, solve_nonlinear, Coefficient, Domain,
    EstimatorOptions, ManufacturedProblem, NonlinearModel, Point, Solution, SolverOptions, VemSpace,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    fn from_result(name: &str, result: quasivem::Result<(bool, String)>) -> Self {
        match result {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, e.to_string()),
        }
    }
}

fn model_bounds() -> CheckResult {
    for id in 1..=3 {
        let p = ManufacturedProblem::by_id(id).unwrap();
        if let Err(e) = quasivem::model::check_model(&p, &p.domain, 1) {
            return CheckResult::new("model bounds", false, format!("problem {id}: {e}"));
        }
    }
    CheckResult::new("model bounds", true, "problems 1-3 monotone within their bounds".into())
}

fn random_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Point {
    let (lo, hi) = domain.bounding_box();
    loop {
        let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if domain.contains(&p) && p.coords.norm() > 1e-2 {
            return p;
        }
    }
}

/// `-div(μ ∇u) - f` by fourth-order differences of the exact flux.
fn source_residual(p: &ManufacturedProblem, source: impl Fn(&Point) -> f64, x: &Point) -> f64 {
    let h = 1e-4;
    let d = |f: &dyn Fn(f64) -> f64, s: f64| (-f(s + 2.0 * h) + 8.0 * f(s + h) - 8.0 * f(s - h) + f(s - 2.0 * h)) / (12.0 * h);
    let div = d(&|t| p.flux(&Point::new(t, x.y)).x, x.x) + d(&|t| p.flux(&Point::new(x.x, t)).y, x.y);
    let f = source(x);
    (-div - f).abs() / f.abs().max(1.0)
}

fn manufactured_sources() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for id in 1..=3 {
        let p = ManufacturedProblem::by_id(id).unwrap();
        for _ in 0..100 {
            worst = worst.max(source_residual(&p, |x| p.source(x), &random_point(&p.domain, &mut rng)));
        }
    }
    CheckResult::new("manufactured sources", worst <= 1e-5, format!("max relative PDE residual {worst:.2e}"))
}

fn patch_test() -> CheckResult {
    CheckResult::from_result(
        "patch test",
        (|| {
            let mut worst: (f64, f64) = (0.0, 0.0);
            let meshes = [
                (build_cartesian_grid(4, 4, &Domain::LShape)?, Domain::LShape),
                (build_voronoi_mesh(16, &Domain::unit_square(), 50, 42)?, Domain::unit_square()),
            ];
            for (mesh, domain) in &meshes {
                for order in 1..=3u32 {
                    let solution = Solution::Polynomial(match order {
                        1 => vec![(1.0, 0, 0), (2.0, 1, 0), (-1.0, 0, 1)],
                        2 => vec![(1.0, 2, 0), (-1.0, 0, 2), (0.5, 1, 1), (1.0, 1, 0)],
                        _ => vec![(1.0, 3, 0), (-3.0, 1, 2), (0.5, 2, 0), (1.0, 0, 1)],
                    });
                    let model = ManufacturedProblem::new(Coefficient::Constant(1.0), solution, *domain);
                    let space = VemSpace::new(mesh, order as usize)?;
                    let (u, _) = solve_nonlinear(mesh, &space, &model, &SolverOptions::default())?;
                    let err = h1_error(mesh, &space, &model, &u)?;
                    let est = estimate(mesh, &space, &model, &u, &EstimatorOptions::default())?.total;
                    worst = (worst.0.max(err), worst.1.max(est));
                }
            }
            Ok((worst.0 <= 1e-8 && worst.1 <= 1e-7, format!("max error {:.2e}, max estimate {:.2e}", worst.0, worst.1)))
        })(),
    )
}

fn marking() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.gen_range(1..=50);
        let ind: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let m = match dorfler_mark(&ind, 0.4) {
            Ok(m) => m,
            Err(e) => return CheckResult::new("Dörfler marking", false, e.to_string()),
        };
        let total: f64 = ind.iter().sum();
        let marked: f64 = m.elements.iter().map(|&i| ind[i]).sum();
        let without: f64 = m.elements[..m.elements.len() - 1].iter().map(|&i| ind[i]).sum();
        let target = 0.16 * total * (1.0 - quasivem::adapt::MARKING_SLACK);
        if marked < target || without >= target {
            return CheckResult::new("Dörfler marking", false, format!("non-minimal marking for {ind:?}"));
        }
    }
    CheckResult::new("Dörfler marking", true, "200 random vectors marked minimally".into())
}

fn kacanov() -> CheckResult {
    CheckResult::from_result(
        "Kačanov contraction",
        (|| {
            let p = ManufacturedProblem::problem1();
            let mesh = build_cartesian_grid(4, 4, &p.domain)?;
            let space = VemSpace::new(&mesh, 1)?;
            let (_, trace) = solve_nonlinear(&mesh, &space, &p, &SolverOptions::default())?;
            let worst = trace.contraction_ratios().iter().skip(1).copied().fold(0.0, f64::max);
            Ok((worst <= 0.9, format!("{} iterations, max ratio {worst:.3}", trace.iterations())))
        })(),
    )
}

/// Runs every check.
pub fn run_checks() -> Vec<CheckResult> {
    vec![model_bounds(), manufactured_sources(), patch_test(), marking(), kacanov()]
}
