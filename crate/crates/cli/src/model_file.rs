//! Custom manufactured problems read from a `key = value` file.
//!
//! ```text
//! coefficient = rational 2 1        # μ = 2 + 1/(1+t²)
//! solution = polynomial 1 2 0, -1 0 2   # x² - y²
//! domain = square
//! ```
//!
//! Coefficients: `constant c`, `rational a b`, `exponential a b`,
//! `affine c0 cx cy`. Solutions: `sine`, `corner`, `corner_gaussian`,
//! `polynomial c a b, ...` for `Σ c xᵃ yᵇ`. Domains: `square`, `lshape`,
//! `rectangle x0 y0 x1 y1`.

use quasivem::{Coefficient, Domain, ManufacturedProblem, Point, Solution};

use crate::error::CliError;

fn numbers(line: usize, args: &[&str], count: usize, what: &str) -> Result<Vec<f64>, CliError> {
    if args.len() != count {
        return Err(CliError::Config { line, message: format!("{what} expects {count} numbers") });
    }
    args.iter()
        .map(|a| a.parse().map_err(|_| CliError::Config { line, message: format!("invalid number `{a}`") }))
        .collect()
}

fn parse_coefficient(line: usize, value: &str) -> Result<Coefficient, CliError> {
    let words: Vec<&str> = value.split_whitespace().collect();
    let (kind, args) = words.split_first().ok_or_else(|| CliError::Config { line, message: "empty coefficient".into() })?;
    Ok(match *kind {
        "constant" => Coefficient::Constant(numbers(line, args, 1, kind)?[0]),
        "rational" => {
            let v = numbers(line, args, 2, kind)?;
            Coefficient::Rational { a: v[0], b: v[1] }
        }
        "exponential" => {
            let v = numbers(line, args, 2, kind)?;
            Coefficient::Exponential { a: v[0], b: v[1] }
        }
        "affine" => {
            let v = numbers(line, args, 3, kind)?;
            Coefficient::Affine { c0: v[0], cx: v[1], cy: v[2] }
        }
        _ => return Err(CliError::Config { line, message: format!("unknown coefficient `{kind}`") }),
    })
}

fn parse_solution(line: usize, value: &str) -> Result<Solution, CliError> {
    let value = value.trim();
    match value {
        "sine" => return Ok(Solution::Sine),
        "corner" => return Ok(Solution::Corner),
        "corner_gaussian" => return Ok(Solution::CornerGaussian),
        _ => {}
    }
    let Some(rest) = value.strip_prefix("polynomial") else {
        return Err(CliError::Config { line, message: format!("unknown solution `{value}`") });
    };
    let mut terms = Vec::new();
    for term in rest.split(',') {
        let words: Vec<&str> = term.split_whitespace().collect();
        if words.len() != 3 {
            return Err(CliError::Config { line, message: format!("polynomial term `{}` needs `c a b`", term.trim()) });
        }
        let bad = |w: &str| CliError::Config { line, message: format!("invalid polynomial entry `{w}`") };
        let c: f64 = words[0].parse().map_err(|_| bad(words[0]))?;
        let a: u32 = words[1].parse().map_err(|_| bad(words[1]))?;
        let b: u32 = words[2].parse().map_err(|_| bad(words[2]))?;
        terms.push((c, a, b));
    }
    Ok(Solution::Polynomial(terms))
}

fn parse_domain(line: usize, value: &str) -> Result<Domain, CliError> {
    let words: Vec<&str> = value.split_whitespace().collect();
    match words.as_slice() {
        ["square"] => Ok(Domain::unit_square()),
        ["lshape"] => Ok(Domain::LShape),
        ["rectangle", args @ ..] => {
            let v = numbers(line, args, 4, "rectangle")?;
            if !(v[2] > v[0] && v[3] > v[1]) {
                return Err(CliError::Config { line, message: "rectangle must have positive extent".into() });
            }
            Ok(Domain::Rectangle { min: Point::new(v[0], v[1]), max: Point::new(v[2], v[3]) })
        }
        _ => Err(CliError::Config { line, message: format!("unknown domain `{value}`") }),
    }
}

/// Parses a model file; the coefficient bounds are checked by sampling.
pub fn parse_model(text: &str) -> Result<ManufacturedProblem, CliError> {
    let mut coefficient = None;
    let mut solution = None;
    let mut domain = Domain::unit_square();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Config { line, message: format!("expected `key = value`, got `{content}`") })?;
        match key.trim() {
            "coefficient" => coefficient = Some(parse_coefficient(line, value)?),
            "solution" => solution = Some(parse_solution(line, value)?),
            "domain" => domain = parse_domain(line, value)?,
            other => return Err(CliError::Config { line, message: format!("unknown model key `{other}`") }),
        }
    }
    let coefficient = coefficient.ok_or_else(|| CliError::Config { line: 0, message: "model lacks `coefficient`".into() })?;
    let solution = solution.ok_or_else(|| CliError::Config { line: 0, message: "model lacks `solution`".into() })?;
    let model = ManufacturedProblem::new(coefficient, solution, domain);
    quasivem::model::check_model(&model, &model.domain, 0)
        .map_err(|e| CliError::Config { line: 0, message: e.to_string() })?;
    Ok(model)
}
