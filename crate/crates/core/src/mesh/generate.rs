//! Initial mesh generators: structured quadrilateral grids and
//! Lloyd-smoothed Voronoi tessellations clipped to the domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PolyMesh;
use crate::error::{Error, Result};
use crate::geometry::{self, Point, Vector};

/// Computational domains used by the built-in problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Axis-aligned rectangle `(min.x, max.x) x (min.y, max.y)`.
    Rectangle { min: Point, max: Point },
    /// `(-1, 1)^2` with the quadrant `[0, 1) x (-1, 0]` removed.
    LShape,
}

impl Domain {
    pub fn unit_square() -> Self {
        Domain::Rectangle { min: Point::new(0.0, 0.0), max: Point::new(1.0, 1.0) }
    }

    /// Counter-clockwise boundary polygon.
    pub fn polygon(&self) -> Vec<Point> {
        match *self {
            Domain::Rectangle { min, max } => vec![
                min,
                Point::new(max.x, min.y),
                max,
                Point::new(min.x, max.y),
            ],
            Domain::LShape => vec![
                Point::new(-1.0, -1.0),
                Point::new(0.0, -1.0),
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(-1.0, 1.0),
            ],
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Domain::Rectangle { min, max } => (min, max),
            Domain::LShape => (Point::new(-1.0, -1.0), Point::new(1.0, 1.0)),
        }
    }

    pub fn area(&self) -> f64 {
        geometry::signed_area(&self.polygon())
    }

    pub fn contains(&self, p: &Point) -> bool {
        let (lo, hi) = self.bounding_box();
        let inside_box = p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
        match self {
            Domain::Rectangle { .. } => inside_box,
            Domain::LShape => inside_box && !(p.x >= 0.0 && p.y <= 0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounding_box();
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(Error::InvalidArgument("domain has zero size".into()));
        }
        Ok(())
    }
}

/// Structured `nx x ny` quadrilateral grid over the domain's bounding box.
/// For the L-shape, cells inside the removed quadrant are dropped.
pub fn build_cartesian_grid(nx: usize, ny: usize, domain: &Domain) -> Result<PolyMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("grid needs at least one cell per direction".into()));
    }
    domain.validate()?;
    let (lo, hi) = domain.bounding_box();
    let coord = |i: usize, j: usize| {
        Point::new(
            lo.x + (hi.x - lo.x) * i as f64 / nx as f64,
            lo.y + (hi.y - lo.y) * j as f64 / ny as f64,
        )
    };
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = Point::from((coord(i, j).coords + coord(i + 1, j + 1).coords) * 0.5);
            if domain.contains(&c) {
                cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no grid cell lies inside the domain".into()));
    }
    // Compact away vertices of dropped cells.
    let mut map = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let v = id(i, j);
            if cells.iter().any(|c| c.contains(&v)) {
                map[v] = vertices.len();
                vertices.push(coord(i, j));
            }
        }
    }
    for c in &mut cells {
        for v in c.iter_mut() {
            *v = map[*v];
        }
    }
    PolyMesh::new(vertices, cells)
}

const MAX_ATTEMPTS: usize = 100;

/// Voronoi tessellation of `n_seeds` random seeds clipped to the domain and
/// smoothed by `lloyd_iters` Lloyd steps.
///
/// On the L-shape the seed set is kept symmetric under the reflection
/// `(x, y) -> (-y, -x)` (at most one seed on the symmetry line). Every cell of
/// a mirrored pair then lies in one convex half of the domain, which keeps
/// all cells convex at the re-entrant corner.
pub fn build_voronoi_mesh(
    n_seeds: usize,
    domain: &Domain,
    lloyd_iters: usize,
    rng_seed: u64,
) -> Result<PolyMesh> {
    if n_seeds == 0 {
        return Err(Error::InvalidArgument("at least one seed required".into()));
    }
    domain.validate()?;
    if n_seeds == 1 {
        return PolyMesh::from_polygons(&[domain.polygon()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut last_error = String::new();
    for _ in 0..MAX_ATTEMPTS {
        let mut seeds = match sample_seeds(n_seeds, domain, &mut rng) {
            Some(s) => s,
            None => {
                last_error = "could not separate coincident seeds".into();
                continue;
            }
        };
        let mut cells = None;
        for it in 0..=lloyd_iters {
            let Some(c) = voronoi_cells(&seeds, domain) else {
                cells = None;
                last_error = "degenerate Voronoi cell".into();
                break;
            };
            if it == lloyd_iters {
                cells = Some(c);
                break;
            }
            let centroids: Vec<Point> = c.iter().map(|p| geometry::centroid(p)).collect();
            seeds = symmetrize(centroids, domain);
            if has_coincident(&seeds, domain) {
                cells = None;
                last_error = "seeds collapsed during smoothing".into();
                break;
            }
        }
        let Some(cells) = cells else { continue };
        if let Some(bad) = cells.iter().position(|c| !geometry::is_convex(c)) {
            last_error = format!("cell {bad} is not convex");
            continue;
        }
        match PolyMesh::from_polygons(&cells) {
            Ok(mesh) if mesh.num_elements() == n_seeds => return Ok(mesh),
            Ok(_) => last_error = "cell count mismatch".into(),
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(Error::MeshGeneration(format!(
        "no valid Voronoi mesh after {MAX_ATTEMPTS} attempts: {last_error}"
    )))
}

fn mirror(p: &Point) -> Point {
    Point::new(-p.y, -p.x)
}

fn sample_point(domain: &Domain, rng: &mut ChaCha8Rng) -> Point {
    let (lo, hi) = domain.bounding_box();
    loop {
        let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if domain.contains(&p) {
            return p;
        }
    }
}

fn has_coincident(seeds: &[Point], domain: &Domain) -> bool {
    let (lo, hi) = domain.bounding_box();
    let tol = 1e-10 * (hi - lo).norm();
    for i in 0..seeds.len() {
        for j in i + 1..seeds.len() {
            if (seeds[i] - seeds[j]).norm() <= tol {
                return true;
            }
        }
    }
    false
}

fn sample_seeds(n: usize, domain: &Domain, rng: &mut ChaCha8Rng) -> Option<Vec<Point>> {
    let mut seeds: Vec<Point> = Vec::with_capacity(n);
    match domain {
        Domain::Rectangle { .. } => {
            for _ in 0..n {
                let mut tries = 0;
                loop {
                    let p = sample_point(domain, rng);
                    seeds.push(p);
                    if !has_coincident(&seeds, domain) {
                        break;
                    }
                    seeds.pop();
                    tries += 1;
                    if tries > MAX_ATTEMPTS {
                        return None;
                    }
                }
            }
        }
        Domain::LShape => {
            // Primary half x + y > 0, mirrored into x + y < 0.
            for _ in 0..n / 2 {
                let mut tries = 0;
                loop {
                    let p = sample_point(domain, rng);
                    let p = if p.x + p.y < 0.0 { mirror(&p) } else { p };
                    if p.x + p.y > 0.0 {
                        seeds.push(p);
                        seeds.push(mirror(&p));
                        if !has_coincident(&seeds, domain) {
                            break;
                        }
                        seeds.truncate(seeds.len() - 2);
                    }
                    tries += 1;
                    if tries > MAX_ATTEMPTS {
                        return None;
                    }
                }
            }
            if n % 2 == 1 {
                let a: f64 = rng.gen_range(0.0..1.0);
                seeds.push(Point::new(-a, a));
                if has_coincident(&seeds, domain) {
                    return None;
                }
            }
        }
    }
    Some(seeds)
}

/// Restores exact mirror symmetry after a Lloyd update.
fn symmetrize(mut seeds: Vec<Point>, domain: &Domain) -> Vec<Point> {
    if let Domain::LShape = domain {
        let pairs = seeds.len() / 2;
        for k in 0..pairs {
            seeds[2 * k + 1] = mirror(&seeds[2 * k]);
        }
        if seeds.len() % 2 == 1 {
            let p = seeds[seeds.len() - 1];
            let a = 0.5 * (p.y - p.x);
            *seeds.last_mut().unwrap() = Point::new(-a, a);
        }
    }
    seeds
}

/// Clipped Voronoi cells, or `None` if any cell degenerates.
fn voronoi_cells(seeds: &[Point], domain: &Domain) -> Option<Vec<Vec<Point>>> {
    let symmetric = matches!(domain, Domain::LShape);
    let n = seeds.len();
    let (lo, hi) = domain.bounding_box();
    let tol = 1e-12 * (hi - lo).norm();
    let mut cells: Vec<Vec<Point>> = Vec::with_capacity(n);
    for i in 0..n {
        if symmetric && i % 2 == 1 && i < 2 * (n / 2) {
            // Exact mirror image of the primary cell, reversed to stay
            // counter-clockwise.
            let mut c: Vec<Point> = cells[i - 1].iter().map(mirror).collect();
            c.reverse();
            cells.push(c);
            continue;
        }
        let mut cell = domain.polygon();
        let si = seeds[i];
        for (j, sj) in seeds.iter().enumerate() {
            if j == i {
                continue;
            }
            let normal: Vector = sj - si;
            let offset = 0.5 * (sj.coords.norm_squared() - si.coords.norm_squared());
            cell = geometry::clip_halfplane(&cell, &normal, offset);
            if cell.len() < 3 {
                return None;
            }
        }
        geometry::dedup_cycle(&mut cell, tol);
        remove_collinear(&mut cell);
        if cell.len() < 3 || geometry::signed_area(&cell) <= 0.0 {
            return None;
        }
        cells.push(cell);
    }
    Some(cells)
}

fn remove_collinear(cell: &mut Vec<Point>) {
    loop {
        let n = cell.len();
        if n <= 3 {
            return;
        }
        let sines = geometry::turn_sines(cell);
        let Some(k) = (0..n).find(|&k| {
            let a = cell[(k + n - 1) % n];
            let b = cell[k];
            let c = cell[(k + 1) % n];
            sines[k].abs() < 1e-12 && (b - a).dot(&(c - b)) > 0.0
        }) else {
            return;
        };
        cell.remove(k);
    }
}
