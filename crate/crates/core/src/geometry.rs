//! Planar polygon helpers shared by the mesh generators, refinement and
//! quadrature.

use nalgebra::{Point2, Vector2};

pub type Point = Point2<f64>;
pub type Vector = Vector2<f64>;

#[inline]
pub fn cross(a: &Vector, b: &Vector) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Shoelace formula; positive for counter-clockwise cycles.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut twice = 0.0;
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice
}

/// Area centroid of a simple polygon.
pub fn centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    // Shift to the first vertex to limit cancellation on small polygons far
    // from the origin.
    let o = poly[0];
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = poly[i] - o;
        let q = poly[(i + 1) % n] - o;
        let w = p.x * q.y - q.x * p.y;
        a += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    if a.abs() <= f64::MIN_POSITIVE {
        let mut s = Vector::zeros();
        for p in poly {
            s += p.coords;
        }
        return Point::from(s / n as f64);
    }
    Point::new(o.x + cx / (3.0 * a), o.y + cy / (3.0 * a))
}

/// Largest vertex-to-vertex distance.
pub fn diameter(poly: &[Point]) -> f64 {
    let mut d2: f64 = 0.0;
    for i in 0..poly.len() {
        for j in i + 1..poly.len() {
            d2 = d2.max((poly[i] - poly[j]).norm_squared());
        }
    }
    d2.sqrt()
}

/// Sine of the turning angle at every vertex of the cycle (positive for a
/// left turn).
pub fn turn_sines(poly: &[Point]) -> Vec<f64> {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[(i + n - 1) % n];
            let b = poly[i];
            let c = poly[(i + 1) % n];
            let u = b - a;
            let v = c - b;
            let denom = u.norm() * v.norm();
            if denom == 0.0 {
                0.0
            } else {
                cross(&u, &v) / denom
            }
        })
        .collect()
}

/// Tolerance on the sine of the turning angle below which a vertex counts as
/// collinear with its neighbours.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Flags vertices where the boundary changes direction. Collinear vertices
/// (hanging nodes) are not corners.
pub fn corner_flags(poly: &[Point]) -> Vec<bool> {
    let n = poly.len();
    let sines = turn_sines(poly);
    (0..n)
        .map(|i| {
            if sines[i].abs() > COLLINEAR_TOL {
                return true;
            }
            // A reversal (spike) is a corner as well.
            let a = poly[(i + n - 1) % n];
            let b = poly[i];
            let c = poly[(i + 1) % n];
            (b - a).dot(&(c - b)) < 0.0
        })
        .collect()
}

/// Convex with counter-clockwise orientation; collinear vertices allowed.
pub fn is_convex(poly: &[Point]) -> bool {
    if poly.len() < 3 || signed_area(poly) <= 0.0 {
        return false;
    }
    let n = poly.len();
    for (i, s) in turn_sines(poly).into_iter().enumerate() {
        if s < -COLLINEAR_TOL {
            return false;
        }
        let a = poly[(i + n - 1) % n];
        let b = poly[i];
        let c = poly[(i + 1) % n];
        if s.abs() <= COLLINEAR_TOL && (b - a).dot(&(c - b)) < 0.0 {
            return false;
        }
    }
    true
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    cross(&(b - a), &(c - a))
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: &Point, b: &Point, c: &Point, d: f64| {
        d == 0.0
            && c.x >= a.x.min(b.x)
            && c.x <= a.x.max(b.x)
            && c.y >= a.y.min(b.y)
            && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// No two non-adjacent edges intersect and no vertex repeats.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if poly[i] == poly[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let a1 = poly[i];
        let a2 = poly[(i + 1) % n];
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let b1 = poly[j];
            let b2 = poly[(j + 1) % n];
            if segments_intersect(&a1, &a2, &b1, &b2) {
                return false;
            }
        }
    }
    true
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Clips a polygon to the half-plane `normal . x <= offset`
/// (Sutherland-Hodgman step).
pub fn clip_halfplane(poly: &[Point], normal: &Vector, offset: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = normal.dot(&p.coords) - offset;
        let dq = normal.dot(&q.coords) - offset;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Removes consecutive points closer than `tol`.
pub fn dedup_cycle(poly: &mut Vec<Point>, tol: f64) {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly.iter() {
        if out.last().is_none_or(|q| (p - q).norm() > tol) {
            out.push(*p);
        }
    }
    while out.len() > 1 && (out[0] - out[out.len() - 1]).norm() <= tol {
        out.pop();
    }
    *poly = out;
}
