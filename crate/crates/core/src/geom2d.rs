//! Convex 2D polygon helpers used by the scene model, push dynamics, and
//! the scenario sampler. Polygons are CCW vertex lists in meters.

use nalgebra::{Point2, Vector2};

/// Signed area via the shoelace formula (positive for CCW).
pub fn signed_area(poly: &[Point2<f64>]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

pub fn area(poly: &[Point2<f64>]) -> f64 {
    signed_area(poly).abs()
}

/// True when the vertex list is convex and wound CCW (collinear runs allowed).
pub fn is_convex_ccw(poly: &[Point2<f64>]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if cross < -1e-12 {
            return false;
        }
    }
    signed_area(poly) > 0.0
}

/// Point-in-convex-polygon test; boundary counts as inside.
pub fn contains_point(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross < -1e-12 {
            return false;
        }
    }
    true
}

/// Half-open membership: interior points are in; boundary points count
/// only on edges whose outward normal points toward negative x (or, for
/// vertical normals, negative y). For axis-aligned rectangles this is the
/// `[min, max)` convention, so abutting polygons tile without overlap.
pub fn contains_point_half_open(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    const TOL: f64 = 1e-12;
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross < -TOL {
            return false;
        }
        if cross.abs() <= TOL {
            // On this edge's line: outward normal of a CCW edge is to its
            // right.
            let nx = b.y - a.y;
            let ny = -(b.x - a.x);
            let closed_side = nx < -TOL || (nx.abs() <= TOL && ny < -TOL);
            if !closed_side {
                return false;
            }
        }
    }
    true
}

/// Strict interior test (no boundary).
pub fn contains_point_strict(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    const TOL: f64 = 1e-12;
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross <= TOL {
            return false;
        }
    }
    true
}

/// Clip a convex polygon against the half-plane left of the directed edge
/// `(a, b)` (Sutherland-Hodgman step).
fn clip_half_plane(
    poly: &[Point2<f64>],
    a: Point2<f64>,
    b: Point2<f64>,
) -> Vec<Point2<f64>> {
    let inside = |p: Point2<f64>| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0;
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let cur = poly[i];
        let nxt = poly[(i + 1) % n];
        let cur_in = inside(cur);
        let nxt_in = inside(nxt);
        if cur_in {
            out.push(cur);
        }
        if cur_in != nxt_in {
            // Edge crosses the clip line; add the intersection point.
            let d = Vector2::new(nxt.x - cur.x, nxt.y - cur.y);
            let e = Vector2::new(b.x - a.x, b.y - a.y);
            let denom = e.x * d.y - e.y * d.x;
            if denom.abs() > 1e-18 {
                let t = (e.x * (a.y - cur.y) - e.y * (a.x - cur.x)) / denom;
                out.push(Point2::new(cur.x + t * d.x, cur.y + t * d.y));
            }
        }
    }
    out
}

/// Intersection of two convex polygons (may be empty or degenerate).
pub fn intersect_convex(p: &[Point2<f64>], q: &[Point2<f64>]) -> Vec<Point2<f64>> {
    if p.len() < 3 || q.len() < 3 {
        return Vec::new();
    }
    let mut cur = p.to_vec();
    for i in 0..q.len() {
        if cur.len() < 3 {
            return Vec::new();
        }
        cur = clip_half_plane(&cur, q[i], q[(i + 1) % q.len()]);
    }
    cur
}

/// Area of the intersection of two convex polygons.
pub fn intersection_area(p: &[Point2<f64>], q: &[Point2<f64>]) -> f64 {
    area(&intersect_convex(p, q))
}

/// Axis-aligned bounding box as `(min, max)`.
pub fn aabb(poly: &[Point2<f64>]) -> (Point2<f64>, Point2<f64>) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Rotate by `yaw` about the origin, then translate.
pub fn transform(poly: &[Point2<f64>], yaw: f64, translation: Vector2<f64>) -> Vec<Point2<f64>> {
    let (s, c) = yaw.sin_cos();
    poly.iter()
        .map(|p| {
            Point2::new(
                c * p.x - s * p.y + translation.x,
                s * p.x + c * p.y + translation.y,
            )
        })
        .collect()
}

pub fn translate(poly: &[Point2<f64>], offset: Vector2<f64>) -> Vec<Point2<f64>> {
    poly.iter().map(|p| p + offset).collect()
}

/// Centroid of a convex polygon (area-weighted).
pub fn centroid(poly: &[Point2<f64>]) -> Point2<f64> {
    let a = signed_area(poly);
    if a.abs() < 1e-15 {
        // Degenerate: fall back to the vertex mean.
        let n = poly.len() as f64;
        let sum = poly.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords);
        return Point2::from(sum / n);
    }
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let w = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point2::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// Axis-aligned rectangle as a CCW polygon.
pub fn rect(min: Point2<f64>, max: Point2<f64>) -> Vec<Point2<f64>> {
    vec![
        Point2::new(min.x, min.y),
        Point2::new(max.x, min.y),
        Point2::new(max.x, max.y),
        Point2::new(min.x, max.y),
    ]
}
