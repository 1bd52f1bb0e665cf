//! Quasi-static, translation-only push dynamics with a recursive contact
//! cascade. First-contact gaps are located by a stepped sweep of the plate
//! (half a cell per step) refined by binary search; displacements then
//! propagate through the contact chain, truncated where a wall blocks it.

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::geom2d;
use crate::push::{plate_polygon, PushAction};
use crate::scene::{Scene, OVERLAP_TOL};

/// Binary-search resolution for first contact, meters.
const CONTACT_RESOLUTION: f64 = 1e-6;

/// Apply a push to the scene, returning the new configuration.
///
/// Objects contacted by the plate translate along the push direction;
/// translated objects push the objects they contact in turn. When any
/// chain member reaches a wall the whole chain stops and the remaining
/// plate travel is discarded.
pub fn apply_push(scene: &Scene, push: &PushAction) -> Result<Scene> {
    let start = push.start_xy();
    for (n, obj) in scene.objects.iter().enumerate() {
        if geom2d::contains_point_strict(&obj.world_footprint(), start) {
            return Err(Error::InfeasiblePush(format!(
                "push start {start} lies inside object {n}"
            )));
        }
    }
    let displacements = push_displacements(scene, start, push.direction, push.distance);
    let mut out = scene.clone();
    for (obj, d) in out.objects.iter_mut().zip(&displacements) {
        if *d > 0.0 {
            obj.position += push.direction * *d;
        }
    }
    Ok(out)
}

/// Per-object displacement along `dir` for a plate starting at `start`
/// traveling `distance`. Exposed at this granularity so the identity of a
/// zero-distance push and cascade bounds can be checked directly.
pub fn push_displacements(
    scene: &Scene,
    start: Point2<f64>,
    dir: Vector2<f64>,
    distance: f64,
) -> Vec<f64> {
    let n = scene.objects.len();
    if n == 0 || distance <= 0.0 {
        return vec![0.0; n];
    }
    let footprints: Vec<Vec<Point2<f64>>> =
        scene.objects.iter().map(|o| o.world_footprint()).collect();
    let step = scene.spec.cell_size / 2.0;

    // First-contact travel from the plate to each object.
    let plate0 = plate_polygon(start, dir, 0.0);
    let g_plate: Vec<f64> = footprints
        .iter()
        .map(|fp| first_contact(&plate0, fp, dir, distance, step))
        .collect();

    // Pairwise first-contact gaps between objects (relative travel).
    let mut gap = vec![vec![f64::INFINITY; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                gap[a][b] = first_contact(&footprints[a], &footprints[b], dir, distance, step);
            }
        }
    }

    // Travel each object can absorb before its chain hits a wall.
    let wall_free: Vec<f64> = footprints
        .iter()
        .map(|fp| wall_travel(scene, fp, dir))
        .collect();
    let mut avail = vec![f64::NAN; n];
    let mut visiting = vec![false; n];
    for i in 0..n {
        available_travel(i, &gap, &wall_free, &mut avail, &mut visiting, distance);
    }

    // Plate travel truncated by the tightest blocked chain.
    let mut plate_travel = distance;
    for i in 0..n {
        if g_plate[i].is_finite() {
            plate_travel = plate_travel.min(g_plate[i] + avail[i]);
        }
    }

    // Displacements: relax until the contact chain is consistent. All
    // motion shares one direction, so values only grow and the loop
    // settles in at most `n` passes.
    let mut disp = vec![0.0; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            let mut d = if g_plate[i].is_finite() {
                (plate_travel - g_plate[i]).max(0.0)
            } else {
                0.0
            };
            for j in 0..n {
                if j != i && gap[j][i].is_finite() {
                    d = d.max(disp[j] - gap[j][i]);
                }
            }
            let d = d.min(wall_free[i]).max(0.0);
            if d > disp[i] + 1e-12 {
                disp[i] = d;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    disp
}

/// Travel after which `moving` (translated along `dir`) first overlaps
/// `fixed`, found by stepping then binary search; infinite when no contact
/// occurs within `limit`.
fn first_contact(
    moving: &[Point2<f64>],
    fixed: &[Point2<f64>],
    dir: Vector2<f64>,
    limit: f64,
    step: f64,
) -> f64 {
    let overlaps = |s: f64| {
        let moved = geom2d::translate(moving, dir * s);
        geom2d::intersection_area(&moved, fixed) > OVERLAP_TOL
    };
    if overlaps(0.0) {
        return 0.0;
    }
    let mut prev = 0.0;
    let mut s = step;
    let hi_limit = limit + step;
    let mut hit = None;
    while s <= hi_limit {
        if overlaps(s) {
            hit = Some((prev, s));
            break;
        }
        prev = s;
        s += step;
    }
    let (mut lo, mut hi) = match hit {
        Some(bounds) => bounds,
        None => return f64::INFINITY,
    };
    while hi - lo > CONTACT_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if overlaps(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Exact travel along `dir` before the footprint leaves the walls.
fn wall_travel(scene: &Scene, footprint: &[Point2<f64>], dir: Vector2<f64>) -> f64 {
    let mut limit = f64::INFINITY;
    for p in footprint {
        for axis in 0..2 {
            let d = dir[axis];
            if d > 1e-15 {
                let hi = if axis == 0 { scene.walls.max.x } else { scene.walls.max.y };
                limit = limit.min((hi - p[axis]) / d);
            } else if d < -1e-15 {
                let lo = if axis == 0 { scene.walls.min.x } else { scene.walls.min.y };
                limit = limit.min((p[axis] - lo) / -d);
            }
        }
    }
    limit.max(0.0)
}

/// Travel object `i` can make before its downstream chain is blocked:
/// bounded by its own wall clearance and, through each contact gap, by the
/// object it would push.
fn available_travel(
    i: usize,
    gap: &[Vec<f64>],
    wall_free: &[f64],
    avail: &mut [f64],
    visiting: &mut [bool],
    cap: f64,
) -> f64 {
    if !avail[i].is_nan() {
        return avail[i];
    }
    if visiting[i] {
        // Contact graphs along one direction are acyclic; guard anyway.
        return wall_free[i];
    }
    visiting[i] = true;
    let mut a = wall_free[i];
    for j in 0..gap[i].len() {
        if j != i && gap[i][j].is_finite() && gap[i][j] <= cap {
            let down = available_travel(j, gap, wall_free, avail, visiting, cap);
            a = a.min(gap[i][j] + down);
        }
    }
    visiting[i] = false;
    avail[i] = a;
    a
}
