//! Push actions: the gripper-plate geometry, belief-side frontier
//! extraction, and feasible candidate sampling.

use nalgebra::{Point2, Point3, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::EvidentialBelief;
use crate::error::{Error, Result};
use crate::geom2d;
use crate::grid::GridSpec;

/// Width of the pusher plate (gripper), meters.
pub const GRIPPER_WIDTH: f64 = 0.08;
/// Thickness of the pusher plate along the push direction, meters.
pub const PLATE_THICKNESS: f64 = 0.01;
/// Vertical clearance added above the push line when voxelizing the sweep.
pub const PLATE_TOP_MARGIN: f64 = 0.02;

pub const MIN_PUSH_DISTANCE: f64 = 0.05;
pub const MAX_PUSH_DISTANCE: f64 = 0.15;

/// A straight horizontal push: the plate's leading face starts at `start`
/// and travels `distance` meters along `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: Point3<f64>,
    /// Unit horizontal direction.
    pub direction: Vector2<f64>,
    pub distance: f64,
    /// Height of the push line above the workspace floor.
    pub push_height: f64,
    /// Voxels covered by the plate sweep (derived).
    pub swept: Vec<[usize; 3]>,
}

impl PushAction {
    pub fn new(
        spec: &GridSpec,
        start: Point3<f64>,
        direction: Vector2<f64>,
        distance: f64,
    ) -> Result<Self> {
        let norm = direction.norm();
        if norm < 1e-12 || !norm.is_finite() {
            return Err(Error::InfeasiblePush("zero push direction".into()));
        }
        if !(MIN_PUSH_DISTANCE..=MAX_PUSH_DISTANCE).contains(&distance) {
            return Err(Error::InfeasiblePush(format!(
                "distance {distance} outside [{MIN_PUSH_DISTANCE}, {MAX_PUSH_DISTANCE}]"
            )));
        }
        let lo = spec.origin;
        let hi = spec.max_corner();
        let inside = (0..3).all(|a| start[a] >= lo[a] && start[a] <= hi[a]);
        if !inside {
            return Err(Error::InfeasiblePush(format!(
                "start {start} outside the shelf interior"
            )));
        }
        let dir = direction / norm;
        let push_height = start.z - lo.z;
        let swept = swept_voxels(spec, start, dir, distance);
        if swept.is_empty() {
            return Err(Error::InfeasiblePush("swept volume is empty".into()));
        }
        Ok(Self { start, direction: dir, distance, push_height, swept })
    }

    pub fn start_xy(&self) -> Point2<f64> {
        Point2::new(self.start.x, self.start.y)
    }
}

/// Pusher plate polygon after traveling `s` meters: a `GRIPPER_WIDTH` x
/// `PLATE_THICKNESS` rectangle whose leading face sits at `start + s*dir`.
pub fn plate_polygon(start: Point2<f64>, dir: Vector2<f64>, s: f64) -> Vec<Point2<f64>> {
    let lead = start + dir * s;
    let n = Vector2::new(-dir.y, dir.x) * (GRIPPER_WIDTH / 2.0);
    let back = dir * PLATE_THICKNESS;
    let poly = vec![
        lead + n,
        lead - n,
        lead - n - back,
        lead + n - back,
    ];
    ensure_ccw(poly)
}

/// Region covered by the plate over the whole travel `[0, distance]`.
pub fn sweep_polygon(start: Point2<f64>, dir: Vector2<f64>, distance: f64) -> Vec<Point2<f64>> {
    let n = Vector2::new(-dir.y, dir.x) * (GRIPPER_WIDTH / 2.0);
    let back = dir * PLATE_THICKNESS;
    let lead = start + dir * distance;
    let poly = vec![
        lead + n,
        lead - n,
        start - n - back,
        start + n - back,
    ];
    ensure_ccw(poly)
}

fn ensure_ccw(mut poly: Vec<Point2<f64>>) -> Vec<Point2<f64>> {
    if geom2d::signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Voxels whose center lies inside the sweep polygon, from the floor up to
/// just above the push line.
fn swept_voxels(
    spec: &GridSpec,
    start: Point3<f64>,
    dir: Vector2<f64>,
    distance: f64,
) -> Vec<[usize; 3]> {
    let poly = sweep_polygon(Point2::new(start.x, start.y), dir, distance);
    let z_top = start.z + PLATE_TOP_MARGIN;
    let mut out = Vec::new();
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            let (cx, cy) = spec.cell_to_world_center(i, j);
            if !geom2d::contains_point(&poly, Point2::new(cx, cy)) {
                continue;
            }
            for k in 0..spec.dims[2] {
                let cz = spec.origin.z + (k as f64 + 0.5) * spec.cell_size;
                if cz <= z_top {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Thresholds for frontier extraction and push feasibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PushSamplerParams {
    /// A frontier voxel must be free with at least this margin.
    pub free_max_occ: f64,
    /// Minimum Beta evidence strength for "high confidence".
    pub min_strength: f64,
    /// Occupancy mean above which a voxel counts as a push target.
    pub target_min_occ: f64,
    /// Depth window (cells) in which an occupied voxel must follow.
    pub depth_window: usize,
    /// Radius around a start point in which targets are sampled, meters.
    pub target_radius: f64,
    /// Occupancy mean above which a voxel blocks the sweep corridor.
    pub block_occ: f64,
}

impl Default for PushSamplerParams {
    fn default() -> Self {
        Self {
            free_max_occ: 0.2,
            min_strength: 4.0,
            target_min_occ: 0.6,
            depth_window: 3,
            target_radius: 0.1,
            block_occ: 0.8,
        }
    }
}

/// High-confidence frontier points: confidently free voxels with a likely
/// occupied voxel a few cells deeper, sorted by lateral coordinate.
pub fn frontier_points(belief: &EvidentialBelief, params: &PushSamplerParams) -> Vec<Point3<f64>> {
    let spec = &belief.spec;
    let mut pts = Vec::new();
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            for k in 0..spec.dims[2] {
                let v = spec.voxel_index(i, j, k);
                if belief.occupancy_mean(v) >= params.free_max_occ
                    || belief.occupancy_strength(v) < params.min_strength
                {
                    continue;
                }
                let deeper = (j + 1..=(j + params.depth_window).min(spec.dims[1] - 1)).any(|jj| {
                    belief.occupancy_mean(spec.voxel_index(i, jj, k)) > params.target_min_occ
                });
                if deeper {
                    pts.push(spec.index_to_world_center([i, j, k]));
                }
            }
        }
    }
    pts.sort_by(|a, b| {
        (a.x, a.y, a.z)
            .partial_cmp(&(b.x, b.y, b.z))
            .expect("voxel centers are finite")
    });
    pts
}

/// Sample up to `k` feasible pushes from distinct frontier points.
///
/// For each start, the direction aims at a likely occupied voxel nearby,
/// the distance is uniform in the allowed range, and the sweep corridor
/// must be clear of high-confidence occupied voxels before the first face
/// of the intended contact region.
pub fn sample_pushes<R: Rng>(
    belief: &EvidentialBelief,
    k: usize,
    params: &PushSamplerParams,
    rng: &mut R,
) -> Vec<PushAction> {
    if k == 0 {
        return Vec::new();
    }
    let spec = &belief.spec;
    let frontier = frontier_points(belief, params);
    if frontier.is_empty() {
        return Vec::new();
    }

    // Draw distinct frontier points (partial Fisher-Yates).
    let mut order: Vec<usize> = (0..frontier.len()).collect();
    let n_draw = k.min(order.len());
    for slot in 0..n_draw {
        let pick = rng.random_range(slot..order.len());
        order.swap(slot, pick);
    }

    let mut pushes = Vec::new();
    for &fi in order.iter().take(n_draw) {
        let start = frontier[fi];
        let targets = target_candidates(belief, start, params);
        if targets.is_empty() {
            continue;
        }
        let target = targets[rng.random_range(0..targets.len())];
        let to_target = Vector2::new(target.x - start.x, target.y - start.y);
        if to_target.norm() < 1e-9 {
            continue;
        }
        let dir = to_target.normalize();
        let distance = rng.random_range(MIN_PUSH_DISTANCE..=MAX_PUSH_DISTANCE);
        let push = match PushAction::new(spec, start, dir, distance) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if sweep_is_feasible(belief, &push, target, params) {
            pushes.push(push);
        }
    }
    pushes
}

/// Likely occupied voxel centers within the target radius of a start point,
/// in deterministic (linear index) order.
fn target_candidates(
    belief: &EvidentialBelief,
    start: Point3<f64>,
    params: &PushSamplerParams,
) -> Vec<Point3<f64>> {
    let spec = &belief.spec;
    let mut out = Vec::new();
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            for k in 0..spec.dims[2] {
                let v = spec.voxel_index(i, j, k);
                if belief.occupancy_mean(v) <= params.target_min_occ {
                    continue;
                }
                let c = spec.index_to_world_center([i, j, k]);
                if (c - start).norm() <= params.target_radius {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// The corridor up to the intended contact face must not cross voxels that
/// are confidently occupied.
fn sweep_is_feasible(
    belief: &EvidentialBelief,
    push: &PushAction,
    target: Point3<f64>,
    params: &PushSamplerParams,
) -> bool {
    let spec = &belief.spec;
    let start = push.start_xy();
    let target_s =
        (Vector2::new(target.x, target.y) - start.coords).dot(&push.direction);
    let face_margin = 1.5 * spec.cell_size;
    for &idx in &push.swept {
        let v = spec.voxel_index(idx[0], idx[1], idx[2]);
        if belief.occupancy_mean(v) <= params.block_occ {
            continue;
        }
        let c = spec.index_to_world_center(idx);
        let s = (Vector2::new(c.x, c.y) - start.coords).dot(&push.direction);
        if s < target_s - face_margin {
            return false;
        }
    }
    true
}
