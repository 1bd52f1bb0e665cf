//! Dense voxel-grid geometry: world/index conversion, ray marching, and
//! entropy primitives shared by the belief engine and the planner.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of the workspace grid.
///
/// Axes: `x` is lateral (along the shelf board), `y` is depth (into the
/// shelf, opening at low `y`), `z` is up. `dims = [H, W, D]` counts cells
/// along `x`, `y`, `z`; the semantic birds-eye map is the `H x W` floor
/// plan. Class index 0 is reserved for background/free space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point3<f64>,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub n_classes: usize,
}

/// Background / free-space class index.
pub const BACKGROUND_CLASS: u16 = 0;

impl GridSpec {
    pub fn new(
        origin: Point3<f64>,
        cell_size: f64,
        dims: [usize; 3],
        n_classes: usize,
    ) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidGridSpec(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGridSpec(format!("all dims must be >= 1, got {dims:?}")));
        }
        if n_classes < 2 {
            return Err(Error::InvalidGridSpec(format!(
                "need at least 2 classes (background + 1), got {n_classes}"
            )));
        }
        if !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidGridSpec("origin must be finite".into()));
        }
        Ok(Self { origin, cell_size, dims, n_classes })
    }

    /// Default shelf workspace: a 0.8 x 0.4 x 0.4 m board at 0.02 m
    /// resolution with 14 object categories plus background.
    pub fn default_shelf() -> Self {
        Self::new(Point3::origin(), 0.02, [40, 20, 20], 15).expect("default spec is valid")
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Number of 2D birds-eye cells (`H x W`).
    pub fn n_cells(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn max_corner(&self) -> Point3<f64> {
        self.origin
            + Vector3::new(
                self.dims[0] as f64 * self.cell_size,
                self.dims[1] as f64 * self.cell_size,
                self.dims[2] as f64 * self.cell_size,
            )
    }

    #[inline]
    pub fn in_bounds(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|a| idx[a] >= 0 && (idx[a] as usize) < self.dims[a])
    }

    /// Linear index of voxel `(i, j, k)`.
    #[inline]
    pub fn voxel_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Linear index of birds-eye cell `(i, j)`.
    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i * self.dims[1] + j
    }

    /// Voxel containing a world point, or `None` when out of bounds.
    /// A point exactly on a shared face belongs to the voxel whose
    /// lower-coordinate face it touches (floor semantics).
    pub fn world_to_index(&self, p: Point3<f64>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.cell_size).floor();
            if f < 0.0 || f >= self.dims[a] as f64 {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    pub fn index_to_world_center(&self, idx: [usize; 3]) -> Point3<f64> {
        Point3::new(
            self.origin.x + (idx[0] as f64 + 0.5) * self.cell_size,
            self.origin.y + (idx[1] as f64 + 0.5) * self.cell_size,
            self.origin.z + (idx[2] as f64 + 0.5) * self.cell_size,
        )
    }

    /// World center of a birds-eye cell on the floor plane.
    pub fn cell_to_world_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.x + (i as f64 + 0.5) * self.cell_size,
            self.origin.y + (j as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn same_geometry(&self, other: &GridSpec) -> bool {
        self.dims == other.dims && self.n_classes == other.n_classes
    }
}

/// One voxel crossed by a ray, with the entry and exit parameters
/// (distances along the unit direction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayVoxel {
    pub idx: [usize; 3],
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Exact incremental grid marching over the segment
/// `origin + t * direction, t in [0, max_range]`.
///
/// Voxels come out in order of increasing distance, each once;
/// consecutive voxels differ in exactly one index by one step.
pub fn traverse_ray_spans(
    spec: &GridSpec,
    origin: Point3<f64>,
    direction: Vector3<f64>,
    max_range: f64,
) -> Result<Vec<RayVoxel>> {
    let norm = direction.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let dir = direction / norm;

    let gmin = spec.origin;
    let gmax = spec.max_corner();

    // Clip [0, max_range] against the grid box (slab test).
    let mut t0 = 0.0_f64;
    let mut t1 = max_range;
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            if origin[a] < gmin[a] || origin[a] > gmax[a] {
                return Ok(Vec::new());
            }
        } else {
            let ta = (gmin[a] - origin[a]) / dir[a];
            let tb = (gmax[a] - origin[a]) / dir[a];
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
    }
    if t0 > t1 {
        return Ok(Vec::new());
    }

    let start = origin + dir * t0;
    let mut idx = [0i64; 3];
    for a in 0..3 {
        let mut i = ((start[a] - gmin[a]) / spec.cell_size).floor() as i64;
        // Entry exactly on the outer boundary lands on the face; fold it
        // back into the adjacent interior voxel.
        if i < 0 {
            i = 0;
        }
        if i >= spec.dims[a] as i64 {
            i = spec.dims[a] as i64 - 1;
        }
        idx[a] = i;
    }

    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if dir[a] > 1e-15 {
            step[a] = 1;
            let boundary = gmin[a] + (idx[a] + 1) as f64 * spec.cell_size;
            t_max[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = spec.cell_size / dir[a];
        } else if dir[a] < -1e-15 {
            step[a] = -1;
            let boundary = gmin[a] + idx[a] as f64 * spec.cell_size;
            t_max[a] = (boundary - origin[a]) / dir[a];
            t_delta[a] = spec.cell_size / -dir[a];
        }
    }

    let mut out = Vec::new();
    let mut t = t0;
    loop {
        // Next boundary crossing; ties resolve to the lowest axis.
        let mut axis = 0;
        for a in 1..3 {
            if t_max[a] < t_max[axis] {
                axis = a;
            }
        }
        let t_next = t_max[axis];
        out.push(RayVoxel {
            idx: [idx[0] as usize, idx[1] as usize, idx[2] as usize],
            t_enter: t,
            t_exit: t_next.min(t1),
        });
        if t_next >= t1 {
            break;
        }
        idx[axis] += step[axis];
        if idx[axis] < 0 || idx[axis] >= spec.dims[axis] as i64 {
            break;
        }
        t = t_next;
        t_max[axis] += t_delta[axis];
    }
    Ok(out)
}

/// Ordered voxel indices crossed by a ray segment.
pub fn traverse_ray(
    spec: &GridSpec,
    origin: Point3<f64>,
    direction: Vector3<f64>,
    max_range: f64,
) -> Result<Vec<[usize; 3]>> {
    Ok(traverse_ray_spans(spec, origin, direction, max_range)?
        .into_iter()
        .map(|v| v.idx)
        .collect())
}

/// Entropy of a Bernoulli variable, in nats. `0 ln 0 := 0`.
pub fn bernoulli_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability(p));
    }
    Ok(bernoulli_entropy_unchecked(p))
}

/// Same as [`bernoulli_entropy`] for callers that already hold a valid
/// probability (hot loops in information-gain scoring).
#[inline]
pub fn bernoulli_entropy_unchecked(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    h
}

/// Entropy of a categorical distribution given as (normalized) weights.
pub fn categorical_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}
