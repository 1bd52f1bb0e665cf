//! Ground-truth world model: rigid prismatic objects on a shelf board,
//! plus exact rasterization into metric-semantic maps.

use nalgebra::{Point2, Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::belief::SemanticMap;
use crate::error::{Error, Result};
use crate::geom2d;
use crate::grid::{GridSpec, BACKGROUND_CLASS};

/// Tolerance on footprint interior overlap, square meters.
pub const OVERLAP_TOL: f64 = 1e-9;

/// One rigid prismatic object. The footprint is a convex CCW polygon in
/// the object's local frame (centroid near the origin); world placement is
/// rotation by `yaw` followed by translation to `position`. Dynamics are
/// translation-only, so `yaw` is fixed after placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class_id: u16,
    pub footprint: Vec<Point2<f64>>,
    pub height: f64,
    pub position: Point2<f64>,
    pub yaw: f64,
}

impl SceneObject {
    pub fn world_footprint(&self) -> Vec<Point2<f64>> {
        geom2d::transform(&self.footprint, self.yaw, self.position.coords)
    }

    pub fn translated(&self, offset: Vector2<f64>) -> SceneObject {
        let mut o = self.clone();
        o.position += offset;
        o
    }
}

/// Axis-aligned box, used for the shelf interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb3 {
    pub fn interior_height(&self) -> f64 {
        self.max.z - self.min.z
    }
}

/// Ground-truth workspace configuration: the shelf interior and the
/// objects on its board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub spec: GridSpec,
    pub walls: Aabb3,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Empty scene whose walls coincide with the grid volume.
    pub fn empty(spec: &GridSpec) -> Self {
        Self {
            spec: spec.clone(),
            walls: Aabb3 { min: spec.origin, max: spec.max_corner() },
            objects: Vec::new(),
        }
    }

    /// Footprint area covered by objects divided by the floor area.
    pub fn floor_occupancy(&self) -> f64 {
        let floor = (self.walls.max.x - self.walls.min.x) * (self.walls.max.y - self.walls.min.y);
        let covered: f64 = self.objects.iter().map(|o| geom2d::area(&o.world_footprint())).sum();
        covered / floor
    }

    pub fn validate(&self) -> Result<()> {
        for (n, obj) in self.objects.iter().enumerate() {
            if obj.class_id == BACKGROUND_CLASS || (obj.class_id as usize) >= self.spec.n_classes {
                return Err(Error::InvalidScene(format!(
                    "object {n}: class {} out of range",
                    obj.class_id
                )));
            }
            if !geom2d::is_convex_ccw(&obj.footprint) || geom2d::area(&obj.footprint) <= 0.0 {
                return Err(Error::InvalidScene(format!(
                    "object {n}: footprint must be convex CCW with positive area"
                )));
            }
            if !(obj.height > 0.0 && obj.height <= self.walls.interior_height() + 1e-12) {
                return Err(Error::InvalidScene(format!(
                    "object {n}: height {} outside (0, {}]",
                    obj.height,
                    self.walls.interior_height()
                )));
            }
            let wf = obj.world_footprint();
            let (lo, hi) = geom2d::aabb(&wf);
            if lo.x < self.walls.min.x - 1e-9
                || lo.y < self.walls.min.y - 1e-9
                || hi.x > self.walls.max.x + 1e-9
                || hi.y > self.walls.max.y + 1e-9
            {
                return Err(Error::InvalidScene(format!("object {n}: outside the walls")));
            }
        }
        for a in 0..self.objects.len() {
            for b in (a + 1)..self.objects.len() {
                let ia = geom2d::intersection_area(
                    &self.objects[a].world_footprint(),
                    &self.objects[b].world_footprint(),
                );
                if ia > OVERLAP_TOL {
                    return Err(Error::InvalidScene(format!(
                        "objects {a} and {b} overlap by {ia:.2e} m^2"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rasterized scene with per-voxel class and object-instance ids
/// (instance -1 means free).
#[derive(Debug, Clone)]
pub struct RasterScene {
    pub spec: GridSpec,
    pub occ: Vec<bool>,
    pub class: Vec<u16>,
    pub instance: Vec<i32>,
    /// Birds-eye class per cell.
    pub sem: Vec<u16>,
}

/// Exact rasterization: a voxel is occupied iff its center lies inside an
/// object's extruded footprint (half-open polygon membership so abutting
/// objects never share a voxel); the birds-eye class is the object covering
/// the cell center.
pub fn rasterize(scene: &Scene) -> RasterScene {
    let spec = &scene.spec;
    let floor_z = scene.walls.min.z;
    let mut occ = vec![false; spec.n_voxels()];
    let mut class = vec![BACKGROUND_CLASS; spec.n_voxels()];
    let mut instance = vec![-1i32; spec.n_voxels()];
    let mut sem = vec![BACKGROUND_CLASS; spec.n_cells()];

    for (oi, obj) in scene.objects.iter().enumerate() {
        let wf = obj.world_footprint();
        let (lo, hi) = geom2d::aabb(&wf);
        // Candidate cell range from the footprint bounding box.
        let i0 = (((lo.x - spec.origin.x) / spec.cell_size).floor().max(0.0)) as usize;
        let j0 = (((lo.y - spec.origin.y) / spec.cell_size).floor().max(0.0)) as usize;
        let i1 = ((((hi.x - spec.origin.x) / spec.cell_size).ceil()) as usize).min(spec.dims[0]);
        let j1 = ((((hi.y - spec.origin.y) / spec.cell_size).ceil()) as usize).min(spec.dims[1]);
        for i in i0..i1 {
            for j in j0..j1 {
                let (cx, cy) = spec.cell_to_world_center(i, j);
                if !geom2d::contains_point_half_open(&wf, Point2::new(cx, cy)) {
                    continue;
                }
                sem[spec.cell_index(i, j)] = obj.class_id;
                for k in 0..spec.dims[2] {
                    let cz = spec.origin.z + (k as f64 + 0.5) * spec.cell_size;
                    if cz - floor_z >= 0.0 && cz - floor_z < obj.height {
                        let v = spec.voxel_index(i, j, k);
                        occ[v] = true;
                        class[v] = obj.class_id;
                        instance[v] = oi as i32;
                    }
                }
            }
        }
    }
    RasterScene { spec: spec.clone(), occ, class, instance, sem }
}

/// Ground-truth metric-semantic map of a configuration.
pub fn to_map(scene: &Scene) -> SemanticMap {
    let raster = rasterize(scene);
    let spec = &scene.spec;
    // Columns with no occupied voxel are forced to background (covers
    // footprint slivers whose column never reached a voxel center).
    let mut sem = raster.sem;
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            let any = (0..spec.dims[2]).any(|k| raster.occ[spec.voxel_index(i, j, k)]);
            if !any {
                sem[spec.cell_index(i, j)] = BACKGROUND_CLASS;
            }
        }
    }
    SemanticMap { spec: spec.clone(), occ: raster.occ, sem }
}

/// Axis-aligned box footprint centered at the local origin.
pub fn box_footprint(size_x: f64, size_y: f64) -> Vec<Point2<f64>> {
    geom2d::rect(
        Point2::new(-size_x / 2.0, -size_y / 2.0),
        Point2::new(size_x / 2.0, size_y / 2.0),
    )
}

/// Regular octagon footprint of circumradius `r` (cylinder stand-in).
pub fn octagon_footprint(r: f64) -> Vec<Point2<f64>> {
    (0..8)
        .map(|i| {
            let a = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / 8.0;
            Point2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}
