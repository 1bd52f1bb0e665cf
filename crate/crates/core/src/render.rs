//! Deterministic depth + semantic-label rendering of a scene from a posed
//! camera, by marching pixel rays through the rasterized voxel grid.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::error::Result;
use crate::grid::{traverse_ray_spans, BACKGROUND_CLASS};
use crate::scene::{rasterize, RasterScene, Scene};

/// Depth sentinel for pixels with no return.
pub const NO_RETURN: f64 = f64::INFINITY;

/// A posed depth + semantic-label image. `depth[p]` is the range in
/// meters or [`NO_RETURN`]; no-return pixels carry the background label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub viewpoint: Viewpoint,
    pub depth: Vec<f64>,
    pub labels: Vec<u16>,
}

impl Observation {
    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> usize {
        v * self.viewpoint.width + u
    }
}

/// Render depth and class labels. Walls return depth with the background
/// label; rays leaving through the open front face (low y) or exceeding
/// max range produce no return.
pub fn render(scene: &Scene, viewpoint: &Viewpoint) -> Result<Observation> {
    let raster = rasterize(scene);
    Ok(render_raster(scene, &raster, viewpoint).0)
}

/// Render against a precomputed rasterization, also returning the object
/// instance id per pixel (-1 for background/walls/no-return).
pub fn render_raster(
    scene: &Scene,
    raster: &RasterScene,
    viewpoint: &Viewpoint,
) -> (Observation, Vec<i32>) {
    let spec = &scene.spec;
    let n = viewpoint.n_pixels();
    let mut depth = vec![NO_RETURN; n];
    let mut labels = vec![BACKGROUND_CLASS; n];
    let mut instances = vec![-1i32; n];
    let origin = viewpoint.position();

    for v in 0..viewpoint.height {
        for u in 0..viewpoint.width {
            let p = v * viewpoint.width + u;
            let dir = viewpoint.pixel_ray(u, v);
            let spans = traverse_ray_spans(spec, origin, dir, viewpoint.max_range)
                .expect("pixel rays are unit vectors");
            let mut hit = false;
            for span in &spans {
                let vox = spec.voxel_index(span.idx[0], span.idx[1], span.idx[2]);
                if raster.occ[vox] {
                    depth[p] = span.t_enter.max(1e-9);
                    labels[p] = raster.class[vox];
                    instances[p] = raster.instance[vox];
                    hit = true;
                    break;
                }
            }
            if hit {
                continue;
            }
            if let Some(t_wall) = wall_hit(scene, origin, dir, viewpoint.max_range) {
                depth[p] = t_wall;
            }
        }
    }
    (Observation { viewpoint: viewpoint.clone(), depth, labels }, instances)
}

/// Distance at which a ray hits a closed wall of the shelf interior, or
/// `None` when it misses the box, leaves through the open front face, or
/// exceeds `max_range`.
fn wall_hit(
    scene: &Scene,
    origin: Point3<f64>,
    dir: nalgebra::Vector3<f64>,
    max_range: f64,
) -> Option<f64> {
    let lo = scene.walls.min;
    let hi = scene.walls.max;
    let mut t0 = 0.0_f64;
    let mut t1 = f64::INFINITY;
    let mut exit_axis = 0usize;
    for a in 0..3 {
        if dir[a].abs() < 1e-15 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return None;
            }
        } else {
            let ta = (lo[a] - origin[a]) / dir[a];
            let tb = (hi[a] - origin[a]) / dir[a];
            let (near, far) = if ta < tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(near);
            if far < t1 {
                t1 = far;
                exit_axis = a;
            }
        }
    }
    if t0 > t1 || t1 <= 0.0 || t1 > max_range {
        return None;
    }
    // Exiting through the front opening (the low-y face) gives no return.
    if exit_axis == 1 && dir[1] < 0.0 {
        return None;
    }
    Some(t1)
}
