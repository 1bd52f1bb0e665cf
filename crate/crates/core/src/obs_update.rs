//! Observation belief update: exact per-cell evidence accumulation of a
//! posed depth + label image into the evidential belief.

use serde::{Deserialize, Serialize};

use crate::belief::EvidentialBelief;
use crate::error::{Error, Result};
use crate::grid::traverse_ray_spans;
use crate::render::Observation;

/// Evidence increments per image. One occupied return outweighs one miss,
/// so surfaces firm up faster than free space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObsParams {
    pub k_free: f64,
    pub k_occ: f64,
    pub k_sem: f64,
}

impl Default for ObsParams {
    fn default() -> Self {
        Self { k_free: 1.0, k_occ: 4.0, k_sem: 4.0 }
    }
}

/// Tolerance when locating the returned point along a ray, meters.
const DEPTH_EPS: f64 = 1e-9;

/// Integrate one observation, returning the updated belief.
///
/// Per pixel ray: voxels strictly before the return accumulate free
/// evidence, the voxel containing the return point accumulates occupied
/// evidence, and that voxel's birds-eye cell accumulates semantic evidence
/// for the pixel's label. Nothing past the return or beyond max range is
/// touched. Each voxel (and each cell/label pair) is incremented at most
/// once per image regardless of how many rays cross it, so the result is
/// independent of pixel resolution and ray order.
pub fn update_observation(
    belief: &EvidentialBelief,
    obs: &Observation,
    params: &ObsParams,
) -> Result<EvidentialBelief> {
    let spec = &belief.spec;
    let vp = &obs.viewpoint;
    let n_px = vp.n_pixels();
    if obs.depth.len() != n_px || obs.labels.len() != n_px {
        return Err(Error::InvalidObservation(format!(
            "image storage ({} depth, {} labels) does not match {}x{}",
            obs.depth.len(),
            obs.labels.len(),
            vp.width,
            vp.height
        )));
    }
    for (p, &d) in obs.depth.iter().enumerate() {
        if d.is_nan() || d <= 0.0 || (d.is_finite() && d > vp.max_range + DEPTH_EPS) {
            return Err(Error::InvalidObservation(format!("pixel {p}: bad depth {d}")));
        }
        if (obs.labels[p] as usize) >= spec.n_classes {
            return Err(Error::InvalidObservation(format!(
                "pixel {p}: label {} out of range",
                obs.labels[p]
            )));
        }
    }

    let origin = vp.position();
    let mut free_mask = vec![false; spec.n_voxels()];
    let mut occ_mask = vec![false; spec.n_voxels()];
    let mut sem_mask = vec![false; spec.n_cells() * spec.n_classes];

    for v in 0..vp.height {
        for u in 0..vp.width {
            let p = v * vp.width + u;
            let d = obs.depth[p];
            let dir = vp.pixel_ray(u, v);
            let range = if d.is_finite() { (d + spec.cell_size).min(vp.max_range) } else { vp.max_range };
            let spans = traverse_ray_spans(spec, origin, dir, range)?;
            for span in &spans {
                let vox = spec.voxel_index(span.idx[0], span.idx[1], span.idx[2]);
                if d < span.t_exit - DEPTH_EPS {
                    // Return point inside this voxel.
                    occ_mask[vox] = true;
                    let cell = spec.cell_index(span.idx[0], span.idx[1]);
                    sem_mask[cell * spec.n_classes + obs.labels[p] as usize] = true;
                    break;
                }
                free_mask[vox] = true;
            }
        }
    }

    let mut out = belief.clone();
    for (vox, &f) in free_mask.iter().enumerate() {
        if f {
            out.beta[vox] += params.k_free;
        }
    }
    for (vox, &o) in occ_mask.iter().enumerate() {
        if o {
            out.alpha[vox] += params.k_occ;
        }
    }
    for (slot, &s) in sem_mask.iter().enumerate() {
        if s {
            out.sem[slot] += params.k_sem;
        }
    }
    out.enforce_floor();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::new_uniform_belief;
    use crate::camera::Viewpoint;
    use crate::grid::GridSpec;
    use crate::render::{render, NO_RETURN};
    use crate::scene::{box_footprint, Scene, SceneObject};
    use nalgebra::{Point2, Point3};

    fn shelf_camera() -> Viewpoint {
        Viewpoint::look_at(
            Point3::new(0.4, -0.3, 0.2),
            Point3::new(0.4, 0.2, 0.2),
            40.0,
            40.0,
            64,
            48,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn empty_shelf_carves_free_space() {
        let spec = GridSpec::default_shelf();
        let scene = Scene::empty(&spec);
        let obs = render(&scene, &shelf_camera()).unwrap();
        let b0 = new_uniform_belief(&spec);
        let b1 = update_observation(&b0, &obs, &ObsParams::default()).unwrap();
        b1.validate().unwrap();
        let mut carved = 0;
        for v in 0..spec.n_voxels() {
            let m = b1.occupancy_mean(v);
            assert!(m <= 0.5 + 1e-12, "no voxel may gain occupancy from an empty shelf");
            if m < 0.5 {
                carved += 1;
            }
        }
        assert!(carved > spec.n_voxels() / 4, "carved only {carved} voxels");
    }

    #[test]
    fn object_hit_gains_default_occupancy_five_sixths() {
        let spec = GridSpec::default_shelf();
        let mut scene = Scene::empty(&spec);
        scene.objects.push(SceneObject {
            class_id: 3,
            footprint: box_footprint(0.12, 0.1),
            height: 0.2,
            position: Point2::new(0.4, 0.2),
            yaw: 0.0,
        });
        let obs = render(&scene, &shelf_camera()).unwrap();
        let b0 = new_uniform_belief(&spec);
        let b1 = update_observation(&b0, &obs, &ObsParams::default()).unwrap();
        // Hit voxels: Beta(1 + k_occ, 1) -> mean 5/6.
        let hit: Vec<usize> = (0..spec.n_voxels())
            .filter(|&v| b1.alpha[v] > b0.alpha[v])
            .collect();
        assert!(!hit.is_empty());
        for v in hit {
            assert!((b1.occupancy_mean(v) - 5.0 / 6.0).abs() < 1e-12);
        }
        // Semantic evidence flows to class 3 somewhere.
        assert!((0..spec.n_cells()).any(|c| b1.sem_params(c)[3] > 1.0));
    }

    #[test]
    fn double_integration_doubles_evidence_monotonically() {
        let spec = GridSpec::default_shelf();
        let mut scene = Scene::empty(&spec);
        scene.objects.push(SceneObject {
            class_id: 2,
            footprint: box_footprint(0.1, 0.1),
            height: 0.15,
            position: Point2::new(0.3, 0.2),
            yaw: 0.1,
        });
        let obs = render(&scene, &shelf_camera()).unwrap();
        let params = ObsParams::default();
        let b0 = new_uniform_belief(&spec);
        let b1 = update_observation(&b0, &obs, &params).unwrap();
        let b2 = update_observation(&b1, &obs, &params).unwrap();
        for v in 0..spec.n_voxels() {
            let d1 = b1.alpha[v] - b0.alpha[v];
            let d2 = b2.alpha[v] - b1.alpha[v];
            assert_eq!(d1, d2, "same image adds the same occupancy evidence");
            let m0 = b0.occupancy_mean(v);
            let m1 = b1.occupancy_mean(v);
            let m2 = b2.occupancy_mean(v);
            // Means move monotonically toward the observed value.
            if m1 > m0 {
                assert!(m2 >= m1 - 1e-12);
            } else if m1 < m0 {
                assert!(m2 <= m1 + 1e-12);
            }
        }
    }

    #[test]
    fn all_no_return_image_touches_only_within_max_range() {
        let spec = GridSpec::default_shelf();
        let cam = Viewpoint::look_at(
            Point3::new(0.4, -0.05, 0.2),
            Point3::new(0.4, 0.4, 0.2),
            40.0,
            40.0,
            16,
            12,
            // Max range shorter than the shelf front, so rays end before
            // reaching any voxel.
            0.04,
        )
        .unwrap();
        let obs = Observation {
            viewpoint: cam.clone(),
            depth: vec![NO_RETURN; cam.n_pixels()],
            labels: vec![0; cam.n_pixels()],
        };
        let b0 = new_uniform_belief(&spec);
        let b1 = update_observation(&b0, &obs, &ObsParams::default()).unwrap();
        assert_eq!(b0, b1, "nothing beyond max range may change");
    }

    #[test]
    fn order_of_images_does_not_matter() {
        let spec = GridSpec::default_shelf();
        let mut scene = Scene::empty(&spec);
        scene.objects.push(SceneObject {
            class_id: 5,
            footprint: box_footprint(0.1, 0.08),
            height: 0.22,
            position: Point2::new(0.55, 0.18),
            yaw: 0.7,
        });
        let cam_a = shelf_camera();
        let cam_b = Viewpoint::look_at(
            Point3::new(0.1, -0.25, 0.3),
            Point3::new(0.4, 0.2, 0.2),
            40.0,
            40.0,
            64,
            48,
            2.0,
        )
        .unwrap();
        let oa = render(&scene, &cam_a).unwrap();
        let ob = render(&scene, &cam_b).unwrap();
        let params = ObsParams::default();
        let b0 = new_uniform_belief(&spec);
        let ab = update_observation(&update_observation(&b0, &oa, &params).unwrap(), &ob, &params).unwrap();
        let ba = update_observation(&update_observation(&b0, &ob, &params).unwrap(), &oa, &params).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn evidence_conservation_bound() {
        let spec = GridSpec::default_shelf();
        let mut scene = Scene::empty(&spec);
        scene.objects.push(SceneObject {
            class_id: 1,
            footprint: box_footprint(0.1, 0.1),
            height: 0.2,
            position: Point2::new(0.4, 0.2),
            yaw: 0.0,
        });
        let obs = render(&scene, &shelf_camera()).unwrap();
        let params = ObsParams::default();
        let b0 = new_uniform_belief(&spec);
        let b1 = update_observation(&b0, &obs, &params).unwrap();
        let added: f64 = (0..spec.n_voxels())
            .map(|v| (b1.alpha[v] - b0.alpha[v]) + (b1.beta[v] - b0.beta[v]))
            .sum::<f64>()
            + b1.sem.iter().zip(&b0.sem).map(|(a, b)| a - b).sum::<f64>();
        let touched = (0..spec.n_voxels())
            .filter(|&v| b1.alpha[v] > b0.alpha[v] || b1.beta[v] > b0.beta[v])
            .count();
        assert!(added <= (params.k_free + params.k_occ + params.k_sem) * touched as f64 + 1e-9);
    }

    #[test]
    fn malformed_image_is_rejected() {
        let spec = GridSpec::default_shelf();
        let cam = shelf_camera();
        let b = new_uniform_belief(&spec);
        let obs = Observation {
            viewpoint: cam.clone(),
            depth: vec![1.0; 3],
            labels: vec![0; 3],
        };
        assert!(update_observation(&b, &obs, &ObsParams::default()).is_err());
        let obs2 = Observation {
            viewpoint: cam.clone(),
            depth: vec![-1.0; cam.n_pixels()],
            labels: vec![0; cam.n_pixels()],
        };
        assert!(update_observation(&b, &obs2, &ObsParams::default()).is_err());
    }
}
