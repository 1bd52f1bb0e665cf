//! Stochastic shelf-scene sampling: occupancy-targeted placement with
//! class affinities, a regularity knob that favors aligned arrangements,
//! and Minkowski-style placeable-area masks.

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Viewpoint;
use crate::error::{Error, Result};
use crate::geom2d;
use crate::grid::GridSpec;
use crate::render::render_raster;
use crate::scene::{box_footprint, octagon_footprint, rasterize, Scene, SceneObject, OVERLAP_TOL};

/// One placeable object category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    /// Convex CCW footprint template, centroid at the origin.
    pub footprint: Vec<Point2<f64>>,
    pub height: f64,
    /// Relative draw weight before affinity adjustment.
    pub base_prob: f64,
    /// Classes whose appearance this class encourages nearby.
    pub affinity: Vec<u16>,
    pub radius_of_influence: f64,
}

/// Scene-sampler configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub spec: GridSpec,
    /// Target floor-coverage fraction range.
    pub occupancy_range: (f64, f64),
    /// Regularity: 0 places freely, 1 strongly favors cells laterally in
    /// line with existing object centroids.
    pub rho: f64,
    /// Catalog indexed by class id minus one (class 0 is background).
    pub catalog: Vec<ClassSpec>,
    pub max_iterations: usize,
    /// Per-axis scale jitter range applied to each placed instance.
    pub size_jitter: (f64, f64),
}

/// Weight multiplier applied to cells laterally aligned with an existing
/// centroid, scaled by `rho`.
pub const ALIGNMENT_WEIGHT: f64 = 4.0;
/// Draw-weight multiplier for classes inside a placed object's radius of
/// influence.
pub const AFFINITY_MULTIPLIER: f64 = 2.0;

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.occupancy_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParams(format!("occupancy range ({lo}, {hi})")));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParams(format!("rho {} outside [0,1]", self.rho)));
        }
        if self.catalog.is_empty() {
            return Err(Error::InvalidParams("catalog is empty".into()));
        }
        let (jlo, jhi) = self.size_jitter;
        if !(jlo > 0.0 && jlo <= jhi) {
            return Err(Error::InvalidParams(format!("size jitter ({jlo}, {jhi})")));
        }
        for (n, c) in self.catalog.iter().enumerate() {
            if !geom2d::is_convex_ccw(&c.footprint) || geom2d::area(&c.footprint) <= 0.0 {
                return Err(Error::InvalidParams(format!("class {} footprint invalid", n + 1)));
            }
            if c.radius_of_influence < 0.0 || c.height <= 0.0 {
                return Err(Error::InvalidParams(format!("class {} parameters invalid", n + 1)));
            }
        }
        Ok(())
    }

    /// Default sampler for the standard shelf: grocery-like catalog,
    /// 30-45% floor coverage, no jitter.
    pub fn default_shelf() -> Self {
        Self {
            spec: GridSpec::default_shelf(),
            occupancy_range: (0.30, 0.45),
            rho: 0.0,
            catalog: default_catalog(),
            max_iterations: 200,
            size_jitter: (1.0, 1.0),
        }
    }

    /// Boolean mask over floor cells marking centroid positions where the
    /// class footprint (at the given yaw) fits: obstacles dilated by the
    /// footprint on the cell grid (discrete Minkowski sum), conservative
    /// to half a cell; the wall fit is exact.
    pub fn placeable_area(&self, scene: &Scene, class_id: u16, yaw: f64) -> Result<Vec<bool>> {
        let class = self
            .catalog
            .get(class_id as usize - 1)
            .ok_or_else(|| Error::InvalidParams(format!("unknown class {class_id}")))?;
        let footprint = geom2d::transform(&class.footprint, yaw, Vector2::zeros());
        Ok(placeable_mask(scene, &footprint))
    }
}

/// Catalog of 14 grocery-shelf categories (sizes in meters). Larger
/// footprints get slightly higher base probability, and large classes
/// attract small ones nearby.
pub fn default_catalog() -> Vec<ClassSpec> {
    struct Raw(&'static str, Vec<Point2<f64>>, f64);
    let raw = vec![
        Raw("cracker_box", box_footprint(0.16, 0.06), 0.21),
        Raw("sugar_box", box_footprint(0.09, 0.045), 0.175),
        Raw("soup_can", octagon_footprint(0.033), 0.10),
        Raw("mustard_bottle", box_footprint(0.095, 0.058), 0.19),
        Raw("potted_meat_can", box_footprint(0.10, 0.06), 0.082),
        Raw("gelatin_box", box_footprint(0.089, 0.072), 0.073),
        Raw("pudding_box", box_footprint(0.11, 0.089), 0.04),
        Raw("coffee_can", octagon_footprint(0.051), 0.14),
        Raw("pitcher", octagon_footprint(0.054), 0.24),
        Raw("bleach_bottle", box_footprint(0.10, 0.065), 0.25),
        Raw("mug", octagon_footprint(0.045), 0.082),
        Raw("chips_can", octagon_footprint(0.0375), 0.23),
        Raw("cereal_box", box_footprint(0.19, 0.06), 0.28),
        Raw("milk_carton", box_footprint(0.07, 0.07), 0.20),
    ];
    let max_area = raw
        .iter()
        .map(|r| geom2d::area(&r.1))
        .fold(0.0f64, f64::max);
    let large: Vec<u16> = raw
        .iter()
        .enumerate()
        .filter(|(_, r)| geom2d::area(&r.1) > 0.6 * max_area)
        .map(|(i, _)| i as u16 + 1)
        .collect();
    let small: Vec<u16> = (1..=raw.len() as u16).filter(|c| !large.contains(c)).collect();
    raw.into_iter()
        .map(|Raw(name, footprint, height)| {
            let area = geom2d::area(&footprint);
            let is_large = area > 0.6 * max_area;
            ClassSpec {
                name: name.to_string(),
                footprint,
                height,
                base_prob: 1.0 + area / max_area,
                affinity: if is_large { small.clone() } else { Vec::new() },
                radius_of_influence: 0.15,
            }
        })
        .collect()
}

/// Conservative placeable mask for an explicit footprint polygon.
fn placeable_mask(scene: &Scene, footprint: &[Point2<f64>]) -> Vec<bool> {
    let spec = &scene.spec;
    let n_cells = spec.n_cells();
    let cell = spec.cell_size;
    let (flo, fhi) = geom2d::aabb(footprint);

    // Obstacle cells: any object footprint touches the cell square.
    let mut obstacle = vec![false; n_cells];
    for obj in &scene.objects {
        let wf = obj.world_footprint();
        let (lo, hi) = geom2d::aabb(&wf);
        let i0 = (((lo.x - spec.origin.x) / cell).floor().max(0.0)) as usize;
        let j0 = (((lo.y - spec.origin.y) / cell).floor().max(0.0)) as usize;
        let i1 = ((((hi.x - spec.origin.x) / cell).ceil()) as usize).min(spec.dims[0]);
        let j1 = ((((hi.y - spec.origin.y) / cell).ceil()) as usize).min(spec.dims[1]);
        for i in i0..i1 {
            for j in j0..j1 {
                if obstacle[spec.cell_index(i, j)] {
                    continue;
                }
                let sq = geom2d::rect(
                    Point2::new(spec.origin.x + i as f64 * cell, spec.origin.y + j as f64 * cell),
                    Point2::new(
                        spec.origin.x + (i + 1) as f64 * cell,
                        spec.origin.y + (j + 1) as f64 * cell,
                    ),
                );
                if geom2d::intersection_area(&sq, &wf) > 1e-12 {
                    obstacle[spec.cell_index(i, j)] = true;
                }
            }
        }
    }

    // Structuring offsets: cell squares (inflated by half a cell) the
    // footprint could touch when centered on a cell center.
    let di0 = ((flo.x / cell) - 1.0).floor() as i64;
    let dj0 = ((flo.y / cell) - 1.0).floor() as i64;
    let di1 = ((fhi.x / cell) + 1.0).ceil() as i64;
    let dj1 = ((fhi.y / cell) + 1.0).ceil() as i64;
    let mut offsets = Vec::new();
    for di in di0..=di1 {
        for dj in dj0..=dj1 {
            let sq = geom2d::rect(
                Point2::new((di as f64 - 1.0) * cell, (dj as f64 - 1.0) * cell),
                Point2::new((di as f64 + 1.0) * cell, (dj as f64 + 1.0) * cell),
            );
            if geom2d::intersection_area(&sq, footprint) > 1e-12 {
                offsets.push((di, dj));
            }
        }
    }

    let mut mask = vec![false; n_cells];
    for i in 0..spec.dims[0] {
        'cells: for j in 0..spec.dims[1] {
            let (cx, cy) = spec.cell_to_world_center(i, j);
            // Exact wall fit for the centroid.
            if cx + flo.x < scene.walls.min.x - 1e-12
                || cy + flo.y < scene.walls.min.y - 1e-12
                || cx + fhi.x > scene.walls.max.x + 1e-12
                || cy + fhi.y > scene.walls.max.y + 1e-12
            {
                continue;
            }
            for &(di, dj) in &offsets {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= spec.dims[0] as i64 || nj >= spec.dims[1] as i64 {
                    continue;
                }
                if obstacle[spec.cell_index(ni as usize, nj as usize)] {
                    continue 'cells;
                }
            }
            mask[spec.cell_index(i, j)] = true;
        }
    }
    mask
}

/// Exact placement check: the footprint at `position` stays inside the
/// walls and overlaps no object.
fn fits_exactly(scene: &Scene, footprint: &[Point2<f64>], position: Point2<f64>) -> bool {
    let placed = geom2d::translate(footprint, position.coords);
    let (lo, hi) = geom2d::aabb(&placed);
    if lo.x < scene.walls.min.x - 1e-12
        || lo.y < scene.walls.min.y - 1e-12
        || hi.x > scene.walls.max.x + 1e-12
        || hi.y > scene.walls.max.y + 1e-12
    {
        return false;
    }
    scene
        .objects
        .iter()
        .all(|o| geom2d::intersection_area(&o.world_footprint(), &placed) <= OVERLAP_TOL)
}

/// Sample a scene: draw a target coverage, then repeatedly draw a weighted
/// floor point, a yaw, a jittered class, and place it, until the target
/// or the iteration cap is reached. Deterministic for a fixed seed.
pub fn sample_scene(params: &GenParams, seed: u64) -> Result<Scene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = &params.spec;
    let mut scene = Scene::empty(spec);
    let target = rng.random_range(params.occupancy_range.0..=params.occupancy_range.1);

    for _iter in 0..params.max_iterations {
        if scene.floor_occupancy() >= target {
            break;
        }
        // Floor-point weights: free cells, boosted laterally in line with
        // existing centroids.
        let mut weights = vec![0.0f64; spec.n_cells()];
        for i in 0..spec.dims[0] {
            for j in 0..spec.dims[1] {
                let (cx, cy) = spec.cell_to_world_center(i, j);
                let p = Point2::new(cx, cy);
                let covered = scene
                    .objects
                    .iter()
                    .any(|o| geom2d::contains_point_half_open(&o.world_footprint(), p));
                if !covered {
                    weights[spec.cell_index(i, j)] = 1.0;
                }
            }
        }
        if params.rho > 0.0 {
            for obj in &scene.objects {
                let col = ((obj.position.x - spec.origin.x) / spec.cell_size).floor() as i64;
                if col < 0 || col >= spec.dims[0] as i64 {
                    continue;
                }
                for j in 0..spec.dims[1] {
                    let c = spec.cell_index(col as usize, j);
                    weights[c] *= 1.0 + params.rho * ALIGNMENT_WEIGHT;
                }
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            break; // floor fully covered
        }
        let mut u = rng.random::<f64>() * total;
        let mut cell = spec.n_cells() - 1;
        for (c, &w) in weights.iter().enumerate() {
            if u < w {
                cell = c;
                break;
            }
            u -= w;
        }
        let (i, j) = (cell / spec.dims[1], cell % spec.dims[1]);
        let (px, py) = spec.cell_to_world_center(i, j);
        let point = Point2::new(px, py);

        let yaw = rng.random_range(0.0..std::f64::consts::PI);
        let jx = rng.random_range(params.size_jitter.0..=params.size_jitter.1);
        let jy = rng.random_range(params.size_jitter.0..=params.size_jitter.1);
        let jh = rng.random_range(params.size_jitter.0..=params.size_jitter.1);

        // Class draw weights: base probability, doubled when the point is
        // inside the radius of influence of an object whose class lists
        // this class as an affinity.
        let mut class_weights = Vec::with_capacity(params.catalog.len());
        let mut footprints = Vec::with_capacity(params.catalog.len());
        for (ci, class) in params.catalog.iter().enumerate() {
            let class_id = ci as u16 + 1;
            let mut w = class.base_prob;
            let boosted = scene.objects.iter().any(|o| {
                let oc = &params.catalog[o.class_id as usize - 1];
                oc.affinity.contains(&class_id)
                    && (o.position - point).norm() <= oc.radius_of_influence
            });
            if boosted {
                w *= AFFINITY_MULTIPLIER;
            }
            let scaled: Vec<Point2<f64>> = class
                .footprint
                .iter()
                .map(|p| Point2::new(p.x * jx, p.y * jy))
                .collect();
            let fp = geom2d::transform(&scaled, yaw, Vector2::zeros());
            if !fits_exactly(&scene, &fp, point) {
                w = 0.0;
            }
            class_weights.push(w);
            footprints.push(fp);
        }
        let wtotal: f64 = class_weights.iter().sum();
        if wtotal <= 0.0 {
            continue; // nothing placeable here; iteration spent
        }
        let mut u = rng.random::<f64>() * wtotal;
        let mut chosen = params.catalog.len() - 1;
        for (c, &w) in class_weights.iter().enumerate() {
            if u < w {
                chosen = c;
                break;
            }
            u -= w;
        }
        let class = &params.catalog[chosen];
        let height = (class.height * jh).min(scene.walls.interior_height());
        // Store the jittered, yawed footprint with yaw folded in; the
        // object's own yaw field stays 0 so translation-only dynamics see
        // the final shape directly.
        scene.objects.push(SceneObject {
            class_id: chosen as u16 + 1,
            footprint: footprints[chosen].clone(),
            height,
            position: point,
            yaw: 0.0,
        });
    }
    scene.validate()?;
    Ok(scene)
}

/// Rejection-sample a scene in which at least one object is invisible
/// from every candidate viewpoint. Falls back to the attempt with the
/// fewest visible pixels on its most hidden object when the cap is hit.
pub fn sample_high_occlusion_scene(
    params: &GenParams,
    seed: u64,
    views: &[Viewpoint],
    max_attempts: usize,
) -> Result<Scene> {
    let mut seed_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Scene)> = None;
    for _ in 0..max_attempts.max(1) {
        let scene = sample_scene(params, seed_rng.next_u64())?;
        if scene.objects.is_empty() {
            continue;
        }
        let hidden = min_object_visibility(&scene, views);
        if hidden == 0 {
            return Ok(scene);
        }
        if best.as_ref().map(|(v, _)| hidden < *v).unwrap_or(true) {
            best = Some((hidden, scene));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::InvalidParams("no candidate scene produced".into()))
}

/// Fewest visible pixels over all objects, summed across views (0 means
/// some object cannot be seen from anywhere).
pub fn min_object_visibility(scene: &Scene, views: &[Viewpoint]) -> usize {
    let raster = rasterize(scene);
    let mut seen = vec![0usize; scene.objects.len()];
    for v in views {
        let (_, instances) = render_raster(scene, &raster, v);
        for &inst in &instances {
            if inst >= 0 {
                seen[inst as usize] += 1;
            }
        }
        if seen.iter().all(|&s| s > 0) {
            break;
        }
    }
    seen.into_iter().min().unwrap_or(0)
}
