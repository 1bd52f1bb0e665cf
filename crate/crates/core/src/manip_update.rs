//! Manipulation belief update: explicit Monte Carlo marginalization.
//! Maps are sampled from the factorized belief, pushed through cell-level
//! grid dynamics, and re-marginalized; per-cell change frequencies deflate
//! the evidence strength where the outcome was uncertain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{EvidentialBelief, SemanticMap};
use crate::error::{Error, Result};
use crate::geom2d;
use crate::grid::BACKGROUND_CLASS;
use crate::push::{plate_polygon, PushAction};

/// A map drawn from the belief; same invariants as [`SemanticMap`].
pub type SampledMap = SemanticMap;

/// Evidence strength ceiling carried through a push in unchanged regions.
pub const STRENGTH_CAP: f64 = 50.0;
/// Evidence strength floor where the push outcome was fully uncertain.
pub const STRENGTH_MIN: f64 = 2.0;

/// Result of propagating a belief through a push.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub belief: EvidentialBelief,
    /// Per-cell probability that the push changed the cell (occupancy
    /// anywhere in its column, or its class).
    pub diff: Vec<f64>,
    /// Raw Monte Carlo occupancy marginals (occupied fraction per voxel),
    /// before conversion back to evidential parameters.
    pub posterior_occ: Vec<f64>,
}

/// Draw one map from the belief: voxel occupancies are independent
/// Bernoulli draws of the occupancy mean; each occupied column draws its
/// class from the cell's Dirichlet mean; free columns are background.
pub fn sample_map<R: Rng>(belief: &EvidentialBelief, rng: &mut R) -> SampledMap {
    let spec = &belief.spec;
    let mut occ = vec![false; spec.n_voxels()];
    for (v, o) in occ.iter_mut().enumerate() {
        *o = rng.random::<f64>() < belief.occupancy_mean(v);
    }
    let mut sem = vec![BACKGROUND_CLASS; spec.n_cells()];
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            let column_occupied = (0..spec.dims[2]).any(|k| occ[spec.voxel_index(i, j, k)]);
            if !column_occupied {
                continue;
            }
            let cell = spec.cell_index(i, j);
            let params = belief.sem_params(cell);
            let total: f64 = params.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut class = spec.n_classes - 1;
            for (c, &l) in params.iter().enumerate() {
                if u < l {
                    class = c;
                    break;
                }
                u -= l;
            }
            sem[cell] = class as u16;
        }
    }
    SampledMap { spec: spec.clone(), occ, sem }
}

/// Cell-level push dynamics: 4-connected components of occupied columns
/// move cell-by-cell along the quantized push direction, cascading into
/// downstream components; all motion stops when any moving cell would
/// leave the walls. Columns carry their occupancy profile and class.
pub fn grid_dynamics(map: &SampledMap, push: &PushAction) -> SampledMap {
    let spec = &map.spec;
    let h = spec.dims[0] as i64;
    let w = spec.dims[1] as i64;

    // Occupied-column components (4-connectivity), in scan order.
    let mut owner = vec![-1i32; spec.n_cells()];
    let mut comps: Vec<Vec<(i64, i64)>> = Vec::new();
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            if owner[spec.cell_index(i, j)] >= 0 || !map.column_occupied(i, j) {
                continue;
            }
            let id = comps.len() as i32;
            let mut stack = vec![(i as i64, j as i64)];
            let mut cells = Vec::new();
            owner[spec.cell_index(i, j)] = id;
            while let Some((ci, cj)) = stack.pop() {
                cells.push((ci, cj));
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (ni, nj) = (ci + di, cj + dj);
                    if ni < 0 || nj < 0 || ni >= h || nj >= w {
                        continue;
                    }
                    let nc = spec.cell_index(ni as usize, nj as usize);
                    if owner[nc] < 0 && map.column_occupied(ni as usize, nj as usize) {
                        owner[nc] = id;
                        stack.push((ni, nj));
                    }
                }
            }
            comps.push(cells);
        }
    }

    let n_comps = comps.len();
    let mut comp_offset = vec![(0i64, 0i64); n_comps];

    // Quantized plate travel: unit cell steps along the push direction.
    let target = (
        push.direction.x * push.distance / spec.cell_size,
        push.direction.y * push.distance / spec.cell_size,
    );
    let steps = unit_steps(target);

    let start = push.start_xy();
    let mut plate_cum = (0i64, 0i64);
    'sweep: for &step in &steps {
        let next_cum = (plate_cum.0 + step.0, plate_cum.1 + step.1);
        let plate_cells = rasterize_plate(spec, start, push, next_cum);

        // Components overlapping the advanced plate must move; moving
        // components recruit the components they would run into.
        let mut moving = vec![false; n_comps];
        for &(pi, pj) in &plate_cells {
            if pi >= 0 && pj >= 0 && pi < h && pj < w {
                let o = owner[spec.cell_index(pi as usize, pj as usize)];
                if o >= 0 {
                    moving[o as usize] = true;
                }
            }
        }
        loop {
            let mut grew = false;
            for c in 0..n_comps {
                if !moving[c] {
                    continue;
                }
                for &(ci, cj) in &comps[c] {
                    let (ni, nj) = (ci + step.0, cj + step.1);
                    if ni < 0 || nj < 0 || ni >= h || nj >= w {
                        continue;
                    }
                    let o = owner[spec.cell_index(ni as usize, nj as usize)];
                    if o >= 0 && o as usize != c && !moving[o as usize] {
                        moving[o as usize] = true;
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }

        // Wall rule: any moving cell leaving the grid stops everything.
        for c in 0..n_comps {
            if !moving[c] {
                continue;
            }
            for &(ci, cj) in &comps[c] {
                let (ni, nj) = (ci + step.0, cj + step.1);
                if ni < 0 || nj < 0 || ni >= h || nj >= w {
                    break 'sweep;
                }
            }
        }

        // Commit: clear old owners, translate, set new owners.
        for c in 0..n_comps {
            if !moving[c] {
                continue;
            }
            for &(ci, cj) in &comps[c] {
                owner[spec.cell_index(ci as usize, cj as usize)] = -1;
            }
        }
        for c in 0..n_comps {
            if !moving[c] {
                continue;
            }
            for cell in comps[c].iter_mut() {
                cell.0 += step.0;
                cell.1 += step.1;
            }
            for &(ci, cj) in &comps[c] {
                owner[spec.cell_index(ci as usize, cj as usize)] = c as i32;
            }
            comp_offset[c].0 += step.0;
            comp_offset[c].1 += step.1;
        }
        plate_cum = next_cum;
    }

    // Rebuild the map from component offsets.
    let mut occ = vec![false; spec.n_voxels()];
    let mut sem = vec![BACKGROUND_CLASS; spec.n_cells()];
    for c in 0..n_comps {
        let off = comp_offset[c];
        for &(ci, cj) in &comps[c] {
            let (oi, oj) = ((ci - off.0) as usize, (cj - off.1) as usize);
            let (ni, nj) = (ci as usize, cj as usize);
            sem[spec.cell_index(ni, nj)] = map.sem[spec.cell_index(oi, oj)];
            for k in 0..spec.dims[2] {
                occ[spec.voxel_index(ni, nj, k)] = map.occ[spec.voxel_index(oi, oj, k)];
            }
        }
    }
    SampledMap { spec: spec.clone(), occ, sem }
}

/// 4-connected unit steps approximating the segment from the origin to
/// `target` (in cells), by midpoint comparison of fractional progress.
fn unit_steps(target: (f64, f64)) -> Vec<(i64, i64)> {
    let qx = target.0.round() as i64;
    let qy = target.1.round() as i64;
    let (ax, ay) = (qx.abs(), qy.abs());
    let sx = qx.signum();
    let sy = qy.signum();
    let mut steps = Vec::with_capacity((ax + ay) as usize);
    let (mut x, mut y) = (0i64, 0i64);
    while x < ax || y < ay {
        if y >= ay || (x < ax && (2 * x + 1) * ay <= (2 * y + 1) * ax) {
            x += 1;
            steps.push((sx, 0));
        } else {
            y += 1;
            steps.push((0, sy));
        }
    }
    steps
}

/// Cells whose square intersects the plate polygon at the given cumulative
/// cell offset (conservative for the thin plate).
fn rasterize_plate(
    spec: &crate::grid::GridSpec,
    start: nalgebra::Point2<f64>,
    push: &PushAction,
    cum: (i64, i64),
) -> Vec<(i64, i64)> {
    let offset = nalgebra::Vector2::new(
        cum.0 as f64 * spec.cell_size,
        cum.1 as f64 * spec.cell_size,
    );
    let plate = geom2d::translate(&plate_polygon(start, push.direction, 0.0), offset);
    let (lo, hi) = geom2d::aabb(&plate);
    let i0 = ((lo.x - spec.origin.x) / spec.cell_size).floor() as i64 - 1;
    let j0 = ((lo.y - spec.origin.y) / spec.cell_size).floor() as i64 - 1;
    let i1 = ((hi.x - spec.origin.x) / spec.cell_size).ceil() as i64 + 1;
    let j1 = ((hi.y - spec.origin.y) / spec.cell_size).ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let cell = geom2d::rect(
                nalgebra::Point2::new(
                    spec.origin.x + i as f64 * spec.cell_size,
                    spec.origin.y + j as f64 * spec.cell_size,
                ),
                nalgebra::Point2::new(
                    spec.origin.x + (i + 1) as f64 * spec.cell_size,
                    spec.origin.y + (j + 1) as f64 * spec.cell_size,
                ),
            );
            if geom2d::intersection_area(&cell, &plate) > 1e-12 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Monte Carlo belief propagation through a push. Samples are drawn on
/// independent rng streams seeded from `rng`, so the reduction is
/// deterministic for a fixed seed regardless of parallel schedule.
pub fn update_manipulation<R: Rng>(
    belief: &EvidentialBelief,
    push: &PushAction,
    n_samples: usize,
    rng: &mut R,
) -> Result<PropagationResult> {
    if n_samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let spec = &belief.spec;
    let n_vox = spec.n_voxels();
    let n_cells = spec.n_cells();
    let n_classes = spec.n_classes;
    let seeds: Vec<u64> = (0..n_samples).map(|_| rng.next_u64()).collect();

    #[derive(Clone)]
    struct Counts {
        occ: Vec<u32>,
        sem: Vec<u32>,
        changed: Vec<u32>,
    }
    let zero = || Counts {
        occ: vec![0; n_vox],
        sem: vec![0; n_cells * n_classes],
        changed: vec![0; n_cells],
    };
    let merge = |mut a: Counts, b: Counts| {
        for (x, y) in a.occ.iter_mut().zip(&b.occ) {
            *x += y;
        }
        for (x, y) in a.sem.iter_mut().zip(&b.sem) {
            *x += y;
        }
        for (x, y) in a.changed.iter_mut().zip(&b.changed) {
            *x += y;
        }
        a
    };

    let counts = seeds
        .par_iter()
        .fold(zero, |mut acc, &seed| {
            let mut srng = ChaCha8Rng::seed_from_u64(seed);
            let pre = sample_map(belief, &mut srng);
            let post = grid_dynamics(&pre, push);
            for (v, &o) in post.occ.iter().enumerate() {
                if o {
                    acc.occ[v] += 1;
                }
            }
            for i in 0..spec.dims[0] {
                for j in 0..spec.dims[1] {
                    let cell = spec.cell_index(i, j);
                    acc.sem[cell * n_classes + post.sem[cell] as usize] += 1;
                    let column_changed = (0..spec.dims[2]).any(|k| {
                        let v = spec.voxel_index(i, j, k);
                        pre.occ[v] != post.occ[v]
                    }) || pre.sem[cell] != post.sem[cell];
                    if column_changed {
                        acc.changed[cell] += 1;
                    }
                }
            }
            acc
        })
        .reduce(zero, merge);

    let n = n_samples as f64;
    let diff: Vec<f64> = counts.changed.iter().map(|&c| c as f64 / n).collect();
    let posterior_occ: Vec<f64> = counts.occ.iter().map(|&c| c as f64 / n).collect();

    let mut out = belief.clone();
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            let cell = spec.cell_index(i, j);
            let d = diff[cell];
            // Semantics: frequencies scaled to the blended strength.
            let s_prior: f64 = belief.sem_params(cell).iter().sum();
            let s_new = s_prior.min(STRENGTH_CAP) * (1.0 - d) + STRENGTH_MIN * d;
            for c in 0..n_classes {
                let f = counts.sem[cell * n_classes + c] as f64 / n;
                out.sem[cell * n_classes + c] = (f * s_new).max(1.0);
            }
            for k in 0..spec.dims[2] {
                let v = spec.voxel_index(i, j, k);
                let s_prior = belief.occupancy_strength(v);
                let s_new = s_prior.min(STRENGTH_CAP) * (1.0 - d) + STRENGTH_MIN * d;
                let m = posterior_occ[v];
                out.alpha[v] = (m * s_new).max(1.0);
                out.beta[v] = ((1.0 - m) * s_new).max(1.0);
            }
        }
    }
    out.enforce_floor();
    Ok(PropagationResult { belief: out, diff, posterior_occ })
}
