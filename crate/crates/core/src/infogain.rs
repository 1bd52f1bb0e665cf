//! Occlusion-aware volumetric information gain over candidate views and
//! view pairs, the best-push search, and the semantic-entropy regularizer.

use rand::Rng;
use rayon::prelude::*;

use crate::belief::EvidentialBelief;
use crate::camera::Viewpoint;
use crate::error::{Error, Result};
use crate::grid::{bernoulli_entropy_unchecked, traverse_ray_spans};
use crate::manip_update::{update_manipulation, PropagationResult};
use crate::push::PushAction;

/// Rays stop once the accumulated visibility drops below this.
pub const VIS_CUTOFF: f64 = 0.01;

/// Per-view sparse map of the maximum visibility weight each voxel
/// attained over the view's rays.
struct WeightMap {
    /// Sorted (voxel, weight) pairs.
    entries: Vec<(u32, f64)>,
}

fn view_weight_map(belief: &EvidentialBelief, v: &Viewpoint, ray_stride: usize) -> WeightMap {
    let spec = &belief.spec;
    let stride = ray_stride.max(1);
    let mut wmax = vec![0.0f64; spec.n_voxels()];
    let mut touched: Vec<u32> = Vec::new();
    let origin = v.position();
    let mut pv = 0;
    while pv < v.height {
        let mut pu = 0;
        while pu < v.width {
            let dir = v.pixel_ray(pu, pv);
            let spans = traverse_ray_spans(spec, origin, dir, v.max_range)
                .expect("pixel rays are unit vectors");
            let mut p_vis = 1.0;
            for span in &spans {
                let vox = spec.voxel_index(span.idx[0], span.idx[1], span.idx[2]);
                if p_vis > wmax[vox] {
                    if wmax[vox] == 0.0 {
                        touched.push(vox as u32);
                    }
                    wmax[vox] = p_vis;
                }
                p_vis *= 1.0 - belief.occupancy_mean(vox);
                if p_vis < VIS_CUTOFF {
                    break;
                }
            }
            pu += stride;
        }
        pv += stride;
    }
    touched.sort_unstable();
    WeightMap {
        entries: touched.into_iter().map(|vox| (vox, wmax[vox as usize])).collect(),
    }
}

fn gain_of(map: &WeightMap, belief: &EvidentialBelief) -> f64 {
    map.entries
        .iter()
        .map(|&(vox, w)| w * bernoulli_entropy_unchecked(belief.occupancy_mean(vox as usize)))
        .sum()
}

/// Merge two weight maps, taking the per-voxel maximum weight.
fn merged_gain(a: &WeightMap, b: &WeightMap, belief: &EvidentialBelief) -> f64 {
    let mut gain = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.entries.len() || j < b.entries.len() {
        let (vox, w) = if j >= b.entries.len()
            || (i < a.entries.len() && a.entries[i].0 < b.entries[j].0)
        {
            let e = a.entries[i];
            i += 1;
            e
        } else if i >= a.entries.len() || b.entries[j].0 < a.entries[i].0 {
            let e = b.entries[j];
            j += 1;
            e
        } else {
            let e = (a.entries[i].0, a.entries[i].1.max(b.entries[j].1));
            i += 1;
            j += 1;
            e
        };
        gain += w * bernoulli_entropy_unchecked(belief.occupancy_mean(vox as usize));
    }
    gain
}

/// Expected visible occupancy entropy from one view: each voxel counts
/// with its best visibility weight over the view's rays.
pub fn view_gain(belief: &EvidentialBelief, v: &Viewpoint, ray_stride: usize) -> f64 {
    let map = view_weight_map(belief, v, ray_stride);
    gain_of(&map, belief)
}

/// Joint gain of two views: per-voxel maximum visibility over the rays of
/// both, each voxel counted once.
pub fn pair_gain(
    belief: &EvidentialBelief,
    v1: &Viewpoint,
    v2: &Viewpoint,
    ray_stride: usize,
) -> f64 {
    let a = view_weight_map(belief, v1, ray_stride);
    let b = view_weight_map(belief, v2, ray_stride);
    merged_gain(&a, &b, belief)
}

/// Best ordered view pair by exhaustive maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct BestViewPair {
    pub first: usize,
    pub second: usize,
    pub gain: f64,
}

/// Exhaustive argmax over ordered pairs of distinct views. Pair gain is
/// symmetric, but only the first view gets executed this step, so among
/// equal-gain pairs the one whose first view is individually more
/// informative wins; remaining ties go to the lowest indices.
pub fn best_view_pair(
    belief: &EvidentialBelief,
    views: &[Viewpoint],
    ray_stride: usize,
) -> Result<BestViewPair> {
    if views.len() < 2 {
        return Err(Error::TooFewViews { needed: 2, got: views.len() });
    }
    let maps: Vec<WeightMap> = views
        .par_iter()
        .map(|v| view_weight_map(belief, v, ray_stride))
        .collect();
    let singles: Vec<f64> = maps.iter().map(|m| gain_of(m, belief)).collect();
    let mut best = BestViewPair { first: 0, second: 1, gain: f64::NEG_INFINITY };
    let mut best_single = f64::NEG_INFINITY;
    for i in 0..views.len() {
        for j in 0..views.len() {
            if i == j {
                continue;
            }
            let g = merged_gain(&maps[i], &maps[j], belief);
            if g > best.gain || (g == best.gain && singles[i] > best_single) {
                best = BestViewPair { first: i, second: j, gain: g };
                best_single = singles[i];
            }
        }
    }
    Ok(best)
}

/// Best push followed by its best view, with the predicted belief.
#[derive(Debug, Clone)]
pub struct BestPush {
    pub push_index: usize,
    pub view_index: usize,
    pub gain: f64,
    pub predicted: PropagationResult,
}

/// Score every candidate push by propagating the belief through it and
/// taking the most informative single view on the predicted belief.
/// Candidates run on independent seeded streams, so the argmax is
/// deterministic for a fixed master rng state.
pub fn best_push<R: Rng>(
    belief: &EvidentialBelief,
    pushes: &[PushAction],
    views: &[Viewpoint],
    n_samples: usize,
    ray_stride: usize,
    rng: &mut R,
) -> Result<BestPush> {
    if pushes.is_empty() {
        return Err(Error::NoPushCandidates);
    }
    if views.is_empty() {
        return Err(Error::TooFewViews { needed: 1, got: 0 });
    }
    let seeds: Vec<u64> = (0..pushes.len()).map(|_| rng.next_u64()).collect();
    let scored: Vec<Result<(usize, f64, PropagationResult)>> = pushes
        .par_iter()
        .enumerate()
        .map(|(pi, push)| {
            let mut prng = rand_chacha::ChaCha8Rng::seed_from_u64(seeds[pi]);
            let predicted = update_manipulation(belief, push, n_samples, &mut prng)?;
            let mut best_view = 0;
            let mut best_gain = f64::NEG_INFINITY;
            for (vi, view) in views.iter().enumerate() {
                let g = view_gain(&predicted.belief, view, ray_stride);
                if g > best_gain {
                    best_gain = g;
                    best_view = vi;
                }
            }
            Ok((best_view, best_gain, predicted))
        })
        .collect();

    let mut best: Option<BestPush> = None;
    for (pi, entry) in scored.into_iter().enumerate() {
        let (view_index, gain, predicted) = entry?;
        let better = match &best {
            None => true,
            Some(b) => gain > b.gain,
        };
        if better {
            best = Some(BestPush { push_index: pi, view_index, gain, predicted });
        }
    }
    Ok(best.expect("at least one push was scored"))
}

/// Semantic-entropy change `H(before) - H(after)`; negative when the push
/// injects uncertainty.
pub fn reg_term(before: &EvidentialBelief, after: &EvidentialBelief) -> Result<f64> {
    if !before.spec.same_geometry(&after.spec) {
        return Err(Error::DimensionMismatch(
            "reg_term requires beliefs on the same grid".into(),
        ));
    }
    Ok(before.semantic_entropy() - after.semantic_entropy())
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::new_uniform_belief;
    use crate::grid::GridSpec;
    use nalgebra::{Point3, Vector2};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn single_pixel_camera(eye: Point3<f64>, target: Point3<f64>) -> Viewpoint {
        Viewpoint::look_at(eye, target, 1.0, 1.0, 1, 1, 2.0).unwrap()
    }

    fn certain_belief(spec: &GridSpec) -> EvidentialBelief {
        let mut b = new_uniform_belief(spec);
        for v in 0..spec.n_voxels() {
            b.beta[v] = 1e12;
        }
        b
    }

    #[test]
    fn certain_belief_has_zero_gain() {
        let spec = GridSpec::default_shelf();
        let b = certain_belief(&spec);
        for v in crate::camera::default_view_grid(&spec).iter().take(8) {
            assert!(view_gain(&b, v, 4) < 1e-6);
        }
    }

    #[test]
    fn single_uncertain_voxel_gains_ln2() {
        let spec = GridSpec::default_shelf();
        let mut b = certain_belief(&spec);
        // One uniform voxel dead ahead of a single-pixel camera.
        let idx = [20usize, 10, 10];
        let v = spec.voxel_index(idx[0], idx[1], idx[2]);
        b.alpha[v] = 1.0;
        b.beta[v] = 1.0;
        let target = spec.index_to_world_center(idx);
        let cam = single_pixel_camera(Point3::new(target.x, -0.2, target.z), target);
        let g = view_gain(&b, &cam, 1);
        assert!((g - std::f64::consts::LN_2).abs() < 1e-6, "gain {g}");
    }

    #[test]
    fn uniform_column_matches_geometric_sum() {
        let spec = GridSpec::new(Point3::origin(), 0.02, [1, 1, 5], 2).unwrap();
        let b = new_uniform_belief(&spec);
        let cam = single_pixel_camera(Point3::new(0.01, 0.01, -0.1), Point3::new(0.01, 0.01, 0.1));
        let g = view_gain(&b, &cam, 1);
        let expected: f64 = (0..5).map(|k| 0.5f64.powi(k) * std::f64::consts::LN_2).sum();
        assert!((g - expected).abs() < 1e-9, "gain {g} vs {expected}");
        assert!((expected - 1.342972662334894).abs() < 1e-12);
    }

    #[test]
    fn pair_gain_with_self_is_view_gain() {
        let spec = GridSpec::default_shelf();
        let b = new_uniform_belief(&spec);
        let views = crate::camera::default_view_grid(&spec);
        let single = view_gain(&b, &views[7], 4);
        let pair = pair_gain(&b, &views[7], &views[7], 4);
        assert!((single - pair).abs() < 1e-12);
    }

    #[test]
    fn pair_gain_union_bounds() {
        let spec = GridSpec::default_shelf();
        let views = crate::camera::default_view_grid(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let mut b = new_uniform_belief(&spec);
            for v in 0..spec.n_voxels() {
                b.alpha[v] = rng.random_range(1.0..20.0);
                b.beta[v] = rng.random_range(1.0..20.0);
            }
            let i = rng.random_range(0..views.len());
            let mut j = rng.random_range(0..views.len());
            if j == i {
                j = (j + 1) % views.len();
            }
            let gi = view_gain(&b, &views[i], 4);
            let gj = view_gain(&b, &views[j], 4);
            let gp = pair_gain(&b, &views[i], &views[j], 4);
            assert!(gp >= gi.max(gj) - 1e-9, "pair {gp} < max({gi},{gj})");
            assert!(gp <= gi + gj + 1e-9, "pair {gp} > sum({gi},{gj})");
            assert!(gp >= 0.0);
        }
    }

    #[test]
    fn disjoint_views_sum_exactly() {
        // Two single-pixel cameras staring down disjoint columns.
        let spec = GridSpec::new(Point3::origin(), 0.02, [2, 1, 5], 2).unwrap();
        let b = new_uniform_belief(&spec);
        let c1 = single_pixel_camera(Point3::new(0.01, 0.01, -0.1), Point3::new(0.01, 0.01, 0.1));
        let c2 = single_pixel_camera(Point3::new(0.03, 0.01, -0.1), Point3::new(0.03, 0.01, 0.1));
        let g1 = view_gain(&b, &c1, 1);
        let g2 = view_gain(&b, &c2, 1);
        let gp = pair_gain(&b, &c1, &c2, 1);
        assert!((gp - (g1 + g2)).abs() < 1e-12);
    }

    /// Independent reimplementation of pair scoring with hash maps.
    fn pair_gain_reference(
        belief: &EvidentialBelief,
        v1: &Viewpoint,
        v2: &Viewpoint,
        stride: usize,
    ) -> f64 {
        let spec = &belief.spec;
        let mut weights: HashMap<usize, f64> = HashMap::new();
        for cam in [v1, v2] {
            let origin = cam.position();
            let mut pv = 0;
            while pv < cam.height {
                let mut pu = 0;
                while pu < cam.width {
                    let spans =
                        traverse_ray_spans(spec, origin, cam.pixel_ray(pu, pv), cam.max_range)
                            .unwrap();
                    let mut p_vis = 1.0;
                    for s in &spans {
                        let vox = spec.voxel_index(s.idx[0], s.idx[1], s.idx[2]);
                        let e = weights.entry(vox).or_insert(0.0);
                        if p_vis > *e {
                            *e = p_vis;
                        }
                        p_vis *= 1.0 - belief.occupancy_mean(vox);
                        if p_vis < VIS_CUTOFF {
                            break;
                        }
                    }
                    pu += stride;
                }
                pv += stride;
            }
        }
        weights
            .iter()
            .map(|(&vox, &w)| w * bernoulli_entropy_unchecked(belief.occupancy_mean(vox)))
            .sum()
    }

    #[test]
    fn best_view_pair_matches_brute_force() {
        let spec = GridSpec::default_shelf();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut b = new_uniform_belief(&spec);
        for v in 0..spec.n_voxels() {
            b.alpha[v] = rng.random_range(1.0..8.0);
            b.beta[v] = rng.random_range(1.0..8.0);
        }
        let views: Vec<Viewpoint> = crate::camera::default_view_grid(&spec)
            .into_iter()
            .step_by(20)
            .collect();
        assert_eq!(views.len(), 3);
        let got = best_view_pair(&b, &views, 2).unwrap();
        let mut want = (0, 1, f64::NEG_INFINITY);
        for i in 0..views.len() {
            for j in (i + 1)..views.len() {
                let g = pair_gain_reference(&b, &views[i], &views[j], 2);
                if g > want.2 {
                    want = (i, j, g);
                }
            }
        }
        // Pair gain is symmetric; compare the unordered pair.
        let got_pair = if got.first < got.second {
            (got.first, got.second)
        } else {
            (got.second, got.first)
        };
        assert_eq!(got_pair, (want.0, want.1));
        assert!((got.gain - want.2).abs() < 1e-9);
    }

    #[test]
    fn all_certain_returns_first_pair() {
        let spec = GridSpec::default_shelf();
        // Certainly-occupied everywhere: the mean rounds to exactly 1.0,
        // so every entropy (and every pair gain) is exactly zero and the
        // tie resolves to the lowest index pair.
        let mut b = new_uniform_belief(&spec);
        for v in 0..spec.n_voxels() {
            b.alpha[v] = 1e300;
        }
        let views = crate::camera::default_view_grid(&spec);
        let got = best_view_pair(&b, &views, 4).unwrap();
        assert_eq!((got.first, got.second), (0, 1));
        assert_eq!(got.gain, 0.0);
    }

    #[test]
    fn dominant_view_wins() {
        let spec = GridSpec::default_shelf();
        let mut b = certain_belief(&spec);
        // Uncertainty only in one deep corner column.
        for k in 0..spec.dims[2] {
            let v = spec.voxel_index(2, 15, k);
            b.alpha[v] = 1.0;
            b.beta[v] = 1.0;
        }
        let target = spec.index_to_world_center([2, 15, 5]);
        let dominant = single_pixel_camera(Point3::new(target.x, -0.1, target.z), target);
        // Weak views stare at certain free space.
        let weak1 = single_pixel_camera(Point3::new(0.7, -0.1, 0.2), Point3::new(0.7, 0.2, 0.2));
        let weak2 = single_pixel_camera(Point3::new(0.6, -0.1, 0.3), Point3::new(0.6, 0.2, 0.3));
        let views = vec![weak1, dominant, weak2];
        let got = best_view_pair(&b, &views, 1).unwrap();
        assert_eq!(got.first, 1);
    }

    #[test]
    fn reg_term_values() {
        let spec = GridSpec::new(Point3::origin(), 0.02, [2, 2, 1], 3).unwrap();
        let uniform = new_uniform_belief(&spec);
        assert_eq!(reg_term(&uniform, &uniform).unwrap(), 0.0);
        let mut certain = uniform.clone();
        for c in 0..spec.n_cells() {
            certain.sem[c * 3 + 1] = 1e12;
        }
        let n_cells = spec.n_cells() as f64;
        let full = n_cells * 3f64.ln();
        let r = reg_term(&certain, &uniform).unwrap();
        assert!((r - (-full)).abs() < 1e-6, "certain -> uniform: {r}");
        let r2 = reg_term(&uniform, &certain).unwrap();
        assert!((r2 - full).abs() < 1e-6, "uniform -> certain: {r2}");

        let other = new_uniform_belief(&GridSpec::new(Point3::origin(), 0.02, [3, 2, 1], 3).unwrap());
        assert!(reg_term(&uniform, &other).is_err());
    }

    #[test]
    fn view_gain_ignores_semantic_relabeling() {
        let spec = GridSpec::default_shelf();
        let mut b = new_uniform_belief(&spec);
        let views = crate::camera::default_view_grid(&spec);
        let g0 = view_gain(&b, &views[0], 4);
        for cell in 0..spec.n_cells() {
            b.sem[cell * spec.n_classes + 3] = 500.0;
        }
        assert_eq!(view_gain(&b, &views[0], 4), g0);
    }

    #[test]
    fn clearing_push_beats_null_push() {
        let spec = GridSpec::default_shelf();
        // Certain occluder slab in front of an uncertain block; everything
        // else certain free.
        let mut b = certain_belief(&spec);
        // Occluder: lateral 18..23, depth 4..6, full height certain occupied.
        for i in 18..23 {
            for j in 4..6 {
                for k in 0..spec.dims[2] {
                    let v = spec.voxel_index(i, j, k);
                    b.alpha[v] = 1e12;
                    b.beta[v] = 1.0;
                }
            }
        }
        // Uncertain block behind it: depth 8..12.
        for i in 18..23 {
            for j in 8..12 {
                for k in 0..8 {
                    let v = spec.voxel_index(i, j, k);
                    b.alpha[v] = 1.0;
                    b.beta[v] = 1.0;
                }
            }
        }
        // Frontal camera staring straight at the occluder.
        let cam = Viewpoint::look_at(
            Point3::new(0.41, -0.3, 0.1),
            Point3::new(0.41, 0.2, 0.1),
            40.0,
            40.0,
            64,
            48,
            2.0,
        )
        .unwrap();
        let views = vec![cam];
        // A push that shoves the occluder sideways out of the line of
        // sight, and a null push through free space.
        let clearing = PushAction::new(
            &spec,
            Point3::new(0.33, 0.09, 0.05),
            Vector2::new(1.0, 0.0),
            0.15,
        )
        .unwrap();
        let null = PushAction::new(
            &spec,
            Point3::new(0.1, 0.3, 0.05),
            Vector2::new(0.0, 1.0),
            0.05,
        )
        .unwrap();
        let pushes = vec![clearing, null];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let got = best_push(&b, &pushes, &views, 16, 1, &mut rng).unwrap();
        assert_eq!(got.push_index, 0, "the clearing push must win");

        // Quantify the margin directly.
        let mut r1 = ChaCha8Rng::seed_from_u64(100);
        let cleared = update_manipulation(&b, &pushes[0], 16, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(101);
        let nulled = update_manipulation(&b, &pushes[1], 16, &mut r2).unwrap();
        let g_clear = view_gain(&cleared.belief, &views[0], 1);
        let g_null = view_gain(&nulled.belief, &views[0], 1);
        assert!(g_clear - g_null > 0.1, "margin {} too small", g_clear - g_null);
    }

    #[test]
    fn best_push_ties_break_to_lowest_index_and_are_deterministic() {
        let spec = GridSpec::default_shelf();
        let b = certain_belief(&spec);
        let views = crate::camera::default_view_grid(&spec)[..4].to_vec();
        let push = |x: f64| {
            PushAction::new(&spec, Point3::new(x, 0.3, 0.05), Vector2::new(0.0, 1.0), 0.05)
                .unwrap()
        };
        let pushes = vec![push(0.2), push(0.4), push(0.6)];
        let a = best_push(&b, &pushes, &views, 8, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.push_index, 0, "all-equal gains tie-break to index 0");
        let c = best_push(&b, &pushes, &views, 8, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.push_index, c.push_index);
        assert_eq!(a.view_index, c.view_index);
        assert_eq!(a.gain, c.gain);
    }
}
