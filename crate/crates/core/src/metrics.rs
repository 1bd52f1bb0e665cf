//! Map-quality scoring: intersection-over-union, expected calibration
//! error, the evidential uncertainty-aware cross-entropy, and the
//! per-object audit used for final-map scoring.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::belief::{EvidentialBelief, SemanticMap};
use crate::error::{Error, Result};
use crate::geom2d;
use crate::grid::BACKGROUND_CLASS;
use crate::scene::Scene;

/// Occupancy IoU over voxels and mean per-class birds-eye IoU (background
/// excluded; classes absent from both sides are skipped).
pub fn miou(pred: &SemanticMap, gt: &SemanticMap) -> Result<(f64, f64)> {
    if !pred.spec.same_geometry(&gt.spec) {
        return Err(Error::DimensionMismatch("miou requires matching grids".into()));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (p, g) in pred.occ.iter().zip(&gt.occ) {
        if *p && *g {
            inter += 1;
        }
        if *p || *g {
            union += 1;
        }
    }
    let occ_iou = if union == 0 { 1.0 } else { inter as f64 / union as f64 };

    let n_classes = pred.spec.n_classes;
    let mut per_class = Vec::new();
    for c in 1..n_classes as u16 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (p, g) in pred.sem.iter().zip(&gt.sem) {
            let pc = *p == c;
            let gc = *g == c;
            if pc && gc {
                inter += 1;
            }
            if pc || gc {
                union += 1;
            }
        }
        if union > 0 {
            per_class.push(inter as f64 / union as f64);
        }
    }
    let sem_miou = if per_class.is_empty() {
        1.0
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    };
    Ok((occ_iou, sem_miou))
}

/// Mean expected calibration error: equal-width confidence bins over the
/// occupancy marginals plus one-vs-rest bins per non-background class
/// (background ground-truth cells excluded from the semantic part).
pub fn mece(belief: &EvidentialBelief, gt: &SemanticMap, bins: usize) -> Result<f64> {
    if !belief.spec.same_geometry(&gt.spec) {
        return Err(Error::DimensionMismatch("mece requires matching grids".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidParams("mece needs at least 2 bins".into()));
    }
    let spec = &belief.spec;
    let mut eces = Vec::new();

    let occ_pairs: Vec<(f64, bool)> = (0..spec.n_voxels())
        .map(|v| (belief.occupancy_mean(v), gt.occ[v]))
        .collect();
    eces.push(ece(&occ_pairs, bins));

    for c in 1..spec.n_classes {
        let mut pairs = Vec::new();
        for cell in 0..spec.n_cells() {
            if gt.sem[cell] == BACKGROUND_CLASS {
                continue;
            }
            let conf = belief.sem_mean(cell)[c];
            pairs.push((conf, gt.sem[cell] as usize == c));
        }
        if !pairs.is_empty() {
            eces.push(ece(&pairs, bins));
        }
    }
    Ok(eces.iter().sum::<f64>() / eces.len() as f64)
}

/// Binned calibration gap for probability forecasts of binary outcomes.
fn ece(pairs: &[(f64, bool)], bins: usize) -> f64 {
    let n = pairs.len();
    if n == 0 {
        return 0.0;
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hit_sum = vec![0usize; bins];
    for &(p, y) in pairs {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        conf_sum[b] += p;
        if y {
            hit_sum[b] += 1;
        }
    }
    let mut e = 0.0;
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let conf = conf_sum[b] / count[b] as f64;
        let acc = hit_sum[b] as f64 / count[b] as f64;
        e += count[b] as f64 / n as f64 * (acc - conf).abs();
    }
    e
}

/// Evidential uncertainty-aware cross-entropy of one cell:
/// `sum_j y_j (ln S - ln lambda_j) + epsilon * KL(Dir(lt) || Dir(1))`
/// with `lt = y + (1 - y) * lambda`.
pub fn evidential_ce(lambda: &[f64], y: &[f64], epsilon: f64) -> Result<f64> {
    if lambda.len() != y.len() || lambda.is_empty() {
        return Err(Error::DimensionMismatch("lambda and y lengths differ".into()));
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones != 1 || y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::NotOneHot);
    }
    if lambda.iter().any(|&l| !(l >= 1.0) || !l.is_finite()) {
        return Err(Error::InvalidParams("lambda components must be finite and >= 1".into()));
    }
    let s: f64 = lambda.iter().sum();
    let data_term: f64 = lambda
        .iter()
        .zip(y)
        .filter(|(_, &yj)| yj == 1.0)
        .map(|(&lj, _)| s.ln() - lj.ln())
        .sum();
    if epsilon == 0.0 {
        return Ok(data_term);
    }
    let tilde: Vec<f64> = lambda
        .iter()
        .zip(y)
        .map(|(&lj, &yj)| yj + (1.0 - yj) * lj)
        .collect();
    Ok(data_term + epsilon * dirichlet_kl_to_uniform(&tilde))
}

/// Closed-form `KL(Dir(a) || Dir(1))`.
fn dirichlet_kl_to_uniform(a: &[f64]) -> f64 {
    let k = a.len() as f64;
    let s: f64 = a.iter().sum();
    let mut kl = ln_gamma(s) - ln_gamma(k);
    for &aj in a {
        kl -= ln_gamma(aj);
        kl += (aj - 1.0) * (digamma(aj) - digamma(s));
    }
    kl
}

/// Counts from auditing every scene object against a predicted map, plus
/// predicted components matching nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ObjectAudit {
    pub correctly_found: usize,
    pub misclassified_found: usize,
    pub not_found: usize,
    pub hallucinated: usize,
}

/// Majority-rule audit: an object is found when more than half of its
/// ground-truth footprint cells are predicted occupied; found objects are
/// correct when the plurality class over those cells matches. Predicted
/// occupied components overlapping no object by half their own area count
/// as hallucinated.
pub fn object_audit(pred: &SemanticMap, scene: &Scene) -> Result<ObjectAudit> {
    if !pred.spec.same_geometry(&scene.spec) {
        return Err(Error::DimensionMismatch("audit requires matching grids".into()));
    }
    let spec = &scene.spec;
    let mut audit = ObjectAudit::default();

    // Ground-truth footprint cells per object.
    let mut gt_cells: Vec<Vec<usize>> = Vec::with_capacity(scene.objects.len());
    for obj in &scene.objects {
        let wf = obj.world_footprint();
        let mut cells = Vec::new();
        for i in 0..spec.dims[0] {
            for j in 0..spec.dims[1] {
                let (cx, cy) = spec.cell_to_world_center(i, j);
                if geom2d::contains_point_half_open(&wf, nalgebra::Point2::new(cx, cy)) {
                    cells.push(spec.cell_index(i, j));
                }
            }
        }
        gt_cells.push(cells);
    }

    let pred_col: Vec<bool> = {
        let mut v = vec![false; spec.n_cells()];
        for i in 0..spec.dims[0] {
            for j in 0..spec.dims[1] {
                v[spec.cell_index(i, j)] = pred.column_occupied(i, j);
            }
        }
        v
    };

    for (obj, cells) in scene.objects.iter().zip(&gt_cells) {
        if cells.is_empty() {
            audit.not_found += 1;
            continue;
        }
        let covered: Vec<usize> = cells.iter().copied().filter(|&c| pred_col[c]).collect();
        if (covered.len() as f64) <= cells.len() as f64 / 2.0 {
            audit.not_found += 1;
            continue;
        }
        // Plurality predicted class over the covered cells.
        let mut votes = vec![0usize; spec.n_classes];
        for &c in &covered {
            votes[pred.sem[c] as usize] += 1;
        }
        let plurality = votes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c as u16)
            .unwrap_or(BACKGROUND_CLASS);
        if plurality == obj.class_id {
            audit.correctly_found += 1;
        } else {
            audit.misclassified_found += 1;
        }
    }

    // Hallucinations: 4-connected predicted components whose overlap with
    // every object is under half of the component's own area.
    let mut seen = vec![false; spec.n_cells()];
    for i in 0..spec.dims[0] {
        for j in 0..spec.dims[1] {
            let c0 = spec.cell_index(i, j);
            if seen[c0] || !pred_col[c0] {
                continue;
            }
            let mut stack = vec![(i as i64, j as i64)];
            seen[c0] = true;
            let mut component = Vec::new();
            while let Some((ci, cj)) = stack.pop() {
                component.push(spec.cell_index(ci as usize, cj as usize));
                for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (ni, nj) = (ci + di, cj + dj);
                    if ni < 0
                        || nj < 0
                        || ni >= spec.dims[0] as i64
                        || nj >= spec.dims[1] as i64
                    {
                        continue;
                    }
                    let nc = spec.cell_index(ni as usize, nj as usize);
                    if !seen[nc] && pred_col[nc] {
                        seen[nc] = true;
                        stack.push((ni, nj));
                    }
                }
            }
            let matched = gt_cells.iter().any(|cells| {
                let overlap = component.iter().filter(|c| cells.contains(c)).count();
                overlap as f64 >= component.len() as f64 / 2.0 && overlap > 0
            });
            if !matched {
                audit.hallucinated += 1;
            }
        }
    }
    Ok(audit)
}

/// Welch's two-sample t-test, one-sided p-value for mean(a) > mean(b).
pub fn welch_t_pvalue_greater(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (nb - 1.0);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return if ma > mb { 0.0 } else { 1.0 };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    1.0 - dist.cdf(t)
}
