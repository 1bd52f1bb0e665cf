//! Evidential map beliefs: per-voxel Beta pseudo-counts for occupancy and
//! per-cell Dirichlet pseudo-counts for birds-eye semantics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{categorical_entropy, GridSpec, BACKGROUND_CLASS};

/// Minimum value of any evidential parameter.
pub const PARAM_FLOOR: f64 = 1.0;

/// The agent's map belief. Occupancy mean of voxel v is
/// `alpha[v] / (alpha[v] + beta[v])`; semantic means are normalized
/// Dirichlet components per birds-eye cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidentialBelief {
    pub spec: GridSpec,
    /// Beta alpha (occupied evidence), one per voxel.
    pub alpha: Vec<f64>,
    /// Beta beta (free evidence), one per voxel.
    pub beta: Vec<f64>,
    /// Dirichlet components, `n_classes` per birds-eye cell, cell-major.
    pub sem: Vec<f64>,
}

impl EvidentialBelief {
    /// Uninformed prior: all pseudo-counts set to one.
    pub fn new_uniform(spec: &GridSpec) -> Self {
        Self {
            spec: spec.clone(),
            alpha: vec![1.0; spec.n_voxels()],
            beta: vec![1.0; spec.n_voxels()],
            sem: vec![1.0; spec.n_cells() * spec.n_classes],
        }
    }

    #[inline]
    pub fn occupancy_mean(&self, v: usize) -> f64 {
        self.alpha[v] / (self.alpha[v] + self.beta[v])
    }

    /// Total occupancy evidence (Beta strength) of a voxel.
    #[inline]
    pub fn occupancy_strength(&self, v: usize) -> f64 {
        self.alpha[v] + self.beta[v]
    }

    /// Dirichlet components of a cell.
    #[inline]
    pub fn sem_params(&self, cell: usize) -> &[f64] {
        let n = self.spec.n_classes;
        &self.sem[cell * n..(cell + 1) * n]
    }

    /// Normalized semantic mean vector of a cell.
    pub fn sem_mean(&self, cell: usize) -> Vec<f64> {
        let params = self.sem_params(cell);
        let s: f64 = params.iter().sum();
        params.iter().map(|&l| l / s).collect()
    }

    /// Clamp every parameter to the evidential floor. Call after any
    /// in-place arithmetic on the raw parameter vectors.
    pub fn enforce_floor(&mut self) {
        for a in self.alpha.iter_mut().chain(self.beta.iter_mut()).chain(self.sem.iter_mut()) {
            if !(*a >= PARAM_FLOOR) {
                *a = PARAM_FLOOR;
            }
        }
    }

    /// Check the container invariants (finite parameters at or above the
    /// floor, matching lengths).
    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.spec.n_voxels()
            || self.beta.len() != self.spec.n_voxels()
            || self.sem.len() != self.spec.n_cells() * self.spec.n_classes
        {
            return Err(Error::DimensionMismatch("belief storage does not match spec".into()));
        }
        let ok = |x: &f64| x.is_finite() && *x >= PARAM_FLOOR;
        if !self.alpha.iter().all(ok) || !self.beta.iter().all(ok) || !self.sem.iter().all(ok) {
            return Err(Error::DimensionMismatch(
                "evidential parameters must be finite and >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Sum over voxels of the Bernoulli entropy of the occupancy mean.
    pub fn occupancy_entropy(&self) -> f64 {
        (0..self.alpha.len())
            .map(|v| crate::grid::bernoulli_entropy_unchecked(self.occupancy_mean(v)))
            .sum()
    }

    /// Sum over birds-eye cells of the categorical entropy of the
    /// semantic mean.
    pub fn semantic_entropy(&self) -> f64 {
        (0..self.spec.n_cells())
            .map(|c| categorical_entropy(&self.sem_mean(c)))
            .sum()
    }

    /// Most-likely map: occupancy thresholded at mean > 0.5 (ties free),
    /// semantics by argmax of the Dirichlet mean (ties to the lowest
    /// class); cells whose column is entirely free are background.
    pub fn most_likely_map(&self) -> SemanticMap {
        let spec = &self.spec;
        let mut occ = vec![false; spec.n_voxels()];
        for (v, o) in occ.iter_mut().enumerate() {
            *o = self.occupancy_mean(v) > 0.5;
        }
        let mut sem = vec![BACKGROUND_CLASS; spec.n_cells()];
        for i in 0..spec.dims[0] {
            for j in 0..spec.dims[1] {
                let cell = spec.cell_index(i, j);
                let column_occupied =
                    (0..spec.dims[2]).any(|k| occ[spec.voxel_index(i, j, k)]);
                if !column_occupied {
                    continue;
                }
                let params = self.sem_params(cell);
                let mut best = 0usize;
                for (c, &l) in params.iter().enumerate() {
                    if l > params[best] {
                        best = c;
                    }
                }
                sem[cell] = best as u16;
            }
        }
        SemanticMap { spec: spec.clone(), occ, sem }
    }
}

/// Convenience constructor mirroring the belief-engine entry point.
pub fn new_uniform_belief(spec: &GridSpec) -> EvidentialBelief {
    EvidentialBelief::new_uniform(spec)
}

/// A concrete (maximum-likelihood or sampled) metric-semantic map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    pub spec: GridSpec,
    /// Voxel occupancy, voxel-major like the belief.
    pub occ: Vec<bool>,
    /// Birds-eye class indices.
    pub sem: Vec<u16>,
}

impl SemanticMap {
    pub fn new_empty(spec: &GridSpec) -> Self {
        Self {
            spec: spec.clone(),
            occ: vec![false; spec.n_voxels()],
            sem: vec![BACKGROUND_CLASS; spec.n_cells()],
        }
    }

    /// True when any voxel of the column over cell `(i, j)` is occupied.
    pub fn column_occupied(&self, i: usize, j: usize) -> bool {
        (0..self.spec.dims[2]).any(|k| self.occ[self.spec.voxel_index(i, j, k)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.occ.len() != self.spec.n_voxels() || self.sem.len() != self.spec.n_cells() {
            return Err(Error::DimensionMismatch("map storage does not match spec".into()));
        }
        for i in 0..self.spec.dims[0] {
            for j in 0..self.spec.dims[1] {
                let cell = self.spec.cell_index(i, j);
                if self.sem[cell] as usize >= self.spec.n_classes {
                    return Err(Error::DimensionMismatch(format!(
                        "class index {} out of range",
                        self.sem[cell]
                    )));
                }
                if !self.column_occupied(i, j) && self.sem[cell] != BACKGROUND_CLASS {
                    return Err(Error::DimensionMismatch(
                        "free column must carry the background class".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Point3;
    use proptest::prelude::*;

    fn small_spec() -> GridSpec {
        GridSpec::new(Point3::origin(), 0.02, [2, 2, 1], 3).unwrap()
    }

    #[test]
    fn uniform_prior_means() {
        let spec = small_spec();
        let b = new_uniform_belief(&spec);
        b.validate().unwrap();
        for v in 0..spec.n_voxels() {
            assert_relative_eq!(b.occupancy_mean(v), 0.5);
        }
        for c in 0..spec.n_cells() {
            for m in b.sem_mean(c) {
                assert_relative_eq!(m, 1.0 / 3.0);
            }
        }
    }

    #[test]
    fn semantic_entropy_uniform_and_degenerate() {
        let spec = small_spec();
        let b = new_uniform_belief(&spec);
        // 4 cells, 3 classes each.
        assert_relative_eq!(b.semantic_entropy(), 4.0 * 3f64.ln(), epsilon = 1e-12);

        let mut certain = b.clone();
        for c in 0..spec.n_cells() {
            certain.sem[c * 3 + 2] = 1e6;
        }
        assert!(certain.semantic_entropy() < 1e-3);
    }

    #[test]
    fn semantic_entropy_hand_value() {
        // One cell with mean (0.5, 0.25, 0.25): H = 1.5 ln 2.
        let spec = GridSpec::new(Point3::origin(), 0.02, [1, 1, 1], 3).unwrap();
        let mut b = new_uniform_belief(&spec);
        b.sem = vec![2.0, 1.0, 1.0];
        assert_relative_eq!(b.semantic_entropy(), 1.5 * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn most_likely_map_rules() {
        let spec = small_spec();
        let b = new_uniform_belief(&spec);
        // Uniform: tie at 0.5 resolves to free, everything background.
        let m = b.most_likely_map();
        assert!(m.occ.iter().all(|&o| !o));
        assert!(m.sem.iter().all(|&s| s == BACKGROUND_CLASS));

        let mut b2 = b.clone();
        b2.alpha[0] = 5.0; // Beta(5,1): mean 5/6 -> occupied.
        b2.sem[0] = 2.0;
        b2.sem[1] = 2.0; // Dirichlet (2,2,1): tie -> class 0.
        let m2 = b2.most_likely_map();
        assert!(m2.occ[0]);
        assert_eq!(m2.sem[0], 0);
        m2.validate().unwrap();
    }

    #[test]
    fn free_column_forced_background() {
        let spec = small_spec();
        let mut b = new_uniform_belief(&spec);
        // Strong semantic evidence but no occupied voxel in the column.
        b.sem[2] = 100.0; // cell 0, class 2
        let m = b.most_likely_map();
        assert_eq!(m.sem[0], BACKGROUND_CLASS);
    }

    proptest! {
        /// Argmax is invariant to scaling all Dirichlet components of a
        /// cell by the same positive constant.
        #[test]
        fn most_likely_map_scale_invariant(scale in 1.0f64..50.0, a in 1.0f64..9.0, b in 1.0f64..9.0, c in 1.0f64..9.0) {
            let spec = GridSpec::new(Point3::origin(), 0.02, [1, 1, 1], 3).unwrap();
            let mut belief = new_uniform_belief(&spec);
            belief.alpha[0] = 10.0; // occupied column so sem matters
            belief.sem = vec![a, b, c];
            let m1 = belief.most_likely_map();
            let mut scaled = belief.clone();
            for l in scaled.sem.iter_mut() {
                *l *= scale;
            }
            scaled.enforce_floor();
            let m2 = scaled.most_likely_map();
            prop_assert_eq!(m1.sem, m2.sem);
        }

        #[test]
        fn entropy_nonnegative(alpha in 1.0f64..100.0, beta in 1.0f64..100.0) {
            let spec = GridSpec::new(Point3::origin(), 0.02, [1, 1, 1], 3).unwrap();
            let mut b = new_uniform_belief(&spec);
            b.alpha[0] = alpha;
            b.beta[0] = beta;
            prop_assert!(b.occupancy_entropy() >= 0.0);
            prop_assert!(b.semantic_entropy() >= 0.0);
            prop_assert!(b.semantic_entropy() <= (3f64).ln() + 1e-12);
        }
    }
}
