use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{error::input, Result};

/// Where a point cloud came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub scheme: String,
    pub burn_in_steps: usize,
    pub n_replicas: usize,
    pub n_points: usize,
    pub diverged: usize,
}

/// Equal-weight point cloud in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    pub meta: Provenance,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<f64>, meta: Provenance) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(input("empirical measure needs at least one point of positive dimension"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(input("empirical measure contains non-finite coordinates"));
        }
        Ok(Self { dim, points, meta })
    }

    pub fn from_scalars(xs: Vec<f64>) -> Result<Self> {
        Self::new(1, xs, Provenance::default())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Flat row-major coordinates.
    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Sub-cloud with the given point indices (duplicates allowed).
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut pts = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            pts.extend_from_slice(self.point(i));
        }
        Self {
            dim: self.dim,
            points: pts,
            meta: self.meta.clone(),
        }
    }

    /// Every point multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            points: self.points.iter().map(|x| c * x).collect(),
            meta: self.meta.clone(),
        }
    }

    /// First coordinates; the whole cloud when `dim = 1`.
    pub fn first_coordinates(&self) -> Vec<f64> {
        self.points().map(|p| p[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(EmpiricalMeasure::from_scalars(vec![]).is_err());
        assert!(EmpiricalMeasure::from_scalars(vec![1.0, f64::NAN]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0], Provenance::default()).is_err());
    }

    #[test]
    fn select_and_scale() {
        let m = EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0, 4.0], Provenance::default()).unwrap();
        assert_eq!(m.len(), 2);
        let s = m.select(&[1, 1, 0]);
        assert_eq!(s.as_flat(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
        assert_eq!(m.scaled(-2.0).point(0), &[-2.0, -4.0]);
    }
}
