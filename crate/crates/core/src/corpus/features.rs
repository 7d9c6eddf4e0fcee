use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// `locations × dim` grid of visual feature vectors for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    locations: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(locations: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if locations == 0 || dim == 0 {
            return Err(Error::invalid(
                "feature grid needs at least one location and one dimension",
            ));
        }
        if values.len() != locations * dim {
            return Err(Error::shape("feature grid", locations * dim, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature grid".into()));
        }
        Ok(FeatureGrid {
            locations,
            dim,
            values,
        })
    }

    pub fn locations(&self) -> usize {
        self.locations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(self.locations, self.dim, self.values.clone()).expect("validated grid")
    }
}

/// Average of the grid rows.
pub fn mean_pool(grid: &FeatureGrid) -> Tensor {
    let mut mean = alloc::vec![0.0; grid.dim];
    for i in 0..grid.locations {
        for (m, v) in mean.iter_mut().zip(grid.row(i)) {
            *m += v;
        }
    }
    let n = grid.locations as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Tensor::vector(mean).expect("finite mean")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_pool_to_ones() {
        let g = FeatureGrid::new(3, 4, alloc::vec![1.0; 12]).unwrap();
        assert_eq!(mean_pool(&g).data(), &[1.0; 4]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(FeatureGrid::new(0, 4, Vec::new()).is_err());
        assert!(FeatureGrid::new(2, 2, alloc::vec![0.0; 3]).is_err());
        assert!(FeatureGrid::new(1, 1, alloc::vec![f64::NAN]).is_err());
    }
}
