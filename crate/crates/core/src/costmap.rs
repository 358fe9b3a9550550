use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::grid_coords_unchecked;

#[derive(Debug, Error)]
pub enum CostMapError {
    #[error("cost map side must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("expected {expected} values for a {n}x{n} map, got {got}")]
    WrongLength { n: usize, expected: usize, got: usize },
    #[error("value {value} at cell ({i}, {j}) is outside [0, 1]")]
    OutOfRange { i: usize, j: usize, value: f64 },
}

/// Square grid of disruption scores over a robot-centred area; 1 means no
/// disruption. Row-major; see [`CostMap::cell_position`] for orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMap {
    side: usize,
    area_side: f64,
    values: Vec<f64>,
}

impl CostMap {
    pub fn new(side: usize, area_side: f64, values: Vec<f64>) -> Result<Self, CostMapError> {
        if side < 2 {
            return Err(CostMapError::TooSmall(side));
        }
        if values.len() != side * side {
            return Err(CostMapError::WrongLength { n: side, expected: side * side, got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(CostMapError::OutOfRange { i: k / side, j: k % side, value: values[k] });
        }
        Ok(Self { side, area_side, values })
    }

    /// Builds a map from unconstrained values, clamping into [0, 1]. NaN maps to 0.
    pub fn from_clamped(side: usize, area_side: f64, values: impl IntoIterator<Item = f64>) -> Result<Self, CostMapError> {
        let values = values.into_iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect();
        Self::new(side, area_side, values)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn area_side(&self) -> f64 {
        self.area_side
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.side + j]
    }

    pub fn centre(&self) -> (usize, usize) {
        let c = (self.side - 1) / 2;
        (c, c)
    }

    pub fn centre_value(&self) -> f64 {
        let (i, j) = self.centre();
        self.get(i, j)
    }

    /// Robot-frame position of cell `(i, j)`: row 0 lies ahead of the robot
    /// and column 0 to its right, so cell `(0, 0)` is the front-right corner
    /// when looking down with +x up and +y to the left.
    pub fn cell_position(&self, i: usize, j: usize) -> (f64, f64) {
        grid_coords_unchecked(i, j, self.side, self.area_side)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Mean squared difference to another map of the same size.
    pub fn mse(&self, other: &CostMap) -> f64 {
        assert_eq!(self.side, other.side);
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        s / self.values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(CostMap::new(1, 1.0, vec![0.5]).is_err());
        assert!(CostMap::new(3, 1.0, vec![0.5; 8]).is_err());
        let mut v = vec![0.5; 9];
        v[5] = 1.5;
        assert!(matches!(CostMap::new(3, 1.0, v), Err(CostMapError::OutOfRange { i: 1, j: 2, .. })));
        let m = CostMap::from_clamped(3, 1.0, [2.0, -1.0, f64::NAN, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]).unwrap();
        assert_eq!(&m.values()[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(m.centre_value(), 0.3);
    }

    #[test]
    fn mse_arithmetic() {
        let zeros = CostMap::new(5, 1.0, vec![0.0; 25]).unwrap();
        let ones = CostMap::new(5, 1.0, vec![1.0; 25]).unwrap();
        assert_eq!(zeros.mse(&ones), 1.0);
        assert_eq!(ones.mse(&ones), 0.0);
    }
}
