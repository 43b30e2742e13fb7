//! Shared fixtures for the criterion benches.

use conformal_attack::learners::HardLabelOracle;
use conformal_attack::Result;

/// Linear decision rule `w.z + b >= 0`.
pub struct Halfspace {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    /// Normal along the first axis, boundary at `z_0 = offset`.
    pub fn axis(dim: usize, offset: f64) -> Self {
        let mut w = vec![0.0; dim];
        w[0] = 1.0;
        Self { w, b: -offset }
    }
}

impl HardLabelOracle for Halfspace {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn decide(&self, z: &[f64]) -> Result<bool> {
        Ok(self.w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + self.b >= 0.0)
    }
}
