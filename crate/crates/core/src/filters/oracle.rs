use nalgebra::DVector;

use crate::error::Result;
use crate::gaussian::GaussianVector;
use crate::lti::LtiSystem;
use crate::path::{joint_covariance, SamplePath};

/// `E[z(T) | y(t), t ∈ times]` by conditioning the exact joint law in a single call.
///
/// `times` must be increasing grid times of `path`.
pub fn oracle_estimate(sys: &LtiSystem, path: &SamplePath, times: &[f64]) -> Result<GaussianVector> {
    let values: Vec<DVector<f64>> = times.iter().map(|&t| path.y_at(t).cloned()).collect::<Result<_>>()?;
    let joint = joint_covariance(sys, times, path.grid.horizon())?;
    let blocks: Vec<usize> = (1..=times.len()).collect();
    joint.condition_final_state(&blocks, &values)
}
