//! Estimators of the final state `z(T)` from sampled integrated outputs.
//!
//! [`discrete_kf`] conditions on a uniform sample `y(iT/n)`. The refinement
//! operations then add midpoints one at a time, each new sample entering
//! through its interpolant-differenced form
//! `ỹ = y(t) − α y(t_a) − β y(t_b)`, whose noise is independent of every
//! sample already included. The resulting sequence of estimates is a
//! martingale converging to the continuous-time estimate; its squared
//! increments are available in closed form and add up along the sequence.

mod bucy;
mod discrete;
mod oracle;
mod refine;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::gaussian::GaussianVector;
use crate::path::{DyadicGrid, JointGaussian};

pub use bucy::kalman_bucy_reference;
pub use discrete::{
    discrete_kf, discrete_kf_in, discrete_kf_with_pending, error_trace, initial_state_filter, posterior_covariance, posterior_covariance_uniform,
};
pub use oracle::oracle_estimate;
pub use refine::{
    interpolant_noise, refine_in_order, refine_step, refine_to_depth, refine_to_depth_in, InterpolantNoise,
    MartingaleStep, Refinement,
};

/// How the conditional law is carried between refinement steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Law of the initial state `x`; exact only without input noise, where
    /// `z(T) = e^{AT} x`.
    InitialStateForm,
    /// Joint law of `z(T)` and the outputs still to be included.
    JointForm,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Representation {
    InitialState {
        law: GaussianVector,
        /// `e^{AT}`.
        to_target: DMatrix<f64>,
    },
    Joint {
        joint: JointGaussian,
        /// Path-grid node of each output block after `z(T)`.
        pending: Vec<usize>,
    },
}

/// Current estimate of `z(T)` given the included samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub(crate) target: GaussianVector,
    pub(crate) repr: Representation,
    pub(crate) included: BTreeSet<usize>,
    pub(crate) grid: DyadicGrid,
    pub(crate) last_increment: f64,
}

impl FilterState {
    /// Law of `z(T)` given the included samples.
    pub fn target_estimate(&self) -> &GaussianVector {
        &self.target
    }

    pub fn mode(&self) -> FilterMode {
        match self.repr {
            Representation::InitialState { .. } => FilterMode::InitialStateForm,
            Representation::Joint { .. } => FilterMode::JointForm,
        }
    }

    /// Law of the initial state, in initial-state form.
    pub fn initial_state_estimate(&self) -> Option<&GaussianVector> {
        match &self.repr {
            Representation::InitialState { law, .. } => Some(law),
            Representation::Joint { .. } => None,
        }
    }

    /// Maintained joint law, in joint form.
    pub fn joint(&self) -> Option<&JointGaussian> {
        match &self.repr {
            Representation::Joint { joint, .. } => Some(joint),
            Representation::InitialState { .. } => None,
        }
    }

    /// Included path-grid nodes, ascending.
    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        self.included.iter().copied()
    }

    pub fn included_count(&self) -> usize {
        self.included.len()
    }

    pub fn included_times(&self) -> Vec<f64> {
        self.included.iter().map(|&i| self.grid.time(i)).collect()
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    /// `E‖ẑ_new − ẑ_old‖²` of the step that produced this state (0 for a fresh filter).
    pub fn last_increment_trace(&self) -> f64 {
        self.last_increment
    }

    pub fn mean(&self) -> &DVector<f64> {
        self.target.mean()
    }

    pub fn cov_trace(&self) -> f64 {
        self.target.trace()
    }
}

/// Summary of one estimate of `z(T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub n: usize,
    pub depth: u32,
    pub mean: Vec<f64>,
    pub cov_trace: f64,
    /// `‖ẑ_{T,n} − ẑ_ref‖²` on this path.
    pub error_sq_vs_ref: f64,
}
