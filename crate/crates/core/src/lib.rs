//! Discrete-time Kalman filtering of continuous-time linear Gaussian systems
//! observed through integrated outputs, and the machinery to measure how fast
//! the sampled-data estimate approaches the continuous-time one.
//!
//! The crate is organised bottom-up:
//!
//! * [`gaussian`]: Gaussian vectors and linear-Gaussian conditioning.
//! * [`lti`]: system definition, matrix exponentials, interpolant-differenced
//!   observation operators and closed-form error-bound constants.
//! * [`path`]: exact path simulation on dyadic grids and the analytic joint
//!   law of the final state and sampled outputs.
//! * [`filters`]: discrete-time filter, midpoint refinement, one-shot
//!   conditioning, deterministic error traces and a Riccati cross-check.
//! * [`experiments`]: convergence-rate studies, Monte Carlo validation and the
//!   wave-equation slow-convergence construction.

pub mod error;
pub mod experiments;
pub mod filters;
pub mod gaussian;
pub mod lti;
pub mod path;
pub mod systems;

pub use error::{Error, Result};
pub use gaussian::{condition, increment_trace, pseudoinverse, GaussianVector, LinearObservation};
pub use lti::{bound_constants, c_tilde, expm, mu_bound, transition_moments, BoundReport, BoundVariant, LtiSystem};
pub use path::{joint_covariance, simulate, DyadicGrid, JointGaussian, SamplePath};
