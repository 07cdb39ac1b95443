//! Linear time-invariant system with integrated outputs and its
//! matrix-exponential calculus.

mod bounds;
mod expm;
mod system;

pub use bounds::{bound_constants, bound_constants_with_mu, mu_bound, BoundReport, BoundVariant};
pub use expm::{expm, integrated_expm, transition_moments, transition_moments_raw, TransitionMoments};
pub use system::{c_tilde, ObservationRow, LtiSystem};
