use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::{symmetrize, GaussianVector};
use crate::lti::LtiSystem;
use crate::path::SamplePath;

/// Continuous-time filter on `substeps` equal steps of `[0, T]`.
///
/// The Riccati equation `Ṗ = AP + PAᵀ + BQBᵀ − PCᵀR⁻¹CP` is integrated with
/// classical Runge–Kutta; the mean follows the observed output increments
/// with an explicit Euler step, so it is only first-order accurate.
pub fn kalman_bucy_reference(sys: &LtiSystem, path: &SamplePath, substeps: usize) -> Result<GaussianVector> {
    let intervals = path.grid.intervals();
    if substeps == 0 || substeps > intervals || intervals % substeps != 0 {
        return Err(Error::InvalidInput(format!(
            "substeps must divide the {intervals} path intervals, got {substeps}"
        )));
    }
    let stride = intervals / substeps;
    let dt = path.grid.horizon() / substeps as f64;
    let a = sys.a();
    let c = sys.c();
    let r_inv = sys
        .r()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("R must be positive definite".into()))?
        .inverse();
    let ct_rinv = c.transpose() * &r_inv;
    let info = &ct_rinv * c;
    let drive = sys.input_covariance();
    let rhs = |p: &DMatrix<f64>| a * p + p * a.transpose() + &drive - p * &info * p;

    let mut mean = sys.m().clone();
    let mut cov = sys.p0().clone();
    for k in 0..substeps {
        let dy = &path.y[(k + 1) * stride] - &path.y[k * stride];
        let gain = &cov * &ct_rinv;
        mean = &mean + a * &mean * dt + gain * (dy - c * &mean * dt);

        let k1 = rhs(&cov);
        let k2 = rhs(&(&cov + &k1 * (dt / 2.0)));
        let k3 = rhs(&(&cov + &k2 * (dt / 2.0)));
        let k4 = rhs(&(&cov + &k3 * dt));
        cov += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        symmetrize(&mut cov);
    }
    crate::error::ensure_finite("Riccati solution", cov.iter().chain(mean.iter()))?;
    Ok(GaussianVector::from_parts(mean, cov))
}
