use nalgebra::DMatrix;

use crate::error::{ensure_finite, Error, Result};
use crate::gaussian::symmetrize;

use super::LtiSystem;

/// `e^{A t}`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "matrix exponential of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite("matrix exponential input", a.iter())?;
    if !t.is_finite() {
        return Err(Error::NonFinite("matrix exponential time".into()));
    }
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    Ok((a * t).exp())
}

/// `(e^{A δ}, ∫₀^δ e^{A s} ds)` from one block exponential.
pub fn integrated_expm(a: &DMatrix<f64>, delta: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = a.nrows();
    let mut block = DMatrix::zeros(2 * p, 2 * p);
    block.view_mut((0, 0), (p, p)).copy_from(a);
    block
        .view_mut((0, p), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    let e = expm(&block, delta)?;
    Ok((
        e.view((0, 0), (p, p)).clone_owned(),
        e.view((0, p), (p, p)).clone_owned(),
    ))
}

/// One-step moments of `dz = A z dt + dν`, `Cov(dν) = G dt`, over a step δ.
#[derive(Debug, Clone)]
pub struct TransitionMoments {
    /// `e^{A δ}`.
    pub phi: DMatrix<f64>,
    /// `∫₀^δ e^{A s} ds`.
    pub psi: DMatrix<f64>,
    /// `∫₀^δ e^{A s} G e^{Aᵀ s} ds`.
    pub qd: DMatrix<f64>,
}

/// Van Loan construction on `[[−A, G, 0], [0, Aᵀ, I], [0, 0, 0]]·δ`.
pub fn transition_moments_raw(a: &DMatrix<f64>, g: &DMatrix<f64>, delta: f64) -> Result<TransitionMoments> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {delta}")));
    }
    let p = a.nrows();
    if a.ncols() != p || g.nrows() != p || g.ncols() != p {
        return Err(Error::Dimension("transition moments need square A and G of equal size".into()));
    }
    let mut block = DMatrix::zeros(3 * p, 3 * p);
    block.view_mut((0, 0), (p, p)).copy_from(&(-a));
    block.view_mut((0, p), (p, p)).copy_from(g);
    block.view_mut((p, p), (p, p)).copy_from(&a.transpose());
    block
        .view_mut((p, 2 * p), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    let e = expm(&block, delta)?;
    let phi = e.view((p, p), (p, p)).transpose();
    let psi = e.view((p, 2 * p), (p, p)).transpose();
    let mut qd = &phi * e.view((0, p), (p, p));
    symmetrize(&mut qd);
    Ok(TransitionMoments { phi, psi, qd })
}

pub fn transition_moments(sys: &LtiSystem, delta: f64) -> Result<TransitionMoments> {
    transition_moments_raw(sys.a(), &sys.input_covariance(), delta)
}
