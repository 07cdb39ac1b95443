use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{condition, pseudoinverse, symmetrize, GaussianVector, LinearObservation};
use crate::lti::{expm, integrated_expm, transition_moments, LtiSystem};
use crate::path::{joint_covariance, BlockLabel, JointGaussian, SamplePath};

use super::{FilterMode, FilterState, Representation};

/// Exact one-step model of the output increment `Δy = C ∫ z ds + Δw`.
struct IncrementStep {
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
    qd_zz: DMatrix<f64>,
    qd_zi: DMatrix<f64>,
    qd_ii: DMatrix<f64>,
    noise: DMatrix<f64>,
}

impl IncrementStep {
    fn new(sys: &LtiSystem, delta: f64) -> Result<Self> {
        let p = sys.state_dim();
        let mom = crate::path::augmented_moments(sys, delta)?;
        Ok(Self {
            phi: mom.phi.view((0, 0), (p, p)).clone_owned(),
            psi: mom.phi.view((p, 0), (p, p)).clone_owned(),
            qd_zz: mom.qd.view((0, 0), (p, p)).clone_owned(),
            qd_zi: mom.qd.view((0, p), (p, p)).clone_owned(),
            qd_ii: mom.qd.view((p, p), (p, p)).clone_owned(),
            noise: sys.r() * delta,
        })
    }

    /// Predicts `(z, ∫z)` over the step, conditions on the output increment and
    /// marginalises the integral.
    fn apply(&self, c: &DMatrix<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>, dy: Option<&DVector<f64>>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let p_phi = cov * self.phi.transpose();
        let p_psi = cov * self.psi.transpose();
        let zz = &self.phi * &p_phi + &self.qd_zz;
        let zi = &self.phi * &p_psi + &self.qd_zi;
        let ii = &self.psi * &p_psi + &self.qd_ii;
        let cross = &zi * c.transpose();
        let mut innovation = c * &ii * c.transpose() + &self.noise;
        symmetrize(&mut innovation);
        let gain = &cross * pseudoinverse(&innovation)?;
        let mut new_cov = zz - &gain * cross.transpose();
        symmetrize(&mut new_cov);
        let mut new_mean = &self.phi * mean;
        if let Some(dy) = dy {
            let residual = dy - c * (&self.psi * mean);
            new_mean += &gain * residual;
        }
        Ok((new_mean, new_cov))
    }
}

fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev && t <= horizon) {
            return Err(Error::Ordering(format!(
                "sample times must be strictly increasing within (0, {horizon}], got {t} after {prev}"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Law of `z(T)` given `y` at `times` (values optional for covariance-only runs).
fn increment_filter(sys: &LtiSystem, horizon: f64, times: &[f64], values: Option<&[DVector<f64>]>) -> Result<GaussianVector> {
    check_times(times, horizon)?;
    if let Some(v) = values {
        if v.len() != times.len() {
            return Err(Error::Dimension("one output value per sample time is required".into()));
        }
    }
    let mut cache: HashMap<i64, IncrementStep> = HashMap::new();
    let mut mean = sys.m().clone();
    let mut cov = sys.p0().clone();
    let mut prev_t = 0.0;
    let zero = DVector::zeros(sys.output_dim());
    let mut prev_y = &zero;
    for (i, &t) in times.iter().enumerate() {
        let delta = t - prev_t;
        let key = (delta / horizon * 2f64.powi(44)).round() as i64;
        if !cache.contains_key(&key) {
            cache.insert(key, IncrementStep::new(sys, delta)?);
        }
        let step = &cache[&key];
        let dy = values.map(|v| &v[i] - prev_y);
        let (m, p) = step.apply(sys.c(), &mean, &cov, dy.as_ref())?;
        mean = m;
        cov = p;
        if let Some(v) = values {
            prev_y = &v[i];
        }
        prev_t = t;
    }
    if prev_t < horizon {
        let mom = transition_moments(sys, horizon - prev_t)?;
        mean = &mom.phi * mean;
        cov = &mom.phi * cov * mom.phi.transpose() + mom.qd;
    }
    Ok(GaussianVector::from_parts(mean, cov))
}

/// Posterior covariance of `z(T)` given `y` at `times`; independent of the observed values.
pub fn posterior_covariance(sys: &LtiSystem, times: &[f64], horizon: f64) -> Result<DMatrix<f64>> {
    Ok(increment_filter(sys, horizon, times, None)?.into_parts().1)
}

/// Posterior covariance of `z(T)` given `y(iT/n)`, `i = 1..n`.
pub fn posterior_covariance_uniform(sys: &LtiSystem, horizon: f64, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let step = IncrementStep::new(sys, horizon / n as f64)?;
    let mean = DVector::zeros(sys.state_dim());
    let mut cov = sys.p0().clone();
    for _ in 0..n {
        cov = step.apply(sys.c(), &mean, &cov, None)?.1;
    }
    Ok(cov)
}

/// `E‖ẑ_fine − ẑ_coarse‖² = tr P_coarse − tr P_fine` for nested sample sets.
pub fn error_trace(sys: &LtiSystem, times_coarse: &[f64], times_fine: &[f64], horizon: f64) -> Result<f64> {
    let tol = 1e-12 * horizon;
    let mut fine = times_fine.iter().peekable();
    for &t in times_coarse {
        loop {
            match fine.next() {
                Some(&f) if (f - t).abs() <= tol => break,
                Some(&f) if f < t => continue,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "coarse sample time {t} is not among the fine sample times"
                    )))
                }
            }
        }
    }
    let coarse = posterior_covariance(sys, times_coarse, horizon)?.trace();
    let fine = posterior_covariance(sys, times_fine, horizon)?.trace();
    Ok(coarse - fine)
}

/// Law of the initial state `x` given `y` at `times`, for systems without input noise.
pub fn initial_state_filter(sys: &LtiSystem, times: &[f64], values: &[DVector<f64>], horizon: f64) -> Result<GaussianVector> {
    if !sys.is_noiseless() {
        return Err(Error::InvalidInput("initial-state form requires a system without input noise".into()));
    }
    check_times(times, horizon)?;
    if values.len() != times.len() {
        return Err(Error::Dimension("one output value per sample time is required".into()));
    }
    let mut law = sys.initial_law();
    let mut flow = DMatrix::identity(sys.state_dim(), sys.state_dim());
    let mut prev_t = 0.0;
    let zero = DVector::zeros(sys.output_dim());
    let mut prev_y = &zero;
    for (&t, y) in times.iter().zip(values) {
        let delta = t - prev_t;
        let (phi, psi) = integrated_expm(sys.a(), delta)?;
        // y(t) − y(t_prev) = C e^{A t_prev} ∫₀^δ e^{As} ds · x + Δw.
        let map = sys.c() * &flow * psi;
        let obs = LinearObservation::unbiased(map, sys.r() * delta)?;
        law = condition(&law, &obs, &(y - prev_y))?;
        flow = phi * flow;
        prev_y = y;
        prev_t = t;
    }
    Ok(law)
}

fn sampled(path: &SamplePath, nodes: &[usize]) -> (Vec<f64>, Vec<DVector<f64>>) {
    (
        nodes.iter().map(|&i| path.grid.time(i)).collect(),
        nodes.iter().map(|&i| path.y[i].clone()).collect(),
    )
}

/// `E[z(T) | y(iT/n), i = 1..n]` with its covariance.
///
/// Uses initial-state form for systems without input noise and joint form otherwise.
pub fn discrete_kf(sys: &LtiSystem, path: &SamplePath, n: usize) -> Result<FilterState> {
    let mode = if sys.is_noiseless() { FilterMode::InitialStateForm } else { FilterMode::JointForm };
    discrete_kf_in(sys, path, n, mode)
}

/// [`discrete_kf`] with an explicit representation.
pub fn discrete_kf_in(sys: &LtiSystem, path: &SamplePath, n: usize, mode: FilterMode) -> Result<FilterState> {
    let nodes = path.grid.nodes_for(n)?;
    let horizon = path.grid.horizon();
    let (times, values) = sampled(path, &nodes);
    let (target, repr) = match mode {
        FilterMode::InitialStateForm => {
            let law = initial_state_filter(sys, &times, &values, horizon)?;
            let to_target = expm(sys.a(), horizon)?;
            let target = law.push_forward(&to_target)?;
            (target, Representation::InitialState { law, to_target })
        }
        FilterMode::JointForm => {
            let target = increment_filter(sys, horizon, &times, Some(&values))?;
            let joint = JointGaussian::from_parts(vec![BlockLabel::FinalState], vec![sys.state_dim()], target.clone());
            (target, Representation::Joint { joint, pending: Vec::new() })
        }
    };
    Ok(FilterState {
        target,
        repr,
        included: nodes.into_iter().collect(),
        grid: path.grid,
        last_increment: 0.0,
    })
}

/// Joint-form state after the uniform `n`-sample, carrying the outputs at
/// `pending` nodes so they can be included later.
pub fn discrete_kf_with_pending(sys: &LtiSystem, path: &SamplePath, n: usize, pending: &[usize]) -> Result<FilterState> {
    let nodes = path.grid.nodes_for(n)?;
    let included: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut pending: Vec<usize> = pending.to_vec();
    pending.sort_unstable();
    pending.dedup();
    if let Some(&bad) = pending.iter().find(|i| included.contains(i) || **i == 0 || **i > path.grid.intervals()) {
        return Err(Error::InvalidInput(format!("node {bad} cannot be pending")));
    }
    let mut all: Vec<usize> = included.iter().copied().chain(pending.iter().copied()).collect();
    all.sort_unstable();
    let times: Vec<f64> = all.iter().map(|&i| path.grid.time(i)).collect();
    let joint = joint_covariance(sys, &times, path.grid.horizon())?;
    let blocks: Vec<usize> = all
        .iter()
        .enumerate()
        .filter(|(_, i)| included.contains(i))
        .map(|(k, _)| k + 1)
        .collect();
    let values: Vec<DVector<f64>> = nodes.iter().map(|&i| path.y[i].clone()).collect();
    let joint = joint.condition_blocks(&blocks, &values)?;
    Ok(FilterState {
        target: joint.final_state(),
        repr: Representation::Joint { joint, pending },
        included,
        grid: path.grid,
        last_increment: 0.0,
    })
}
