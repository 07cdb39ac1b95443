use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{condition_detailed, increment_trace, GaussianVector, LinearObservation};
use crate::lti::{c_tilde, LtiSystem};
use crate::path::SamplePath;

use super::discrete::{discrete_kf_in, discrete_kf_with_pending};
use super::{FilterMode, FilterState, Representation};

/// Noise `w̃ = w(t) − α w(t_a) − β w(t_b)` of an interpolant-differenced sample.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantNoise {
    r: DMatrix<f64>,
    t_a: f64,
    t: f64,
    t_b: f64,
    alpha: f64,
    beta: f64,
}

/// Builds the noise model of `ỹ` at `t` interpolated from `t_a` and `t_b`.
pub fn interpolant_noise(r: &DMatrix<f64>, t_a: f64, t: f64, t_b: f64) -> Result<InterpolantNoise> {
    if !(0.0 <= t_a && t_a < t && t < t_b) {
        return Err(Error::Ordering(format!("need 0 <= t_a < t < t_b, got ({t_a}, {t}, {t_b})")));
    }
    let span = t_b - t_a;
    Ok(InterpolantNoise {
        r: r.clone(),
        t_a,
        t,
        t_b,
        alpha: (t_b - t) / span,
        beta: (t - t_a) / span,
    })
}

impl InterpolantNoise {
    /// `(α, β)` weights of `y(t_a)` and `y(t_b)`.
    pub fn weights(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// `Cov(w̃, w(s))`, assembled from `Cov(w(u), w(s)) = min(u, s) R`.
    pub fn cov_with(&self, s: f64) -> DMatrix<f64> {
        let scale = self.t.min(s) - self.alpha * self.t_a.min(s) - self.beta * self.t_b.min(s);
        &self.r * scale
    }

    /// `Var(w̃)` from the same Brownian covariance blocks.
    pub fn variance(&self) -> DMatrix<f64> {
        let (a, b) = (self.alpha, self.beta);
        let (ta, t, tb) = (self.t_a, self.t, self.t_b);
        let scale = t + a * a * ta + b * b * tb - 2.0 * a * ta - 2.0 * b * t + 2.0 * a * b * ta;
        &self.r * scale
    }
}

/// One element `z̃_j` of the refinement martingale.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleStep {
    pub j: usize,
    /// Node added at this step; `None` for the starting uniform sample.
    pub node: Option<usize>,
    pub time: Option<f64>,
    pub estimate: GaussianVector,
    /// `E‖z̃_j − z̃_{j−1}‖²`.
    pub increment_trace: f64,
}

/// Trajectory of a refinement run.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub steps: Vec<MartingaleStep>,
    pub final_state: FilterState,
}

impl Refinement {
    pub fn traces(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.estimate.trace()).collect()
    }
}

fn node_of(path: &SamplePath, t: f64) -> Result<usize> {
    path.grid.index_of(t)
}

/// Adds the sample `y(t_new)` through `ỹ = y(t_new) − α y(t_a) − β y(t_b)`.
///
/// `t_a` and `t_b` must be included (or `t_a = 0`) with no included sample
/// strictly between them.
pub fn refine_step(
    sys: &LtiSystem,
    state: &FilterState,
    path: &SamplePath,
    t_a: f64,
    t_new: f64,
    t_b: f64,
) -> Result<FilterState> {
    if path.grid != state.grid {
        return Err(Error::InvalidInput("path grid differs from the filter's grid".into()));
    }
    if !(t_a < t_new && t_new < t_b) {
        return Err(Error::Ordering(format!("need t_a < t_new < t_b, got ({t_a}, {t_new}, {t_b})")));
    }
    let (a, k, b) = (node_of(path, t_a)?, node_of(path, t_new)?, node_of(path, t_b)?);
    if state.included.contains(&k) {
        return Err(Error::InvalidInput(format!("sample at t = {t_new} is already included")));
    }
    for (node, t) in [(a, t_a), (b, t_b)] {
        if node != 0 && !state.included.contains(&node) {
            return Err(Error::InvalidInput(format!("interpolation endpoint t = {t} is not included")));
        }
    }
    if state.included.range(a + 1..b).next().is_some() {
        return Err(Error::Ordering(format!("an included sample lies strictly inside ({t_a}, {t_b})")));
    }

    let noise = interpolant_noise(sys.r(), t_a, t_new, t_b)?;
    let (alpha, beta) = noise.weights();
    let interpolant = &path.y[a] * alpha + &path.y[b] * beta;
    let y_tilde = &path.y[k] - &interpolant;

    let (target, repr, increment) = match &state.repr {
        Representation::InitialState { law, to_target } => {
            if !sys.is_noiseless() {
                return Err(Error::InvalidInput("initial-state form requires a system without input noise".into()));
            }
            let row = c_tilde(sys, t_a, t_new, t_b)?;
            let obs = LinearObservation::unbiased(row.matrix, row.noise_cov)?;
            let step = condition_detailed(law, &obs, &y_tilde)?;
            let cross = to_target * &step.cross_cov;
            let increment = increment_trace(&cross, &step.innovation_cov)?;
            let target = step.posterior.push_forward(to_target)?;
            (
                target,
                Representation::InitialState { law: step.posterior, to_target: to_target.clone() },
                increment,
            )
        }
        Representation::Joint { joint, pending } => {
            let pos = pending
                .iter()
                .position(|&p| p == k)
                .ok_or_else(|| Error::InvalidInput(format!("sample at t = {t_new} is not carried by the joint law")))?;
            let bias: DVector<f64> = -interpolant;
            let (joint, cross, innovation) = joint.condition_on_block(pos + 1, &y_tilde, &bias)?;
            let increment = increment_trace(&cross, &innovation)?;
            let mut pending = pending.clone();
            pending.remove(pos);
            (joint.final_state(), Representation::Joint { joint, pending }, increment)
        }
    };

    let mut included = state.included.clone();
    included.insert(k);
    Ok(FilterState { target, repr, included, grid: state.grid, last_increment: increment })
}

/// Adds the listed nodes in order, each interpolated between its nearest
/// included neighbours at that moment.
pub fn refine_in_order(sys: &LtiSystem, state: FilterState, path: &SamplePath, order: &[usize]) -> Result<Refinement> {
    let mut steps = vec![MartingaleStep {
        j: 0,
        node: None,
        time: None,
        estimate: state.target.clone(),
        increment_trace: 0.0,
    }];
    let mut current = state;
    for (idx, &k) in order.iter().enumerate() {
        let left = current.included.range(..k).next_back().copied().unwrap_or(0);
        let right = current
            .included
            .range(k + 1..)
            .next()
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("node {k} has no included sample to its right")))?;
        let g = &path.grid;
        current = refine_step(sys, &current, path, g.time(left), g.time(k), g.time(right))?;
        steps.push(MartingaleStep {
            j: idx + 1,
            node: Some(k),
            time: Some(g.time(k)),
            estimate: current.target.clone(),
            increment_trace: current.last_increment,
        });
    }
    Ok(Refinement { steps, final_state: current })
}

/// Starts from the uniform `n`-sample and adds every midpoint of levels
/// `1..=depth`, left to right within each level.
///
/// Uses initial-state form when the system has no input noise.
pub fn refine_to_depth(sys: &LtiSystem, path: &SamplePath, n: usize, depth: u32) -> Result<Refinement> {
    let mode = if sys.is_noiseless() { FilterMode::InitialStateForm } else { FilterMode::JointForm };
    refine_to_depth_in(sys, path, n, depth, mode)
}

/// [`refine_to_depth`] with an explicit representation.
///
/// Joint form carries every pending output, so its cost grows with the cube
/// of `n · 2^depth`.
pub fn refine_to_depth_in(
    sys: &LtiSystem,
    path: &SamplePath,
    n: usize,
    depth: u32,
    mode: FilterMode,
) -> Result<Refinement> {
    let mut order = Vec::new();
    for level in 1..=depth {
        order.extend(path.grid.midpoints(n, level)?);
    }
    let start = match mode {
        FilterMode::InitialStateForm => discrete_kf_in(sys, path, n, mode)?,
        FilterMode::JointForm => discrete_kf_with_pending(sys, path, n, &order)?,
    };
    refine_in_order(sys, start, path, &order)
}
