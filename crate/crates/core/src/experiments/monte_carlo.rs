use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{discrete_kf, posterior_covariance_uniform};
use crate::path::{simulate, DyadicGrid};

use super::StudyConfig;

/// Fewest paths for which the Monte Carlo comparison is meaningful.
pub const MIN_MC_SEEDS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub n: usize,
    /// Sample mean of `‖ẑ_{T,n} − ẑ_ref‖²`.
    pub mc_error_sq: f64,
    /// Standard error of `mc_error_sq`.
    pub stderr: f64,
    /// Deterministic `tr P(n) − tr P(ref)`.
    pub trace_error_sq: f64,
}

impl McRow {
    /// Whether the sample mean lies within `k` standard errors of the trace value.
    pub fn within(&self, k: f64) -> bool {
        (self.mc_error_sq - self.trace_error_sq).abs() <= k * self.stderr
    }
}

/// Averages `‖ẑ_{T,n} − ẑ_ref‖²` over `cfg.seeds` simulated paths with seeds
/// `first_seed, first_seed + 1, …`.
pub fn monte_carlo_check(cfg: &StudyConfig, first_seed: u64) -> Result<Vec<McRow>> {
    cfg.validate()?;
    if cfg.seeds < MIN_MC_SEEDS {
        return Err(Error::InvalidInput(format!(
            "Monte Carlo checks need at least {MIN_MC_SEEDS} seeds, got {}",
            cfg.seeds
        )));
    }
    let sys = &cfg.system;
    let reference_n = cfg.reference_n();
    let max_n = *cfg.n_list.last().expect("validated");
    let grid = DyadicGrid::new(cfg.horizon, max_n, cfg.ref_depth)?;

    let per_path: Vec<Vec<f64>> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|offset| -> Result<Vec<f64>> {
            let path = simulate(sys, &grid, first_seed.wrapping_add(offset))?;
            let reference = discrete_kf(sys, &path, reference_n)?;
            cfg.n_list
                .iter()
                .map(|&n| Ok((discrete_kf(sys, &path, n)?.mean() - reference.mean()).norm_squared()))
                .collect()
        })
        .collect::<Result<_>>()?;

    let ref_trace = posterior_covariance_uniform(sys, cfg.horizon, reference_n)?.trace();
    let count = per_path.len() as f64;
    cfg.n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            // Sequential sums in seed order keep the report bitwise reproducible.
            let mean = per_path.iter().map(|v| v[k]).sum::<f64>() / count;
            let var = per_path.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (count - 1.0);
            let trace_error_sq = posterior_covariance_uniform(sys, cfg.horizon, n)?.trace() - ref_trace;
            Ok(McRow { n, mc_error_sq: mean, stderr: (var / count).sqrt(), trace_error_sq })
        })
        .collect()
}
