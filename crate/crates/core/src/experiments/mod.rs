//! Convergence-rate studies, Monte Carlo validation and the wave-equation
//! construction with arbitrarily slow convergence.

mod fit;
mod monte_carlo;
mod wave;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::posterior_covariance_uniform;
use crate::lti::{bound_constants, BoundVariant, LtiSystem};

pub use fit::{fit_slope, SlopeFit};
pub use monte_carlo::{monte_carlo_check, McRow};
pub use wave::{
    symmetric_kernel, wave_instance, wave_lower_bound, wave_slow_convergence_demo, WaveConfig, WaveRow,
};

/// Points within this factor of the reference floor are left out of the slope fit.
pub const FLOOR_GUARD: f64 = 10.0;
/// The reference is adequate when its floor is at most this fraction of the smallest measured error.
pub const FLOOR_ADEQUACY: f64 = 0.05;

/// Inputs of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub system: LtiSystem,
    pub horizon: f64,
    /// Sample counts, strictly increasing.
    pub n_list: Vec<usize>,
    /// The reference uses `2^ref_depth · max(n_list)` samples.
    pub ref_depth: u32,
    /// Number of Monte Carlo paths.
    pub seeds: usize,
    pub variant: BoundVariant,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return Err(Error::InvalidInput("n_list must hold positive counts".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("n_list must be strictly increasing".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidInput("seeds must be at least 1".into()));
        }
        if self.ref_depth > 24 {
            return Err(Error::InvalidInput(format!("ref_depth must lie in 0..=24, got {}", self.ref_depth)));
        }
        let reference = self.reference_n();
        if let Some(n) = self.n_list.iter().find(|&&n| reference % n != 0) {
            return Err(Error::InvalidInput(format!("n = {n} does not divide the reference count {reference}")));
        }
        Ok(())
    }

    /// `2^ref_depth · max(n_list)`.
    pub fn reference_n(&self) -> usize {
        self.n_list.last().copied().unwrap_or(1) << self.ref_depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    /// `E‖ẑ_{T,n} − ẑ_ref‖²`.
    pub error_sq: f64,
    pub bound_value: f64,
    /// A-priori error bound substituted into the bound constants.
    pub a_priori_bound: f64,
    pub used_in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub variant: BoundVariant,
    pub horizon: f64,
    pub reference_n: usize,
    pub rows: Vec<RateRow>,
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// `E‖ẑ_ref/2 − ẑ_ref‖²`, the error of the reference's previous level
    /// (zero when the reference count is odd).
    pub ref_floor: f64,
    /// Whether the floor is below 5% of the smallest measured error.
    pub floor_adequate: bool,
    /// Set when no slope could be fitted.
    pub inconclusive: Option<String>,
}

impl RateReport {
    /// Whether every measured error lies below its theoretical bound.
    pub fn bounds_hold(&self) -> bool {
        self.rows.iter().all(|r| r.error_sq <= r.bound_value)
    }
}

/// Deterministic errors `tr P(n) − tr P(ref)`, bounds and a log-log slope fit.
pub fn convergence_study(cfg: &StudyConfig) -> Result<RateReport> {
    cfg.validate()?;
    let sys = &cfg.system;
    let reference_n = cfg.reference_n();
    let ref_trace = posterior_covariance_uniform(sys, cfg.horizon, reference_n)?.trace();
    let ref_floor = if reference_n % 2 == 0 {
        let half_trace = posterior_covariance_uniform(sys, cfg.horizon, reference_n / 2)?.trace();
        (half_trace - ref_trace).max(0.0)
    } else {
        0.0
    };

    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let error_sq = posterior_covariance_uniform(sys, cfg.horizon, n)?.trace() - ref_trace;
        let report = bound_constants(sys, cfg.horizon, n, cfg.variant)?;
        rows.push(RateRow {
            n,
            error_sq,
            bound_value: report.bound_value,
            a_priori_bound: report.a_priori_error,
            used_in_fit: error_sq > FLOOR_GUARD * ref_floor,
        });
    }
    crate::error::ensure_finite("study errors", rows.iter().map(|r| &r.error_sq))?;

    let smallest = rows.iter().map(|r| r.error_sq).fold(f64::INFINITY, f64::min);
    let floor_adequate = ref_floor <= FLOOR_ADEQUACY * smallest;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.used_in_fit)
        .map(|r| ((r.n as f64).ln(), r.error_sq.ln()))
        .unzip();
    let (fitted_slope, slope_stderr, inconclusive) = if xs.len() >= 2 {
        let fit = fit_slope(&xs, &ys)?;
        (Some(fit.slope), Some(fit.stderr), None)
    } else {
        let reason = format!(
            "only {} of {} errors exceed {FLOOR_GUARD}x the reference floor {ref_floor:e}",
            xs.len(),
            rows.len()
        );
        (None, None, Some(reason))
    };

    Ok(RateReport {
        variant: cfg.variant,
        horizon: cfg.horizon,
        reference_n,
        rows,
        fitted_slope,
        slope_stderr,
        ref_floor,
        floor_adequate,
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::error_trace;
    use crate::systems::{random_system, SystemOptions};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn config(input: usize, seed: u64) -> StudyConfig {
        let mut rng = StdRng::seed_from_u64(seed);
        let system = random_system(&mut rng, &SystemOptions { state: 3, input, output: 1, ..Default::default() });
        StudyConfig {
            system,
            horizon: 1.0,
            n_list: vec![2, 4, 8, 16],
            ref_depth: 6,
            seeds: 1,
            variant: if input == 0 { BoundVariant::Noiseless } else { BoundVariant::InputNoise },
        }
    }

    #[test]
    fn validation() {
        let mut cfg = config(0, 1);
        assert!(cfg.validate().is_ok());
        cfg.n_list = vec![4, 2];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![3, 4];
        assert!(cfg.validate().is_err());
        cfg.n_list = vec![2, 4];
        cfg.seeds = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn errors_match_error_trace_and_decrease() {
        let cfg = config(1, 2);
        let report = convergence_study(&cfg).unwrap();
        let reference: Vec<f64> = (1..=cfg.reference_n()).map(|i| i as f64 / cfg.reference_n() as f64).collect();
        for row in &report.rows {
            let coarse: Vec<f64> = (1..=row.n).map(|i| i as f64 / row.n as f64).collect();
            let direct = error_trace(&cfg.system, &coarse, &reference, 1.0).unwrap();
            assert!((row.error_sq - direct).abs() < 1e-10);
        }
        for w in report.rows.windows(2) {
            assert!(w[0].error_sq >= w[1].error_sq);
        }
        assert!(report.bounds_hold());
    }

    #[test]
    fn errors_do_not_depend_on_seeds() {
        let mut cfg = config(0, 3);
        let a = convergence_study(&cfg).unwrap();
        cfg.seeds = 77;
        let b = convergence_study(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn dominated_floor_is_inconclusive() {
        let mut cfg = config(0, 4);
        cfg.ref_depth = 1;
        cfg.n_list = vec![32, 64];
        let report = convergence_study(&cfg).unwrap();
        assert!(report.fitted_slope.is_none());
        assert!(report.inconclusive.is_some());
    }
}
