//! Galerkin truncation of the one-dimensional wave equation on `[0, 1]`
//! with the initial velocity spread over the modes `sin(2^k π s)`.
//!
//! Each mode `k` contributes the energy coordinates `(ξ_k, v_k)`, where `v_k`
//! is the velocity coefficient and `ξ_k` the displacement coefficient times the
//! frequency `ω_k = 2^k π`. The Euclidean norm of the state then equals the
//! `H¹₀ × L²` energy norm and the generator block `[[0, ω_k], [−ω_k, 0]]` is
//! skew-symmetric. The output reads `(c_k / √2) ξ_k` from every mode, i.e.
//! `dy = (1/√2) Σ a_k c_k sin(ω_k t) dt + dw`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::posterior_covariance_uniform;
use crate::lti::{c_tilde, LtiSystem};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveConfig {
    /// Mode exponents `k`, strictly increasing; mode `k` has frequency `2^k π`.
    pub mode_exponents: Vec<u32>,
    /// Output weights `c_{2^k}`.
    pub c_coeffs: Vec<f64>,
    /// Standard deviations `σ_k` of the initial velocity coefficients.
    pub sigmas: Vec<f64>,
    /// Output noise intensity.
    pub r: f64,
}

impl WaveConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.mode_exponents.len();
        if m == 0 {
            return Err(Error::InvalidInput("the wave instance needs at least one mode".into()));
        }
        if self.c_coeffs.len() != m || self.sigmas.len() != m {
            return Err(Error::Dimension(format!(
                "{m} modes but {} output weights and {} standard deviations",
                self.c_coeffs.len(),
                self.sigmas.len()
            )));
        }
        if self.mode_exponents.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("mode exponents must be strictly increasing".into()));
        }
        if self.mode_exponents.iter().any(|&k| k > 30) {
            return Err(Error::InvalidInput("mode exponents above 30 are not supported".into()));
        }
        crate::error::ensure_finite("wave coefficients", self.c_coeffs.iter().chain(&self.sigmas))?;
        if self.sigmas.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidInput("standard deviations must be non-negative".into()));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidInput(format!("R must be positive, got {}", self.r)));
        }
        Ok(())
    }

    /// `tr P₀ = Σ σ_k²`.
    pub fn initial_trace(&self) -> f64 {
        self.sigmas.iter().map(|s| s * s).sum()
    }

    /// Operator norm of the output map, `(Σ c_k² / 2)^{1/2}`.
    pub fn output_norm(&self) -> f64 {
        (self.c_coeffs.iter().map(|c| c * c).sum::<f64>() / 2.0).sqrt()
    }

    /// Index of the velocity coordinate of mode `k`.
    pub fn velocity_index(&self, k: u32) -> Option<usize> {
        self.mode_exponents.iter().position(|&e| e == k).map(|j| 2 * j + 1)
    }
}

pub fn wave_instance(cfg: &WaveConfig) -> Result<LtiSystem> {
    cfg.validate()?;
    let p = 2 * cfg.mode_exponents.len();
    let mut a = DMatrix::zeros(p, p);
    let mut c = DMatrix::zeros(1, p);
    let mut p0 = DMatrix::zeros(p, p);
    for (j, &k) in cfg.mode_exponents.iter().enumerate() {
        let omega = 2f64.powi(k as i32) * PI;
        a[(2 * j, 2 * j + 1)] = omega;
        a[(2 * j + 1, 2 * j)] = -omega;
        c[(0, 2 * j)] = cfg.c_coeffs[j] / SQRT_2;
        p0[(2 * j + 1, 2 * j + 1)] = cfg.sigmas[j] * cfg.sigmas[j];
    }
    LtiSystem::noiseless(a, c, DMatrix::from_element(1, 1, cfg.r), p0, DVector::zeros(p))
}

/// `8 Σ_{k > l} σ_k² c_{2^k}² / (π² R + 4π² ‖C‖² tr P₀)` over the configured modes.
pub fn wave_lower_bound(cfg: &WaveConfig, level: u32, initial_trace: f64, output_norm: f64) -> f64 {
    let tail: f64 = cfg
        .mode_exponents
        .iter()
        .zip(cfg.sigmas.iter().zip(&cfg.c_coeffs))
        .filter(|(&k, _)| k > level)
        .map(|(_, (s, c))| s * s * c * c)
        .sum();
    8.0 * tail / (PI * PI * cfg.r + 4.0 * PI * PI * output_norm * output_norm * initial_trace)
}

/// Observation map `(C/2)(∫_{t−h}^{t} e^{As} ds − ∫_{t}^{t+h} e^{As} ds)` of the
/// symmetric interpolant-differenced sample at `t`.
pub fn symmetric_kernel(sys: &LtiSystem, t: f64, h: f64) -> Result<DMatrix<f64>> {
    Ok(c_tilde(sys, t - h, t, t + h)?.matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveRow {
    pub l: u32,
    /// `E‖ẑ_{1,2^l} − ẑ_ref‖²`.
    pub error_sq: f64,
    pub lower_bound: f64,
}

impl WaveRow {
    pub fn holds(&self) -> bool {
        self.error_sq >= self.lower_bound
    }
}

/// Errors of the `2^l`-sample estimates at `T = 1` against the
/// `2^reference_level`-sample reference, beside the lower bound.
pub fn wave_slow_convergence_demo(cfg: &WaveConfig, levels: &[u32], reference_level: u32) -> Result<Vec<WaveRow>> {
    let sys = wave_instance(cfg)?;
    let max_level = levels.iter().copied().max().unwrap_or(0);
    let top_mode = *cfg.mode_exponents.last().expect("validated");
    if top_mode < max_level + 1 {
        return Err(Error::InvalidInput(format!(
            "modes reach 2^{top_mode} but level {max_level} needs mode 2^{}",
            max_level + 1
        )));
    }
    if reference_level <= max_level || reference_level > 24 {
        return Err(Error::InvalidInput(format!(
            "reference level {reference_level} must exceed every tested level and be at most 24"
        )));
    }
    let ref_trace = posterior_covariance_uniform(&sys, 1.0, 1 << reference_level)?.trace();
    let (trace, norm) = (cfg.initial_trace(), cfg.output_norm());
    levels
        .iter()
        .map(|&l| {
            let error_sq = posterior_covariance_uniform(&sys, 1.0, 1 << l)?.trace() - ref_trace;
            Ok(WaveRow { l, error_sq, lower_bound: wave_lower_bound(cfg, l, trace, norm) })
        })
        .collect()
}
